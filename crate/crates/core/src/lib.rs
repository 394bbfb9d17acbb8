//! Frequency-domain mask-perturbation explanations for multichannel
//! time-series classifiers.
//!
//! The crate is layered bottom-up:
//!
//! * [`diff`]: tensors, a reverse-mode tape and Adam.
//! * [`spectral`]: DFT, Hermitian projection, band partitions.
//! * [`synth`]: seeded multi-subject data with known informative cells.
//! * [`models`]: small end-to-end classifiers over raw epochs.
//! * [`explainer`]: learned masks and perturbation generators.
//! * [`evaluate`]: removal/feed-in games, baselines, KDE, sweeps, LOSO.

pub mod diff;
mod error;
pub mod evaluate;
pub mod explainer;
pub mod models;
pub mod spectral;
pub mod synth;
pub mod textio;

pub use error::{Error, Result};
pub use explainer::{ExplainerConfig, Mask, PerturbationGenerator, SaliencyMap};

pub use models::{Architecture, Model, ModelConfig, TrainConfig};
pub use spectral::{BandPartition, Spectrum};
pub use synth::{Dataset, Epoch, GroundTruth, SynthConfig};
