//! Shared fixtures for the benchmarks.

use freqmask::models::{build_model, Model, ModelConfig};
use freqmask::synth::{compute_clusters, generate_dataset, ClusterSet, Dataset, Epoch, SynthConfig};

/// A small default-geometry dataset with an untrained model and its clusters.
pub struct Fixture {
    pub dataset: Dataset,
    pub model: Model,
    pub clusters: ClusterSet,
}

impl Fixture {
    pub fn new() -> Self {
        let config = SynthConfig {
            n_subjects: 2,
            epochs_per_subject_per_class: 4,
            ..SynthConfig::default()
        };
        let dataset = generate_dataset(1, &config).unwrap();
        let model = build_model(&ModelConfig::mini_cnn(config.channels, config.samples(), 3)).unwrap();
        let epochs: Vec<&Epoch> = dataset.epochs.iter().collect();
        let clusters = compute_clusters(&epochs).unwrap();
        Fixture { dataset, model, clusters }
    }

    pub fn epoch(&self) -> &Epoch {
        &self.dataset.epochs[0]
    }
}

impl Default for Fixture {
    fn default() -> Self {
        Self::new()
    }
}
