//! Multi-subject synthetic EEG-like data with known class-informative
//! (channel, band) cells, per-subject cluster centers, and
//! leave-one-subject-out splits.
//!
//! Every epoch is a sum of sinusoids placed exactly on DFT bins, so each
//! component lands in a single frequency band. Subjects differ in rhythm
//! amplitudes, phases, and a per-channel DC offset; epochs of one subject
//! share phases up to a subject-specific jitter, which makes subjects form
//! tight clusters. Class-1 epochs carry extra power in one band on a subset
//! of channels.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{dft_forward_with, make_partition, BandPartition, FourierPlan, Spectrum};
use crate::textio;

/// One multichannel time-domain sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epoch {
    pub id: usize,
    pub subject_id: usize,
    pub label: usize,
    pub sample_rate: f64,
    pub channels: usize,
    pub samples: usize,
    /// `channels × samples`, row-major.
    pub data: Vec<f64>,
}

impl Epoch {
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.samples..(c + 1) * self.samples]
    }
}

/// A background rhythm: a sinusoid at `hz` with a nominal amplitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rhythm {
    pub hz: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub channels: usize,
    pub sample_rate: f64,
    pub epoch_seconds: f64,
    pub n_subjects: usize,
    pub epochs_per_subject_per_class: usize,
    /// Band count of the partition ground truth is expressed in.
    pub num_bands: usize,
    pub discriminative_band: usize,
    pub informative_channels: Vec<usize>,
    /// Amplitude of each class-1 sinusoid.
    pub class_gap: f64,
    /// Number of class-1 sinusoids spread across the discriminative band.
    pub class_components: usize,
    pub noise_std: f64,
    pub offset_std: f64,
    /// Log-normal spread of subject rhythm amplitudes.
    pub subject_amplitude_spread: f64,
    /// Relative per-epoch amplitude jitter.
    pub epoch_amplitude_jitter: f64,
    /// Range of the per-channel phase jitter (radians, std of a normal).
    pub phase_noise_range: (f64, f64),
    pub background: Vec<Rhythm>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            channels: 8,
            sample_rate: 200.0,
            epoch_seconds: 2.0,
            n_subjects: 6,
            epochs_per_subject_per_class: 80,
            num_bands: 10,
            discriminative_band: 1,
            informative_channels: vec![0, 1, 2, 3],
            class_gap: 1.0,
            class_components: 3,
            noise_std: 0.3,
            offset_std: 0.8,
            subject_amplitude_spread: 0.3,
            epoch_amplitude_jitter: 0.1,
            phase_noise_range: (0.2, 0.6),
            background: vec![
                Rhythm { hz: 2.0, amplitude: 0.5 },
                Rhythm { hz: 6.0, amplitude: 0.4 },
                Rhythm { hz: 11.5, amplitude: 0.1 },
                Rhythm { hz: 24.0, amplitude: 0.25 },
                Rhythm { hz: 37.0, amplitude: 0.15 },
            ],
        }
    }
}

impl SynthConfig {
    pub fn samples(&self) -> usize {
        (self.sample_rate * self.epoch_seconds).round() as usize
    }

    pub fn partition(&self) -> Result<BandPartition> {
        make_partition(self.samples(), self.num_bands)
    }

    fn validate(&self) -> Result<()> {
        if self.n_subjects < 2 {
            return Err(Error::contract(format!(
                "need at least 2 subjects, got {}",
                self.n_subjects
            )));
        }
        if self.channels == 0 || self.samples() < 2 || self.epochs_per_subject_per_class == 0 {
            return Err(Error::contract("empty dataset geometry"));
        }
        if self.discriminative_band >= self.num_bands {
            return Err(Error::contract(format!(
                "discriminative band {} out of {} bands",
                self.discriminative_band, self.num_bands
            )));
        }
        if let Some(c) = self.informative_channels.iter().find(|&&c| c >= self.channels) {
            return Err(Error::contract(format!("informative channel {c} out of range")));
        }
        let nyquist = self.sample_rate / 2.0;
        if let Some(r) = self.background.iter().find(|r| r.hz < 0.0 || r.hz > nyquist) {
            return Err(Error::contract(format!("rhythm at {} Hz beyond Nyquist", r.hz)));
        }
        if self.class_components == 0 && self.class_gap != 0.0 {
            return Err(Error::contract("class gap without class components"));
        }
        Ok(())
    }
}

/// Which (channel, band) cells carry class information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub channels: usize,
    pub num_bands: usize,
    pub discriminative_band: usize,
    pub informative_channels: Vec<usize>,
    /// DFT bins carrying the class-1 sinusoids.
    pub class_bins: Vec<usize>,
    /// `channels × num_bands` membership grid.
    pub informative: Vec<bool>,
}

impl GroundTruth {
    pub fn is_informative(&self, channel: usize, band: usize) -> bool {
        self.informative[channel * self.num_bands + band]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub subject_id: usize,
    /// `channels × rhythms` amplitudes.
    pub amplitudes: Vec<f64>,
    /// `channels × rhythms` base phases.
    pub phases: Vec<f64>,
    pub phase_noise: Vec<f64>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SynthConfig,
    pub seed: u64,
    pub epochs: Vec<Epoch>,
    pub truth: GroundTruth,
    pub profiles: Vec<SubjectProfile>,
}

fn snap_to_bin(hz: f64, samples: usize, sample_rate: f64) -> usize {
    (hz * samples as f64 / sample_rate).round() as usize
}

fn add_sinusoid(row: &mut [f64], bin: usize, amplitude: f64, phase: f64) {
    let w = 2.0 * PI * bin as f64 / row.len() as f64;
    for (t, x) in row.iter_mut().enumerate() {
        *x += amplitude * (w * t as f64 + phase).cos();
    }
}

/// Bins inside `band` used for the class-1 signal, spread evenly.
fn class_bins(partition: &BandPartition, band: usize, count: usize) -> Vec<usize> {
    let bins: Vec<usize> = partition.positive_bins(band).filter(|&k| k > 0).collect();
    if count == 0 || bins.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|i| bins[((2 * i + 1) * bins.len()) / (2 * count)])
        .collect()
}

/// Generates a labelled dataset; identical seeds give identical data.
pub fn generate_dataset(seed: u64, config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let t = config.samples();
    let partition = config.partition()?;
    let ch = config.channels;
    let n_rhythms = config.background.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let informative = {
        let mut grid = vec![false; ch * config.num_bands];
        for &c in &config.informative_channels {
            grid[c * config.num_bands + config.discriminative_band] = true;
        }
        grid
    };
    let cls_bins = class_bins(&partition, config.discriminative_band, config.class_components);
    let truth = GroundTruth {
        channels: ch,
        num_bands: config.num_bands,
        discriminative_band: config.discriminative_band,
        informative_channels: config.informative_channels.clone(),
        class_bins: cls_bins.clone(),
        informative,
    };

    let lognormal = Normal::new(0.0, config.subject_amplitude_spread.max(0.0))
        .map_err(|e| Error::contract(e.to_string()))?;
    let profiles: Vec<SubjectProfile> = (0..config.n_subjects)
        .map(|s| {
            let amplitudes = (0..ch * n_rhythms)
                .map(|i| config.background[i % n_rhythms].amplitude * lognormal.sample(&mut rng).exp())
                .collect();
            let phases = (0..ch * n_rhythms).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let (lo, hi) = config.phase_noise_range;
            let phase_noise = (0..ch)
                .map(|_| if hi > lo { rng.random_range(lo..hi) } else { lo })
                .collect();
            let offset = (0..ch)
                .map(|_| config.offset_std * rng.sample::<f64, _>(StandardNormal))
                .collect();
            SubjectProfile {
                subject_id: s,
                amplitudes,
                phases,
                phase_noise,
                offset,
            }
        })
        .collect();

    let rhythm_bins: Vec<usize> = config
        .background
        .iter()
        .map(|r| snap_to_bin(r.hz, t, config.sample_rate))
        .collect();
    let is_informative_channel: Vec<bool> =
        (0..ch).map(|c| config.informative_channels.contains(&c)).collect();

    let mut epochs = Vec::with_capacity(config.n_subjects * 2 * config.epochs_per_subject_per_class);
    for profile in &profiles {
        for label in 0..2 {
            for _ in 0..config.epochs_per_subject_per_class {
                let mut data = vec![0.0; ch * t];
                for c in 0..ch {
                    let row = &mut data[c * t..(c + 1) * t];
                    for (r, &bin) in rhythm_bins.iter().enumerate() {
                        let jitter = 1.0 + config.epoch_amplitude_jitter * rng.sample::<f64, _>(StandardNormal);
                        let amp = profile.amplitudes[c * n_rhythms + r] * jitter;
                        let phase = profile.phases[c * n_rhythms + r]
                            + profile.phase_noise[c] * rng.sample::<f64, _>(StandardNormal);
                        add_sinusoid(row, bin, amp, phase);
                    }
                    if label == 1 && is_informative_channel[c] {
                        for &bin in &cls_bins {
                            let jitter = 1.0 + config.epoch_amplitude_jitter * rng.sample::<f64, _>(StandardNormal);
                            let phase = rng.random_range(0.0..2.0 * PI);
                            add_sinusoid(row, bin, config.class_gap * jitter, phase);
                        }
                    }
                    for x in row.iter_mut() {
                        *x += profile.offset[c] + config.noise_std * rng.sample::<f64, _>(StandardNormal);
                    }
                }
                epochs.push(Epoch {
                    id: epochs.len(),
                    subject_id: profile.subject_id,
                    label,
                    sample_rate: config.sample_rate,
                    channels: ch,
                    samples: t,
                    data,
                });
            }
        }
    }
    Ok(Dataset {
        config: config.clone(),
        seed,
        epochs,
        truth,
        profiles,
    })
}

/// Per-subject time-domain centers and frequency-domain samples.
#[derive(Debug, Clone)]
pub struct SubjectCluster {
    pub subject_id: usize,
    pub count: usize,
    pub center: Vec<f64>,
    pub spectra: Vec<Spectrum>,
}

#[derive(Debug, Clone)]
pub struct ClusterSet {
    /// Sorted by subject id.
    pub clusters: Vec<SubjectCluster>,
}

impl ClusterSet {
    pub fn get(&self, subject_id: usize) -> Option<&SubjectCluster> {
        self.clusters.iter().find(|c| c.subject_id == subject_id)
    }
}

/// Groups epochs by subject and computes each subject's mean epoch along
/// with the spectra of its members.
pub fn compute_clusters(epochs: &[&Epoch]) -> Result<ClusterSet> {
    let first = epochs
        .first()
        .ok_or_else(|| Error::contract("cannot cluster an empty training set"))?;
    let (ch, t) = (first.channels, first.samples);
    let plan = FourierPlan::new(t);
    let mut groups: BTreeMap<usize, Vec<&Epoch>> = BTreeMap::new();
    for e in epochs {
        if e.channels != ch || e.samples != t {
            return Err(Error::dim(format!(
                "epoch {} is {}x{}, expected {ch}x{t}",
                e.id, e.channels, e.samples
            )));
        }
        groups.entry(e.subject_id).or_default().push(e);
    }
    let mut clusters = Vec::with_capacity(groups.len());
    for (subject_id, members) in groups {
        let mut center = vec![0.0; ch * t];
        for e in &members {
            for (c, x) in center.iter_mut().zip(&e.data) {
                *c += x;
            }
        }
        let n = members.len() as f64;
        center.iter_mut().for_each(|c| *c /= n);
        let spectra = members
            .iter()
            .map(|e| dft_forward_with(&plan, &e.data, ch))
            .collect::<Result<Vec<_>>>()?;
        clusters.push(SubjectCluster {
            subject_id,
            count: members.len(),
            center,
            spectra,
        });
    }
    Ok(ClusterSet { clusters })
}

/// Subject whose center is nearest in Euclidean distance; ties go to the
/// smaller subject id.
pub fn select_target_cluster(data: &[f64], clusters: &ClusterSet) -> Result<usize> {
    let mut best: Option<(f64, usize)> = None;
    for cluster in &clusters.clusters {
        if cluster.center.len() != data.len() {
            return Err(Error::dim(format!(
                "epoch of {} values vs center of {}",
                data.len(),
                cluster.center.len()
            )));
        }
        let d2: f64 = data
            .iter()
            .zip(&cluster.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        if best.is_none_or(|(bd, _)| d2 < bd) {
            best = Some((d2, cluster.subject_id));
        }
    }
    best.map(|(_, s)| s)
        .ok_or_else(|| Error::contract("no clusters to select from"))
}

/// One leave-one-subject-out fold, as indices into the epoch list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LosoSplit {
    pub held_out_subject: usize,
    pub train: Vec<usize>,
    pub held_out: Vec<usize>,
}

pub fn loso_splits(epochs: &[Epoch]) -> Result<Vec<LosoSplit>> {
    let subjects: std::collections::BTreeSet<usize> = epochs.iter().map(|e| e.subject_id).collect();
    if subjects.len() < 2 {
        return Err(Error::contract(format!(
            "leave-one-subject-out needs at least 2 subjects, got {}",
            subjects.len()
        )));
    }
    Ok(subjects
        .into_iter()
        .map(|s| {
            let (held_out, train): (Vec<usize>, Vec<usize>) =
                (0..epochs.len()).partition(|&i| epochs[i].subject_id == s);
            LosoSplit {
                held_out_subject: s,
                train,
                held_out,
            }
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct TruthRecord {
    seed: u64,
    config: SynthConfig,
    truth: GroundTruth,
}

/// Sidecar file holding the ground truth next to a dataset file.
pub fn truth_path(dataset_path: &Path) -> PathBuf {
    let mut name = dataset_path
        .file_stem()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".truth.json");
    dataset_path.with_file_name(name)
}

/// Writes one epoch record per line plus the ground-truth sidecar.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    textio::write_lines(path, &dataset.epochs)?;
    textio::write_record(
        &truth_path(path),
        &TruthRecord {
            seed: dataset.seed,
            config: dataset.config.clone(),
            truth: dataset.truth.clone(),
        },
    )
}

/// Loads a dataset written by [`write_dataset`]. Subject profiles are not
/// persisted and come back empty.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let epochs: Vec<Epoch> = textio::read_lines(path)?;
    let truth_file = truth_path(path);
    let record: TruthRecord = textio::read_record(&truth_file)?;
    for e in &epochs {
        if e.data.len() != e.channels * e.samples {
            return Err(Error::load(
                path,
                format!("epoch {}.data", e.id),
                format!("{} values for {}x{}", e.data.len(), e.channels, e.samples),
            ));
        }
    }
    Ok(Dataset {
        config: record.config,
        seed: record.seed,
        epochs,
        truth: record.truth,
        profiles: Vec::new(),
    })
}
