//! Validation protocols for saliency maps.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::{group_saliency, optimize_mask, perturbed_signal, Explanation, ExplainerConfig, SaliencyMap};
use crate::models::{build_model, train_model, Model, ModelConfig, TrainConfig};
use crate::spectral::{band_powers, dft_forward_with, dft_inverse_with, BandPartition, FourierPlan, Spectrum};
use crate::synth::{compute_clusters, loso_splits, ClusterSet, Epoch};
use crate::textio;

/// Median of `values`; the mean of the two middle elements for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Cells strictly above the median are salient.
pub fn threshold_split(values: &[f64]) -> (Vec<bool>, f64) {
    let m = median(values);
    (values.iter().map(|&v| v > m).collect(), m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportLevel {
    Group,
    Instance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalReport {
    pub level: ReportLevel,
    pub accuracy_original: f64,
    pub accuracy_remove_nonsalient: f64,
    pub accuracy_remove_salient: f64,
    /// Median threshold of the split's map (group level) or mean of the
    /// per-instance thresholds; absent for an explicit split.
    pub threshold: Option<f64>,
    pub n_epochs: usize,
}

impl RemovalReport {
    pub fn rn_drop(&self) -> f64 {
        self.accuracy_original - self.accuracy_remove_nonsalient
    }

    pub fn rs_drop(&self) -> f64 {
        self.accuracy_original - self.accuracy_remove_salient
    }

    /// `RN − RS`.
    pub fn gap(&self) -> f64 {
        self.accuracy_remove_nonsalient - self.accuracy_remove_salient
    }
}

/// Zeroes every bin (with its conjugate partner) of the flagged
/// `(channel, band)` cells and returns the time-domain signal.
pub fn remove_cells(
    plan: &FourierPlan,
    signal: &[f64],
    channels: usize,
    zero: &[bool],
    partition: &BandPartition,
) -> Result<Vec<f64>> {
    let bands = partition.num_bands();
    if zero.len() != channels * bands {
        return Err(Error::contract(format!(
            "split of {} cells for {channels} channels x {bands} bands",
            zero.len()
        )));
    }
    let mut spec = dft_forward_with(plan, signal, channels)?;
    zero_cells(&mut spec, zero, partition);
    dft_inverse_with(plan, &spec)
}

fn zero_cells(spec: &mut Spectrum, zero: &[bool], partition: &BandPartition) {
    let t = spec.bins;
    let bands = partition.num_bands();
    for (k, &b) in partition.band_of_bin().iter().enumerate() {
        for c in 0..spec.channels {
            if zero[c * bands + b] {
                spec.re[c * t + k] = 0.0;
                spec.im[c * t + k] = 0.0;
            }
        }
    }
}

fn correct_flags(model: &Model, signals: &[Vec<f64>], epochs: &[&Epoch]) -> Result<Vec<bool>> {
    let refs: Vec<&[f64]> = signals.iter().map(Vec::as_slice).collect();
    Ok(model
        .predict_signals(&refs)?
        .iter()
        .zip(epochs)
        .map(|(p, e)| p.label == e.label)
        .collect())
}

fn rate(flags: &[bool]) -> f64 {
    flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
}

fn check_partition(epochs: &[&Epoch], partition: &BandPartition) -> Result<()> {
    if epochs.is_empty() {
        return Err(Error::contract("no epochs to evaluate"));
    }
    if epochs.iter().any(|e| e.samples != partition.num_bins()) {
        return Err(Error::contract("partition does not match the epoch length"));
    }
    Ok(())
}

/// Accuracy with every epoch reduced by the same cell removal.
pub fn accuracy_after_removal(
    model: &Model,
    epochs: &[&Epoch],
    zero: &[bool],
    partition: &BandPartition,
) -> Result<f64> {
    check_partition(epochs, partition)?;
    let plan = FourierPlan::new(partition.num_bins());
    let signals = epochs
        .iter()
        .map(|e| remove_cells(&plan, &e.data, e.channels, zero, partition))
        .collect::<Result<Vec<_>>>()?;
    Ok(rate(&correct_flags(model, &signals, epochs)?))
}

/// Group-level removal and feed-in game for one salient/non-salient split.
pub fn removal_feed_in(
    model: &Model,
    epochs: &[&Epoch],
    salient: &[bool],
    partition: &BandPartition,
) -> Result<RemovalReport> {
    check_partition(epochs, partition)?;
    let nonsalient: Vec<bool> = salient.iter().map(|s| !s).collect();
    let original = crate::models::accuracy(model, epochs)?;
    Ok(RemovalReport {
        level: ReportLevel::Group,
        accuracy_original: original,
        accuracy_remove_nonsalient: accuracy_after_removal(model, epochs, &nonsalient, partition)?,
        accuracy_remove_salient: accuracy_after_removal(model, epochs, salient, partition)?,
        threshold: None,
        n_epochs: epochs.len(),
    })
}

/// Group-level game using the median split of `map`.
pub fn removal_for_map(
    model: &Model,
    epochs: &[&Epoch],
    map: &SaliencyMap,
    partition: &BandPartition,
) -> Result<RemovalReport> {
    let (salient, threshold) = threshold_split(&map.values);
    let mut report = removal_feed_in(model, epochs, &salient, partition)?;
    report.threshold = Some(threshold);
    Ok(report)
}

/// Instance-level game: each epoch is split by its own map and scored
/// individually.
pub fn removal_feed_in_instances(
    model: &Model,
    epochs: &[&Epoch],
    maps: &[SaliencyMap],
    partition: &BandPartition,
) -> Result<RemovalReport> {
    check_partition(epochs, partition)?;
    if maps.len() != epochs.len() {
        return Err(Error::contract(format!("{} maps for {} epochs", maps.len(), epochs.len())));
    }
    let plan = FourierPlan::new(partition.num_bins());
    let mut rn = Vec::with_capacity(epochs.len());
    let mut rs = Vec::with_capacity(epochs.len());
    let mut thresholds = 0.0;
    for (e, m) in epochs.iter().zip(maps) {
        let (salient, th) = threshold_split(&m.values);
        let nonsalient: Vec<bool> = salient.iter().map(|s| !s).collect();
        thresholds += th;
        rn.push(remove_cells(&plan, &e.data, e.channels, &nonsalient, partition)?);
        rs.push(remove_cells(&plan, &e.data, e.channels, &salient, partition)?);
    }
    Ok(RemovalReport {
        level: ReportLevel::Instance,
        accuracy_original: crate::models::accuracy(model, epochs)?,
        accuracy_remove_nonsalient: rate(&correct_flags(model, &rn, epochs)?),
        accuracy_remove_salient: rate(&correct_flags(model, &rs, epochs)?),
        threshold: Some(thresholds / epochs.len() as f64),
        n_epochs: epochs.len(),
    })
}

/// Per-bin standard deviation of the real and imaginary parts across the
/// spectra of `epochs` (population form).
pub fn spectral_std(epochs: &[&Epoch], plan: &FourierPlan) -> Result<Spectrum> {
    let first = epochs.first().ok_or_else(|| Error::contract("no epochs"))?;
    let (ch, t) = (first.channels, first.samples);
    let n = epochs.len() as f64;
    let mut sum = Spectrum::zeros(ch, t);
    let mut sq = Spectrum::zeros(ch, t);
    for e in epochs {
        let s = dft_forward_with(plan, &e.data, ch)?;
        for j in 0..ch * t {
            sum.re[j] += s.re[j];
            sum.im[j] += s.im[j];
            sq.re[j] += s.re[j] * s.re[j];
            sq.im[j] += s.im[j] * s.im[j];
        }
    }
    let sd = |s: f64, q: f64| (q / n - (s / n) * (s / n)).max(0.0).sqrt();
    let re = sum.re.iter().zip(&sq.re).map(|(&s, &q)| sd(s, q)).collect();
    let im = sum.im.iter().zip(&sq.im).map(|(&s, &q)| sd(s, q)).collect();
    Spectrum::new(ch, t, re, im)
}

/// easyPEASI baseline: accuracy drop when one `(channel, band)` cell is
/// replaced by zero-mean Gaussian noise with the data's per-bin scale.
/// Returns a row-major `channels × bands` grid of drops.
pub fn easy_peasi(
    model: &Model,
    epochs: &[&Epoch],
    partition: &BandPartition,
    noise_seed: u64,
) -> Result<Vec<f64>> {
    check_partition(epochs, partition)?;
    let (ch, t) = (epochs[0].channels, epochs[0].samples);
    let bands = partition.num_bands();
    let plan = FourierPlan::new(t);
    let sd = spectral_std(epochs, &plan)?;
    let spectra = epochs
        .iter()
        .map(|e| dft_forward_with(&plan, &e.data, ch))
        .collect::<Result<Vec<_>>>()?;
    let original = crate::models::accuracy(model, epochs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut drops = Vec::with_capacity(ch * bands);
    for c in 0..ch {
        for b in 0..bands {
            let bins: Vec<usize> = partition.positive_bins(b).collect();
            let mut signals = Vec::with_capacity(epochs.len());
            for s in &spectra {
                let mut s = s.clone();
                for &k in &bins {
                    let j = c * t + k;
                    let re = sd.re[j] * std_normal.sample(&mut rng);
                    let im = if k == 0 || 2 * k == t {
                        0.0
                    } else {
                        sd.im[j] * std_normal.sample(&mut rng)
                    };
                    let mirror = c * t + (t - k) % t;
                    s.re[j] = re;
                    s.im[j] = im;
                    s.re[mirror] = re;
                    s.im[mirror] = -im;
                }
                signals.push(dft_inverse_with(&plan, &s)?);
            }
            drops.push(original - rate(&correct_flags(model, &signals, epochs)?));
        }
    }
    Ok(drops)
}

/// Product-kernel Gaussian KDE with one bandwidth per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKde {
    points: Vec<Vec<f64>>,
    bandwidth: Vec<f64>,
}

impl GaussianKde {
    pub fn with_bandwidth(points: Vec<Vec<f64>>, bandwidth: Vec<f64>) -> Result<Self> {
        let d = bandwidth.len();
        if points.is_empty() {
            return Err(Error::contract("KDE needs at least one point"));
        }
        if points.iter().any(|p| p.len() != d) {
            return Err(Error::dim("KDE points and bandwidth differ in dimension"));
        }
        if bandwidth.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::contract("KDE bandwidths must be positive and finite"));
        }
        Ok(GaussianKde { points, bandwidth })
    }

    /// Scott's rule `h_j = σ_j · n^(−1/(d+4))`, σ with the `n − 1` divisor.
    pub fn scott(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(Error::contract("Scott's rule needs at least two points"));
        }
        let d = points[0].len();
        let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
        let bandwidth = (0..d).map(|j| column_std(&points, j) * factor).collect();
        Self::with_bandwidth(points, bandwidth)
    }

    pub fn dimension(&self) -> usize {
        self.bandwidth.len()
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dimension() {
            return Err(Error::dim("query point has the wrong dimension"));
        }
        let norm: f64 = self
            .bandwidth
            .iter()
            .map(|h| (2.0 * std::f64::consts::PI).sqrt().ln() + h.ln())
            .sum();
        let exps: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                -0.5 * p
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidth)
                    .map(|((a, b), h)| ((a - b) / h).powi(2))
                    .sum::<f64>()
            })
            .collect();
        Ok(crate::diff::log_sum_exp(&exps) - (self.points.len() as f64).ln() - norm)
    }

    pub fn mean_log_likelihood(&self, queries: &[Vec<f64>]) -> Result<f64> {
        if queries.is_empty() {
            return Err(Error::contract("no query points"));
        }
        let mut total = 0.0;
        for q in queries {
            total += self.log_density(q)?;
        }
        Ok(total / queries.len() as f64)
    }
}

fn column_std(points: &[Vec<f64>], j: usize) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p[j]).sum::<f64>() / n;
    (points.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeReport {
    pub bandwidth: Vec<f64>,
    pub dimension: usize,
    pub mean_log_likelihood: f64,
    pub dropped_dimensions: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Flattened `channels × bands` band powers of a signal.
pub fn band_power_features(plan: &FourierPlan, signal: &[f64], channels: usize, partition: &BandPartition) -> Result<Vec<f64>> {
    band_powers(&dft_forward_with(plan, signal, channels)?, partition)
}

/// Mean log-likelihood of perturbed band-power features under a Scott's-rule
/// KDE fitted to the original features.
pub fn kde_discrepancy(
    original: &[&[f64]],
    perturbed: &[&[f64]],
    channels: usize,
    partition: &BandPartition,
) -> Result<KdeReport> {
    if original.is_empty() || perturbed.is_empty() {
        return Err(Error::contract("KDE needs non-empty original and perturbed sets"));
    }
    let plan = FourierPlan::new(partition.num_bins());
    let feats = |set: &[&[f64]]| -> Result<Vec<Vec<f64>>> {
        set.iter()
            .map(|s| band_power_features(&plan, s, channels, partition))
            .collect()
    };
    let orig = feats(original)?;
    let pert = feats(perturbed)?;
    let d = orig[0].len();
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for j in 0..d {
        let sd = if orig.len() > 1 { column_std(&orig, j) } else { 0.0 };
        if sd > 0.0 && sd.is_finite() {
            keep.push(j);
        } else {
            dropped.push(j);
        }
    }
    if !dropped.is_empty() {
        warnings.push(format!("dropped {} zero-variance feature dimensions: {dropped:?}", dropped.len()));
    }
    if keep.is_empty() {
        return Err(Error::contract("every KDE feature dimension has zero variance"));
    }
    let select = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect()
    };
    let kde = GaussianKde::scott(select(orig))?;
    let score = kde.mean_log_likelihood(&select(pert))?;
    if !score.is_finite() {
        return Err(Error::NonFinite(format!("KDE log-likelihood {score}")));
    }
    Ok(KdeReport {
        bandwidth: kde.bandwidth().to_vec(),
        dimension: kde.dimension(),
        mean_log_likelihood: score,
        dropped_dimensions: dropped,
        warnings,
    })
}

/// Everything one explain + evaluate pass produces for a set of epochs.
#[derive(Debug, Clone)]
pub struct ExplainedSet {
    pub maps: Vec<SaliencyMap>,
    pub group: SaliencyMap,
    pub perturbed: Vec<Vec<f64>>,
}

/// Explains every epoch independently, in parallel, keeping input order.
pub fn explain_all(
    model: &Model,
    epochs: &[&Epoch],
    clusters: &ClusterSet,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<Vec<Explanation>> {
    use rayon::prelude::*;
    epochs
        .par_iter()
        .map(|e| optimize_mask(model, e, clusters, config, seed))
        .collect()
}

/// Explains every epoch, averages the maps and builds each perturbed signal.
pub fn explain_set(
    model: &Model,
    epochs: &[&Epoch],
    clusters: &ClusterSet,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<ExplainedSet> {
    if epochs.is_empty() {
        return Err(Error::contract("nothing to explain"));
    }
    let partition = crate::spectral::make_partition(epochs[0].samples, config.num_bands)?;
    let explanations = explain_all(model, epochs, clusters, config, seed)?;
    let mut maps = Vec::with_capacity(epochs.len());
    let mut perturbed = Vec::with_capacity(epochs.len());
    for (e, ex) in epochs.iter().zip(explanations) {
        perturbed.push(perturbed_signal(e, &ex.mask, &ex.generator, &partition)?);
        maps.push(ex.map);
    }
    Ok(ExplainedSet {
        group: group_saliency(&maps)?,
        maps,
        perturbed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub kde: f64,
    pub rs_drop: f64,
    pub rn_drop: f64,
    pub report: RemovalReport,
}

/// Runs explain + group removal + KDE for each λ.
pub fn lambda_sweep(
    model: &Model,
    epochs: &[&Epoch],
    reference: &[&Epoch],
    clusters: &ClusterSet,
    lambdas: &[f64],
    config: &ExplainerConfig,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if lambdas.is_empty() {
        return Err(Error::contract("lambda sweep needs at least one value"));
    }
    if epochs.is_empty() || reference.is_empty() {
        return Err(Error::contract("lambda sweep needs epochs to explain and reference epochs"));
    }
    let partition = crate::spectral::make_partition(epochs[0].samples, config.num_bands)?;
    let originals: Vec<&[f64]> = reference.iter().map(|e| e.data.as_slice()).collect();
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cfg = ExplainerConfig {
            lambda,
            ..config.clone()
        };
        let set = explain_set(model, epochs, clusters, &cfg, seed)?;
        let report = removal_for_map(model, epochs, &set.group, &partition)?;
        let perturbed: Vec<&[f64]> = set.perturbed.iter().map(Vec::as_slice).collect();
        let kde = kde_discrepancy(&originals, &perturbed, epochs[0].channels, &partition)?;
        rows.push(SweepRow {
            lambda,
            kde: kde.mean_log_likelihood,
            rs_drop: report.rs_drop(),
            rn_drop: report.rn_drop(),
            report,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub explainer: ExplainerConfig,
    /// Explain at most this many held-out epochs per split (evenly spaced);
    /// `None` explains all of them. Removal always uses the full held-out set.
    pub max_explained: Option<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoFold {
    pub held_out_subject: usize,
    pub n_train: usize,
    pub report: RemovalReport,
    pub map: SaliencyMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LosoReport {
    pub folds: Vec<LosoFold>,
    /// Mean of the per-fold unseen-subject group maps.
    pub unseen_map: SaliencyMap,
}

/// Evenly spaced subset of at most `max` items, keeping order.
pub fn spaced<T: Copy>(items: &[T], max: Option<usize>) -> Vec<T> {
    match max {
        Some(m) if m < items.len() => (0..m).map(|i| items[i * items.len() / m]).collect(),
        _ => items.to_vec(),
    }
}

pub fn loso_study(epochs: &[Epoch], config: &LosoConfig) -> Result<LosoReport> {
    let splits = loso_splits(epochs)?;
    let partition = crate::spectral::make_partition(config.model.samples, config.explainer.num_bands)?;
    let mut folds = Vec::with_capacity(splits.len());
    for split in &splits {
        let train: Vec<&Epoch> = split.train.iter().map(|&i| &epochs[i]).collect();
        let held: Vec<&Epoch> = split.held_out.iter().map(|&i| &epochs[i]).collect();
        let mut model = build_model(&config.model)?;
        train_model(&mut model, &train, Some(&held), &config.train)?;
        let clusters = compute_clusters(&train)?;
        let explained = spaced(&held, config.max_explained);
        let set = explain_set(&model, &explained, &clusters, &config.explainer, config.seed)?;
        let report = removal_for_map(&model, &held, &set.group, &partition)?;
        folds.push(LosoFold {
            held_out_subject: split.held_out_subject,
            n_train: train.len(),
            report,
            map: set.group,
        });
    }
    let maps: Vec<SaliencyMap> = folds.iter().map(|f| f.map.clone()).collect();
    Ok(LosoReport {
        unseen_map: group_saliency(&maps)?,
        folds,
    })
}

/// Analytic generator costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorFlops {
    /// `2 · Ch · 2T²`: two `T × T` branches per channel, two FLOPs per
    /// multiply-add.
    pub two_branch: u64,
    /// `6 · D² · T` with `D = Ch`.
    pub gru: u64,
    /// One `T × T` dense map at two FLOPs per multiply-add, `2T²`.
    pub single_map: u64,
    /// `2 · 6 · D² · T`.
    pub gru_two_per_mac: u64,
}

pub fn generator_flops(channels: usize, samples: usize) -> GeneratorFlops {
    let (ch, t) = (channels as u64, samples as u64);
    GeneratorFlops {
        two_branch: 2 * ch * 2 * t * t,
        gru: 6 * ch * ch * t,
        single_map: 2 * t * t,
        gru_two_per_mac: 2 * 6 * ch * ch * t,
    }
}

pub const REPORT_HEADER: &str = "condition,accuracy,n_epochs,seed,config_hash";

/// Comma-separated removal table with rows `Ori`, `RN`, `RS`.
pub fn report_csv(report: &RemovalReport, seed: u64, config_hash: &str) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (name, acc) in [
        ("Ori", report.accuracy_original),
        ("RN", report.accuracy_remove_nonsalient),
        ("RS", report.accuracy_remove_salient),
    ] {
        out.push_str(&format!("{name},{acc:.17e},{},{seed},{config_hash}\n", report.n_epochs));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub report: RemovalReport,
    pub seed: u64,
    pub config_hash: String,
    pub salient_cells: Vec<bool>,
}

pub fn save_report(csv_path: &Path, meta_path: &Path, meta: &ReportMetadata) -> Result<()> {
    textio::write_text(csv_path, &report_csv(&meta.report, meta.seed, &meta.config_hash))?;
    textio::write_record(meta_path, meta)
}

/// Parses a removal table back into `(condition, accuracy)` pairs.
pub fn parse_report_csv(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = textio::read_text(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(Error::load(path, "header", format!("expected `{REPORT_HEADER}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 {
                return Err(Error::load(path, format!("row {}", i + 1), "expected 5 columns"));
            }
            let acc = cols[1]
                .parse()
                .map_err(|_| Error::load(path, format!("row {}.accuracy", i + 1), "not a number"))?;
            Ok((cols[0].to_string(), acc))
        })
        .collect()
}
