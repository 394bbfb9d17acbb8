//! Learned frequency-domain masks.
//!
//! For an epoch `x` with spectrum `X`, a mask `M ∈ [0,1]^{Ch×B}` over bands
//! and a generator `NN` produce the perturbed spectrum
//! `X̂ = X·M + (1 − M)·NN(X)`. Both are optimized jointly so the model's
//! prediction on `x̂ = IDFT(X̂)` stays close to its prediction on `x` while
//! as much of `M` as possible is driven to zero.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{sigmoid, softmax, Adam, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::spectral::{
    conjugate_index, dft_forward_with, dft_inverse_with, enforce_hermitian, make_partition,
    BandPartition, FourierPlan, Spectrum,
};
use crate::synth::{select_target_cluster, ClusterSet, Epoch};
use crate::textio;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainerConfig {
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_relative_improvement: f64,
    pub num_bands: usize,
    pub regularizers_enabled: bool,
    pub one_branch_mode: bool,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        ExplainerConfig {
            lambda: 0.05,
            learning_rate: 0.01,
            max_epochs: 300,
            patience: 10,
            min_relative_improvement: 1e-4,
            num_bands: 10,
            regularizers_enabled: true,
            one_branch_mode: false,
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::contract(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.patience == 0 {
            return Err(Error::contract("patience must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::contract("learning rate must be positive"));
        }
        if self.num_bands == 0 {
            return Err(Error::contract("num_bands must be positive"));
        }
        if !(self.min_relative_improvement >= 0.0) {
            return Err(Error::contract("min_relative_improvement must be >= 0"));
        }
        Ok(())
    }

    /// Short digest identifying this configuration in artifacts.
    pub fn hash(&self) -> String {
        textio::short_hash(&textio::to_line(self).expect("config serializes"))
    }
}

/// Band-level mask stored as unconstrained logits.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub channels: usize,
    pub bands: usize,
    pub logits: Vec<f64>,
}

impl Mask {
    /// Logits 0, i.e. every value 0.5.
    pub fn neutral(channels: usize, bands: usize) -> Self {
        Mask {
            channels,
            bands,
            logits: vec![0.0; channels * bands],
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.logits.iter().map(|&l| sigmoid(l)).collect()
    }
}

/// The generator `NN(·)` producing the replacement spectrum `x^{f,r}`.
///
/// Dense maps act on each channel's row of `T` bins (`y = x·W + b`) and are
/// shared across channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PerturbationGenerator {
    TwoBranch {
        bins: usize,
        real_weight: Vec<f64>,
        real_bias: Vec<f64>,
        imag_weight: Vec<f64>,
        imag_bias: Vec<f64>,
    },
    /// `[Re | Im]` through one `2T × 2T` dense map.
    OneBranch {
        bins: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    },
}

impl PerturbationGenerator {
    pub fn zeros(bins: usize, one_branch: bool) -> Self {
        if one_branch {
            PerturbationGenerator::OneBranch {
                bins,
                weight: vec![0.0; 4 * bins * bins],
                bias: vec![0.0; 2 * bins],
            }
        } else {
            PerturbationGenerator::TwoBranch {
                bins,
                real_weight: vec![0.0; bins * bins],
                real_bias: vec![0.0; bins],
                imag_weight: vec![0.0; bins * bins],
                imag_bias: vec![0.0; bins],
            }
        }
    }

    /// Seeded uniform `±1/√T` weights and biases.
    pub fn seeded(bins: usize, one_branch: bool, seed: u64) -> Self {
        let mut g = Self::zeros(bins, one_branch);
        let bound = 1.0 / (bins as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in g.params_mut() {
            p.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        }
        g
    }

    pub fn bins(&self) -> usize {
        match self {
            PerturbationGenerator::TwoBranch { bins, .. } | PerturbationGenerator::OneBranch { bins, .. } => *bins,
        }
    }

    pub fn is_one_branch(&self) -> bool {
        matches!(self, PerturbationGenerator::OneBranch { .. })
    }

    fn shapes(&self) -> Vec<Vec<usize>> {
        let t = self.bins();
        match self {
            PerturbationGenerator::TwoBranch { .. } => vec![vec![t, t], vec![t], vec![t, t], vec![t]],
            PerturbationGenerator::OneBranch { .. } => vec![vec![2 * t, 2 * t], vec![2 * t]],
        }
    }

    pub fn params(&self) -> Vec<&[f64]> {
        match self {
            PerturbationGenerator::TwoBranch {
                real_weight,
                real_bias,
                imag_weight,
                imag_bias,
                ..
            } => vec![real_weight, real_bias, imag_weight, imag_bias],
            PerturbationGenerator::OneBranch { weight, bias, .. } => vec![weight, bias],
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            PerturbationGenerator::TwoBranch {
                real_weight,
                real_bias,
                imag_weight,
                imag_bias,
                ..
            } => vec![real_weight, real_bias, imag_weight, imag_bias],
            PerturbationGenerator::OneBranch { weight, bias, .. } => vec![weight, bias],
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.shapes()
            .into_iter()
            .zip(self.params())
            .map(|(shape, data)| {
                let t = Tensor::new(shape, data.to_vec()).expect("generator layout");
                if trainable {
                    tape.param(t)
                } else {
                    tape.constant(t)
                }
            })
            .collect()
    }

    /// Records `NN(re + i·im)` followed by the Hermitian projection.
    fn record(&self, tape: &mut Tape, params: &[Var], re: Var, im: Var, conj: &Arc<[usize]>) -> Result<(Var, Var)> {
        let t = self.bins();
        let (raw_re, raw_im) = match self {
            PerturbationGenerator::TwoBranch { .. } => {
                let r = tape.matmul(re, params[0])?;
                let r = tape.add(r, params[1])?;
                let i = tape.matmul(im, params[2])?;
                let i = tape.add(i, params[3])?;
                (r, i)
            }
            PerturbationGenerator::OneBranch { .. } => {
                let both = tape.concat_cols(&[re, im])?;
                let y = tape.matmul(both, params[0])?;
                let y = tape.add(y, params[1])?;
                (tape.slice_cols(y, 0, t)?, tape.slice_cols(y, t, t)?)
            }
        };
        let mirror_re = tape.gather_cols(raw_re, conj.clone())?;
        let mirror_im = tape.gather_cols(raw_im, conj.clone())?;
        let sum_re = tape.add(raw_re, mirror_re)?;
        let diff_im = tape.sub(raw_im, mirror_im)?;
        Ok((tape.affine(sum_re, 0.5, 0.0), tape.affine(diff_im, 0.5, 0.0)))
    }
}

/// `x^{f,r} = Hermitian(Complex(Dense_r(Re X), Dense_i(Im X)))`.
pub fn generate_perturbation(gen: &PerturbationGenerator, spec: &Spectrum) -> Result<Spectrum> {
    if spec.bins != gen.bins() {
        return Err(Error::contract(format!(
            "generator built for {} bins, spectrum has {}",
            gen.bins(),
            spec.bins
        )));
    }
    let mut tape = Tape::new();
    let params = gen.bind(&mut tape, false);
    let re = tape.constant(Tensor::matrix(spec.channels, spec.bins, spec.re.clone())?);
    let im = tape.constant(Tensor::matrix(spec.channels, spec.bins, spec.im.clone())?);
    let (gr, gi) = gen.record(&mut tape, &params, re, im, &conjugate_index(spec.bins))?;
    Spectrum::new(
        spec.channels,
        spec.bins,
        tape.value(gr).data().to_vec(),
        tape.value(gi).data().to_vec(),
    )
}

/// `X·M + (1 − M)·x^{f,r}` with `M` expanded to bins.
pub fn apply_mask(
    spec: &Spectrum,
    mask: &Mask,
    partition: &BandPartition,
    gen: &PerturbationGenerator,
) -> Result<Spectrum> {
    let perturbation = generate_perturbation(gen, spec)?;
    blend(spec, &mask.values(), mask.channels, partition, &perturbation)
}

/// `X·M + (1 − M)·R` for explicit mask values.
pub fn blend(
    spec: &Spectrum,
    mask_values: &[f64],
    channels: usize,
    partition: &BandPartition,
    replacement: &Spectrum,
) -> Result<Spectrum> {
    if spec.channels != channels
        || replacement.channels != channels
        || replacement.bins != spec.bins
        || partition.num_bins() != spec.bins
    {
        return Err(Error::contract("mask, spectrum and replacement shapes disagree"));
    }
    let m = crate::spectral::expand_mask(mask_values, channels, partition)?;
    let mix = |x: &[f64], r: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(r)
            .zip(&m)
            .map(|((&x, &r), &m)| x * m + (1.0 - m) * r)
            .collect()
    };
    Spectrum::new(
        spec.channels,
        spec.bins,
        mix(&spec.re, &replacement.re),
        mix(&spec.im, &replacement.im),
    )
}

/// Summary of a target cluster's spectra sufficient for the alignment loss:
/// `mean_i |g − t_i|² = |g − t̄|² + (mean_i |t_i|² − |t̄|²)` per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentTarget {
    pub subject_id: usize,
    pub mean_re: Vec<f64>,
    pub mean_im: Vec<f64>,
    /// `(1/(Ch·T)) Σ_{c,k} (mean_i |t_i|² − |t̄|²)`.
    pub spread: f64,
}

impl AlignmentTarget {
    pub fn from_spectra(subject_id: usize, targets: &[Spectrum]) -> Result<Self> {
        let first = targets
            .first()
            .ok_or_else(|| Error::contract("alignment needs at least one target spectrum"))?;
        let n = first.re.len();
        let mut mean_re = vec![0.0; n];
        let mut mean_im = vec![0.0; n];
        let mut mean_sq = vec![0.0; n];
        for s in targets {
            if s.channels != first.channels || s.bins != first.bins {
                return Err(Error::dim("target spectra differ in shape"));
            }
            for j in 0..n {
                mean_re[j] += s.re[j];
                mean_im[j] += s.im[j];
                mean_sq[j] += s.re[j] * s.re[j] + s.im[j] * s.im[j];
            }
        }
        let k = targets.len() as f64;
        let mut spread = 0.0;
        for j in 0..n {
            mean_re[j] /= k;
            mean_im[j] /= k;
            spread += mean_sq[j] / k - (mean_re[j] * mean_re[j] + mean_im[j] * mean_im[j]);
        }
        Ok(AlignmentTarget {
            subject_id,
            mean_re,
            mean_im,
            spread: (spread / n as f64).max(0.0),
        })
    }

    pub fn for_epoch(epoch: &Epoch, clusters: &ClusterSet) -> Result<Self> {
        let subject = select_target_cluster(&epoch.data, clusters)?;
        let cluster = clusters.get(subject).expect("selected from this set");
        Self::from_spectra(subject, &cluster.spectra)
    }

    pub fn loss(&self, gen_output: &Spectrum) -> Result<f64> {
        if gen_output.re.len() != self.mean_re.len() {
            return Err(Error::dim("generator output and targets differ in shape"));
        }
        let n = self.mean_re.len() as f64;
        let d: f64 = (0..self.mean_re.len())
            .map(|j| {
                let dr = gen_output.re[j] - self.mean_re[j];
                let di = gen_output.im[j] - self.mean_im[j];
                dr * dr + di * di
            })
            .sum();
        Ok(d / n + self.spread)
    }
}

/// `(1/N) Σ_i (1/(Ch·T)) Σ_{c,k} |g[c,k] − t_i[c,k]|²`.
pub fn target_alignment_loss(gen_output: &Spectrum, targets: &[Spectrum]) -> Result<f64> {
    AlignmentTarget::from_spectra(0, targets)?.loss(gen_output)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    pub preservation: f64,
    pub mask_l1: f64,
    pub perturbation_l1: f64,
    pub alignment: f64,
    pub total: f64,
}

/// Everything fixed for one instance's optimization.
struct Problem<'a> {
    model: &'a Model,
    partition: BandPartition,
    plan: Arc<FourierPlan>,
    conj: Arc<[usize]>,
    spec: Spectrum,
    reference: Tensor,
    target: AlignmentTarget,
    config: &'a ExplainerConfig,
}

struct Recorded {
    total: Var,
    parts: [Var; 4],
    mask: Var,
    gen: Vec<Var>,
}

impl<'a> Problem<'a> {
    fn new(
        model: &'a Model,
        epoch: &Epoch,
        target: AlignmentTarget,
        config: &'a ExplainerConfig,
    ) -> Result<Self> {
        config.validate()?;
        let plan = FourierPlan::new(epoch.samples);
        let spec = dft_forward_with(&plan, &epoch.data, epoch.channels)?;
        if target.mean_re.len() != spec.re.len() {
            return Err(Error::dim("target cluster spectra do not match the epoch"));
        }
        let partition = make_partition(epoch.samples, config.num_bands)?;
        let reference = Tensor::matrix(1, model.config.num_classes, softmax(&model.logits(&epoch.data)?))?;
        Ok(Problem {
            model,
            partition,
            plan,
            conj: conjugate_index(epoch.samples),
            spec,
            reference,
            target,
            config,
        })
    }

    fn record(&self, tape: &mut Tape, mask: &Mask, gen: &PerturbationGenerator, trainable: bool) -> Result<Recorded> {
        let (ch, t) = (self.spec.channels, self.spec.bins);
        let model_params = self.model.bind(tape, false);
        let logits_var = {
            let t = Tensor::matrix(ch, self.config.num_bands, mask.logits.clone())?;
            if trainable {
                tape.param(t)
            } else {
                tape.constant(t)
            }
        };
        let gen_params = gen.bind(tape, trainable);
        let xr = tape.constant(Tensor::matrix(ch, t, self.spec.re.clone())?);
        let xi = tape.constant(Tensor::matrix(ch, t, self.spec.im.clone())?);

        let (gr, gi) = gen.record(tape, &gen_params, xr, xi, &self.conj)?;
        let m_band = tape.sigmoid(logits_var);
        let m = tape.gather_cols(m_band, self.partition.band_of_bin().clone())?;
        let keep = tape.affine(m, -1.0, 1.0);
        let mix = |tape: &mut Tape, x: Var, g: Var| -> Result<Var> {
            let a = tape.mul(x, m)?;
            let b = tape.mul(keep, g)?;
            tape.add(a, b)
        };
        let hr = mix(tape, xr, gr)?;
        let hi = mix(tape, xi, gi)?;
        let signal = tape.inverse_dft(hr, hi, self.plan.clone())?;
        let logits = self.model.forward(tape, &model_params, signal, 1)?;
        let preservation = tape.cross_entropy(logits, &self.reference)?;

        let mask_l1 = tape.l1_mean(m_band);
        let mag = tape.complex_abs(gr, gi)?;
        let perturbation_l1 = tape.mean(mag);
        let tr = tape.constant(Tensor::matrix(ch, t, self.target.mean_re.clone())?);
        let ti = tape.constant(Tensor::matrix(ch, t, self.target.mean_im.clone())?);
        let dr = tape.sub(gr, tr)?;
        let di = tape.sub(gi, ti)?;
        let dr2 = tape.mul(dr, dr)?;
        let di2 = tape.mul(di, di)?;
        let d2 = tape.add(dr2, di2)?;
        let d2 = tape.mean(d2);
        let alignment = tape.affine(d2, 1.0, self.target.spread);

        let weighted = tape.affine(alignment, self.config.lambda, 0.0);
        let mut total = tape.add(preservation, weighted)?;
        if self.config.regularizers_enabled {
            total = tape.add(total, mask_l1)?;
            total = tape.add(total, perturbation_l1)?;
        }
        Ok(Recorded {
            total,
            parts: [preservation, mask_l1, perturbation_l1, alignment],
            mask: logits_var,
            gen: gen_params,
        })
    }

    fn parts(&self, tape: &Tape, r: &Recorded) -> ObjectiveParts {
        let v = |x: Var| tape.value(x).data()[0];
        ObjectiveParts {
            preservation: v(r.parts[0]),
            mask_l1: v(r.parts[1]),
            perturbation_l1: v(r.parts[2]),
            alignment: v(r.parts[3]),
            total: v(r.total),
        }
    }
}

/// Evaluates the training objective and its components for given state.
pub fn total_objective(
    model: &Model,
    epoch: &Epoch,
    mask: &Mask,
    gen: &PerturbationGenerator,
    clusters: &ClusterSet,
    config: &ExplainerConfig,
) -> Result<ObjectiveParts> {
    let target = AlignmentTarget::for_epoch(epoch, clusters)?;
    objective_with_target(model, epoch, mask, gen, target, config)
}

pub fn objective_with_target(
    model: &Model,
    epoch: &Epoch,
    mask: &Mask,
    gen: &PerturbationGenerator,
    target: AlignmentTarget,
    config: &ExplainerConfig,
) -> Result<ObjectiveParts> {
    let problem = Problem::new(model, epoch, target, config)?;
    check_state(&problem, mask, gen)?;
    let mut tape = Tape::new();
    let rec = problem.record(&mut tape, mask, gen, false)?;
    Ok(problem.parts(&tape, &rec))
}

/// Gradient of the total objective with respect to the mask logits and to
/// each generator parameter block, in `PerturbationGenerator::params` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub parts: ObjectiveParts,
    pub mask: Vec<f64>,
    pub generator: Vec<Vec<f64>>,
}

pub fn objective_gradient(
    model: &Model,
    epoch: &Epoch,
    mask: &Mask,
    gen: &PerturbationGenerator,
    target: AlignmentTarget,
    config: &ExplainerConfig,
) -> Result<ObjectiveGradient> {
    let problem = Problem::new(model, epoch, target, config)?;
    check_state(&problem, mask, gen)?;
    let mut tape = Tape::new();
    let rec = problem.record(&mut tape, mask, gen, true)?;
    let parts = problem.parts(&tape, &rec);
    let mut grads = tape.backward(rec.total)?;
    Ok(ObjectiveGradient {
        parts,
        mask: grads.take(rec.mask).expect("mask is trainable"),
        generator: rec.gen.iter().map(|&v| grads.take(v).expect("generator is trainable")).collect(),
    })
}

fn check_state(problem: &Problem, mask: &Mask, gen: &PerturbationGenerator) -> Result<()> {
    if mask.channels != problem.spec.channels || mask.bands != problem.config.num_bands {
        return Err(Error::contract(format!(
            "mask is {}x{}, expected {}x{}",
            mask.channels, mask.bands, problem.spec.channels, problem.config.num_bands
        )));
    }
    if gen.bins() != problem.spec.bins || gen.is_one_branch() != problem.config.one_branch_mode {
        return Err(Error::contract("generator does not match the epoch or configuration"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub parts: ObjectiveParts,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Instance,
    Group,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaliencyMap {
    pub level: Level,
    pub channels: usize,
    pub bands: usize,
    /// Row-major `channels × bands`.
    pub values: Vec<f64>,
    pub epoch_ids: Vec<usize>,
    pub seed: u64,
    pub config_hash: String,
}

impl SaliencyMap {
    pub fn get(&self, channel: usize, band: usize) -> f64 {
        self.values[channel * self.bands + band]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    pub map: SaliencyMap,
    pub mask: Mask,
    pub generator: PerturbationGenerator,
    pub target_subject: usize,
    pub trace: Vec<TraceEntry>,
}

/// Seed for the generator of one instance.
pub fn instance_seed(seed: u64, epoch_id: usize) -> u64 {
    seed ^ (epoch_id as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Jointly optimizes mask logits and generator parameters for one epoch.
pub fn optimize_mask(
    model: &Model,
    epoch: &Epoch,
    clusters: &ClusterSet,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<Explanation> {
    let target = AlignmentTarget::for_epoch(epoch, clusters)?;
    optimize_with_target(model, epoch, target, config, seed)
}

pub fn optimize_with_target(
    model: &Model,
    epoch: &Epoch,
    target: AlignmentTarget,
    config: &ExplainerConfig,
    seed: u64,
) -> Result<Explanation> {
    let target_subject = target.subject_id;
    let problem = Problem::new(model, epoch, target, config)?;
    let mut mask = Mask::neutral(epoch.channels, config.num_bands);
    let mut gen = PerturbationGenerator::seeded(epoch.samples, config.one_branch_mode, instance_seed(seed, epoch.id));
    let mut lens = vec![mask.logits.len()];
    lens.extend(gen.params().iter().map(|p| p.len()));
    let mut adam = Adam::new(config.learning_rate, &lens)?;

    let mut trace = Vec::new();
    let mut best = f64::INFINITY;
    let mut stalled = 0;
    for step in 0..config.max_epochs {
        let mut tape = Tape::new();
        let rec = problem.record(&mut tape, &mask, &gen, true)?;
        let parts = problem.parts(&tape, &rec);
        let all = [parts.preservation, parts.mask_l1, parts.perturbation_l1, parts.alignment, parts.total];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "epoch {step} of the mask search for sample {}: preservation {:.6e}, mask_l1 {:.6e}, perturbation_l1 {:.6e}, alignment {:.6e}, total {:.6e}",
                epoch.id, parts.preservation, parts.mask_l1, parts.perturbation_l1, parts.alignment, parts.total
            )));
        }
        if parts.total < best - config.min_relative_improvement * best.abs() {
            stalled = 0;
        } else {
            stalled += 1;
        }
        best = best.min(parts.total);
        trace.push(TraceEntry {
            epoch: step,
            parts,
            best_so_far: best,
        });
        if stalled >= config.patience {
            break;
        }

        let mut grads = tape.backward(rec.total)?;
        let mut g: Vec<Vec<f64>> = vec![grads.take(rec.mask).expect("mask is trainable")];
        g.extend(rec.gen.iter().map(|&v| grads.take(v).expect("generator is trainable")));
        let grad_refs: Vec<&[f64]> = g.iter().map(Vec::as_slice).collect();
        let mut params: Vec<&mut [f64]> = vec![mask.logits.as_mut_slice()];
        params.extend(gen.params_mut());
        adam.step(&mut params, &grad_refs)?;
    }

    let map = SaliencyMap {
        level: Level::Instance,
        channels: mask.channels,
        bands: mask.bands,
        values: mask.values(),
        epoch_ids: vec![epoch.id],
        seed,
        config_hash: config.hash(),
    };
    Ok(Explanation {
        map,
        mask,
        generator: gen,
        target_subject,
        trace,
    })
}

/// Perturbed time-domain signal `IDFT(X·M + (1 − M)·NN(X))`.
pub fn perturbed_signal(epoch: &Epoch, mask: &Mask, gen: &PerturbationGenerator, partition: &BandPartition) -> Result<Vec<f64>> {
    let plan = FourierPlan::new(epoch.samples);
    let spec = dft_forward_with(&plan, &epoch.data, epoch.channels)?;
    let hat = apply_mask(&spec, mask, partition, gen)?;
    dft_inverse_with(&plan, &enforce_hermitian(&hat))
}

/// Elementwise mean of instance maps.
pub fn group_saliency(maps: &[SaliencyMap]) -> Result<SaliencyMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::contract("group saliency needs at least one map"))?;
    let mut values = vec![0.0; first.values.len()];
    let mut ids = Vec::new();
    for m in maps {
        if m.channels != first.channels || m.bands != first.bands || m.values.len() != values.len() {
            return Err(Error::contract("saliency maps differ in shape"));
        }
        values.iter_mut().zip(&m.values).for_each(|(a, v)| *a += v);
        ids.extend_from_slice(&m.epoch_ids);
    }
    let n = maps.len() as f64;
    values.iter_mut().for_each(|a| *a /= n);
    Ok(SaliencyMap {
        level: Level::Group,
        channels: first.channels,
        bands: first.bands,
        values,
        epoch_ids: ids,
        seed: first.seed,
        config_hash: first.config_hash.clone(),
    })
}

pub fn save_maps(path: &Path, maps: &[SaliencyMap]) -> Result<()> {
    textio::write_lines(path, maps)
}

pub fn load_maps(path: &Path) -> Result<Vec<SaliencyMap>> {
    let maps: Vec<SaliencyMap> = textio::read_lines(path)?;
    for (i, m) in maps.iter().enumerate() {
        if m.values.len() != m.channels * m.bands {
            return Err(Error::load(
                path,
                format!("[{i}].values"),
                format!("{} values for a {}x{} map", m.values.len(), m.channels, m.bands),
            ));
        }
        if m.values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::load(path, format!("[{i}].values"), "values outside [0, 1]"));
        }
    }
    Ok(maps)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub epoch_id: usize,
    pub seed: u64,
    pub config_hash: String,
    pub trace: Vec<TraceEntry>,
}

pub fn save_trace(path: &Path, explanations: &[Explanation]) -> Result<()> {
    let records: Vec<TraceRecord> = explanations
        .iter()
        .map(|e| TraceRecord {
            epoch_id: e.map.epoch_ids[0],
            seed: e.map.seed,
            config_hash: e.map.config_hash.clone(),
            trace: e.trace.clone(),
        })
        .collect();
    textio::write_lines(path, &records)
}

pub fn load_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    textio::read_lines(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_gives_zero_spectrum() {
        let spec = Spectrum::new(2, 4, vec![1.0, 2.0, 3.0, 2.0, 0.5, 0.0, 1.0, 0.0], vec![0.0; 8]).unwrap();
        for one in [false, true] {
            let out = generate_perturbation(&PerturbationGenerator::zeros(4, one), &spec).unwrap();
            assert!(out.re.iter().chain(&out.im).all(|&v| v == 0.0));
        }
    }

    #[test]
    fn identity_real_branch() {
        let t = 5;
        let mut g = PerturbationGenerator::zeros(t, false);
        if let PerturbationGenerator::TwoBranch { real_weight, .. } = &mut g {
            for k in 0..t {
                real_weight[k * t + k] = 1.0;
            }
        }
        let re = vec![1.0, 2.0, -1.0, 4.0, 0.5];
        let spec = Spectrum::new(1, t, re.clone(), vec![0.0; t]).unwrap();
        let out = generate_perturbation(&g, &spec).unwrap();
        let expected = enforce_hermitian(&spec);
        assert_eq!(out.re, expected.re);
        assert!(out.im.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn blend_arithmetic() {
        let p = make_partition(2, 1).unwrap();
        let x = Spectrum::new(1, 2, vec![2.0, 0.0], vec![0.0, 0.0]).unwrap();
        let r = Spectrum::zeros(1, 2);
        let out = blend(&x, &[0.5], 1, &p, &r).unwrap();
        assert_eq!(out.re[0], 1.0);
        assert_eq!(out.im[0], 0.0);
    }

    #[test]
    fn alignment_unit_distance() {
        let t = Spectrum::new(1, 3, vec![1.0; 3], vec![0.0; 3]).unwrap();
        assert_eq!(target_alignment_loss(&Spectrum::zeros(1, 3), std::slice::from_ref(&t)).unwrap(), 1.0);
        assert_eq!(target_alignment_loss(&t, std::slice::from_ref(&t)).unwrap(), 0.0);
        assert!(target_alignment_loss(&t, &[]).is_err());
    }

    #[test]
    fn group_of_extremes_is_half() {
        let mk = |v: f64| SaliencyMap {
            level: Level::Instance,
            channels: 2,
            bands: 2,
            values: vec![v; 4],
            epoch_ids: vec![0],
            seed: 0,
            config_hash: String::new(),
        };
        let g = group_saliency(&[mk(0.0), mk(1.0)]).unwrap();
        assert_eq!(g.values, vec![0.5; 4]);
        assert_eq!(g.level, Level::Group);
        assert_eq!(group_saliency(&[mk(0.3)]).unwrap().values, vec![0.3; 4]);
        assert!(group_saliency(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = ExplainerConfig::default();
        assert!(c.validate().is_ok());
        c.lambda = -1.0;
        assert!(c.validate().is_err());
        let c = ExplainerConfig {
            patience: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
