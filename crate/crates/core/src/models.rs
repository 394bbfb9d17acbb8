//! End-to-end classifiers over raw `channels × samples` epochs.
//!
//! Two architectures share one parameter layout convention:
//!
//! * `MiniCnn`: per-channel temporal convolution with `filters` kernels of
//!   length `kernel` → ReLU → mean over time → channel-mixing dense →
//!   ReLU → dense to class logits.
//! * `Mlp`: flatten → dense(`hidden`) → ReLU → dense to class logits.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diff::{softmax, Adam, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::synth::Epoch;
use crate::textio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Architecture {
    MiniCnn,
    Mlp,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mini_cnn" => Ok(Architecture::MiniCnn),
            "mlp" => Ok(Architecture::Mlp),
            other => Err(Error::contract(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub channels: usize,
    pub samples: usize,
    pub num_classes: usize,
    /// Temporal kernels (mini_cnn only).
    pub filters: usize,
    /// Temporal kernel length (mini_cnn only).
    pub kernel: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl ModelConfig {
    pub fn mini_cnn(channels: usize, samples: usize, seed: u64) -> Self {
        ModelConfig {
            architecture: Architecture::MiniCnn,
            channels,
            samples,
            num_classes: 2,
            filters: 4,
            kernel: 16,
            hidden: 16,
            seed,
        }
    }

    pub fn mlp(channels: usize, samples: usize, seed: u64) -> Self {
        ModelConfig {
            architecture: Architecture::Mlp,
            channels,
            samples,
            num_classes: 2,
            filters: 0,
            kernel: 0,
            hidden: 64,
            seed,
        }
    }

    /// Shapes and fan-ins of every parameter tensor, in storage order.
    fn layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let (ch, h, k) = (self.channels, self.hidden, self.num_classes);
        match self.architecture {
            Architecture::MiniCnn => {
                let mut v = Vec::new();
                for f in 0..self.filters {
                    v.push((format!("conv{f}.kernel"), vec![self.kernel], self.kernel));
                    v.push((format!("conv{f}.bias"), vec![1], self.kernel));
                }
                let mix_in = self.filters * ch;
                v.push(("mix.weight".into(), vec![mix_in, h], mix_in));
                v.push(("mix.bias".into(), vec![h], mix_in));
                v.push(("out.weight".into(), vec![h, k], h));
                v.push(("out.bias".into(), vec![k], h));
                v
            }
            Architecture::Mlp => {
                let d = ch * self.samples;
                vec![
                    ("hidden.weight".into(), vec![d, h], d),
                    ("hidden.bias".into(), vec![h], d),
                    ("out.weight".into(), vec![h, k], h),
                    ("out.bias".into(), vec![k], h),
                ]
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layout()
            .iter()
            .map(|(_, s, _)| s.iter().product::<usize>())
            .sum()
    }

    fn validate(&self) -> Result<()> {
        let mut sizes = vec![self.channels, self.samples, self.hidden];
        if self.architecture == Architecture::MiniCnn {
            sizes.extend([self.filters, self.kernel]);
            if self.kernel > self.samples {
                return Err(Error::contract(format!(
                    "kernel {} longer than {} samples",
                    self.kernel, self.samples
                )));
            }
        }
        if sizes.contains(&0) {
            return Err(Error::contract(format!("model sizes must be positive: {self:?}")));
        }
        if self.num_classes != 2 {
            return Err(Error::contract("only binary classifiers are supported"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub train_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// A classifier `f` with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Vec<NamedTensor>,
    pub meta: TrainingMeta,
}

/// Builds an untrained model with seeded uniform `±1/√fan_in` weights.
pub fn build_model(config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = config
        .layout()
        .into_iter()
        .map(|(name, shape, fan_in)| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
            NamedTensor { name, shape, data }
        })
        .collect();
    Ok(Model {
        config: config.clone(),
        params,
        meta: TrainingMeta::default(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub label: usize,
}

/// Arg-max with ties resolved toward the lower class.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl Prediction {
    pub fn from_logits(logits: &[f64]) -> Self {
        let scores = softmax(logits);
        let label = argmax(&scores);
        Prediction { scores, label }
    }
}

const CHUNK: usize = 64;

impl Model {
    pub fn param(&self, name: &str) -> Option<&NamedTensor> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut NamedTensor> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    /// Records the parameters on `tape`, as trainable leaves or constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                let t = Tensor::new(p.shape.clone(), p.data.clone()).expect("consistent layout");
                if trainable {
                    tape.param(t)
                } else {
                    tape.constant(t)
                }
            })
            .collect()
    }

    /// Logits `[batch, classes]` for `input` of shape `[batch·channels, samples]`.
    pub fn forward(&self, tape: &mut Tape, params: &[Var], input: Var, batch: usize) -> Result<Var> {
        let cfg = &self.config;
        let shape = tape.value(input).shape().to_vec();
        if shape != [batch * cfg.channels, cfg.samples] {
            return Err(Error::contract(format!(
                "model expects [{} x {}] input rows, got {shape:?}",
                batch * cfg.channels,
                cfg.samples
            )));
        }
        match cfg.architecture {
            Architecture::MiniCnn => {
                let mut pooled = Vec::with_capacity(cfg.filters);
                for f in 0..cfg.filters {
                    let conv = tape.conv1d(input, params[2 * f])?;
                    let conv = tape.add(conv, params[2 * f + 1])?;
                    let act = tape.relu(conv);
                    let mean = tape.row_mean(act)?;
                    pooled.push(tape.reshape(mean, vec![batch, cfg.channels])?);
                }
                let features = tape.concat_cols(&pooled)?;
                let base = 2 * cfg.filters;
                let h = tape.matmul(features, params[base])?;
                let h = tape.add(h, params[base + 1])?;
                let h = tape.relu(h);
                let out = tape.matmul(h, params[base + 2])?;
                tape.add(out, params[base + 3])
            }
            Architecture::Mlp => {
                let flat = tape.reshape(input, vec![batch, cfg.channels * cfg.samples])?;
                let h = tape.matmul(flat, params[0])?;
                let h = tape.add(h, params[1])?;
                let h = tape.relu(h);
                let out = tape.matmul(h, params[2])?;
                tape.add(out, params[3])
            }
        }
    }

    fn check_epoch(&self, e: &Epoch) -> Result<()> {
        if e.channels != self.config.channels || e.samples != self.config.samples {
            return Err(Error::contract(format!(
                "epoch {} is {}x{} but the model expects {}x{}",
                e.id, e.channels, e.samples, self.config.channels, self.config.samples
            )));
        }
        Ok(())
    }

    /// Logits for a raw `channels × samples` signal.
    pub fn logits(&self, signal: &[f64]) -> Result<Vec<f64>> {
        Ok(self.logits_batch(&[signal])?.pop().unwrap())
    }

    pub fn logits_batch(&self, signals: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let cfg = &self.config;
        let per = cfg.channels * cfg.samples;
        let mut out = Vec::with_capacity(signals.len());
        for chunk in signals.chunks(CHUNK) {
            let mut data = Vec::with_capacity(chunk.len() * per);
            for s in chunk {
                if s.len() != per {
                    return Err(Error::contract(format!(
                        "signal of {} values, model expects {per}",
                        s.len()
                    )));
                }
                data.extend_from_slice(s);
            }
            let mut tape = Tape::new();
            let params = self.bind(&mut tape, false);
            let x = tape.constant(Tensor::matrix(chunk.len() * cfg.channels, cfg.samples, data)?);
            let logits = self.forward(&mut tape, &params, x, chunk.len())?;
            out.extend(
                tape.value(logits)
                    .data()
                    .chunks(cfg.num_classes)
                    .map(<[f64]>::to_vec),
            );
        }
        Ok(out)
    }

    pub fn predict_signals(&self, signals: &[&[f64]]) -> Result<Vec<Prediction>> {
        Ok(self
            .logits_batch(signals)?
            .iter()
            .map(|z| Prediction::from_logits(z))
            .collect())
    }
}

/// Softmax scores and arg-max labels for each epoch.
pub fn predict(model: &Model, epochs: &[&Epoch]) -> Result<Vec<Prediction>> {
    for e in epochs {
        model.check_epoch(e)?;
    }
    let signals: Vec<&[f64]> = epochs.iter().map(|e| e.data.as_slice()).collect();
    model.predict_signals(&signals)
}

pub fn accuracy(model: &Model, epochs: &[&Epoch]) -> Result<f64> {
    if epochs.is_empty() {
        return Err(Error::contract("accuracy over no epochs"));
    }
    let preds = predict(model, epochs)?;
    let correct = preds
        .iter()
        .zip(epochs)
        .filter(|(p, e)| p.label == e.label)
        .count();
    Ok(correct as f64 / epochs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            learning_rate: 1e-3,
        }
    }
}

/// Mean hard-label cross-entropy over `epochs` and its parameter gradient.
///
/// Chunks are evaluated on independent tapes (in parallel) and reduced in a
/// fixed order, so the result does not depend on the thread count.
fn loss_and_grad(model: &Model, epochs: &[&Epoch]) -> Result<(f64, Vec<Vec<f64>>)> {
    let cfg = &model.config;
    let n = epochs.len() as f64;
    let per_chunk: Vec<Result<(f64, Vec<Vec<f64>>)>> = epochs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut tape = Tape::new();
            let params = model.bind(&mut tape, true);
            let mut data = Vec::with_capacity(chunk.len() * cfg.channels * cfg.samples);
            let mut target = vec![0.0; chunk.len() * cfg.num_classes];
            for (i, e) in chunk.iter().enumerate() {
                data.extend_from_slice(&e.data);
                target[i * cfg.num_classes + e.label] = 1.0;
            }
            let x = tape.constant(Tensor::matrix(chunk.len() * cfg.channels, cfg.samples, data)?);
            let logits = model.forward(&mut tape, &params, x, chunk.len())?;
            let ce = tape.cross_entropy(logits, &Tensor::matrix(chunk.len(), cfg.num_classes, target)?)?;
            let weight = chunk.len() as f64 / n;
            let scaled = tape.affine(ce, weight, 0.0);
            let mut grads = tape.backward(scaled)?;
            let g = params.iter().map(|&p| grads.take(p).unwrap()).collect();
            Ok((tape.value(scaled).item()?, g))
        })
        .collect();
    let mut total = 0.0;
    let mut acc: Vec<Vec<f64>> = model.params.iter().map(|p| vec![0.0; p.data.len()]).collect();
    for r in per_chunk {
        let (l, g) = r?;
        total += l;
        for (a, gi) in acc.iter_mut().zip(g) {
            a.iter_mut().zip(gi).for_each(|(x, y)| *x += y);
        }
    }
    Ok((total, acc))
}

/// Full-batch Adam on hard-label cross-entropy.
pub fn train_model(
    model: &mut Model,
    train: &[&Epoch],
    test: Option<&[&Epoch]>,
    config: &TrainConfig,
) -> Result<()> {
    if train.is_empty() {
        return Err(Error::contract("empty training set"));
    }
    for e in train {
        model.check_epoch(e)?;
        if e.label >= model.config.num_classes {
            return Err(Error::contract(format!("label {} out of range", e.label)));
        }
    }
    let first = train[0].label;
    if train.iter().all(|e| e.label == first) {
        return Err(Error::contract("training set contains a single class"));
    }
    let lens: Vec<usize> = model.params.iter().map(|p| p.data.len()).collect();
    let mut adam = Adam::new(config.learning_rate, &lens)?;
    let mut last_loss = None;
    for epoch in 0..config.epochs {
        let (loss, grads) = loss_and_grad(model, train)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss {loss} at epoch {epoch}")));
        }
        let mut params: Vec<&mut [f64]> = model.params.iter_mut().map(|p| p.data.as_mut_slice()).collect();
        let grads: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        adam.step(&mut params, &grads)?;
        last_loss = Some(loss);
    }
    model.meta = TrainingMeta {
        epochs_run: model.meta.epochs_run + config.epochs,
        train_accuracy: Some(accuracy(model, train)?),
        test_accuracy: match test {
            Some(t) if !t.is_empty() => Some(accuracy(model, t)?),
            _ => None,
        },
        final_loss: last_loss.or(model.meta.final_loss),
    };
    Ok(())
}

/// Gradient of a scalar built from the model's logits with respect to the
/// raw input values of `epoch`.
pub fn input_gradient<F>(model: &Model, epoch: &Epoch, objective: F) -> Result<Vec<f64>>
where
    F: FnOnce(&mut Tape, Var) -> Result<Var>,
{
    model.check_epoch(epoch)?;
    let mut tape = Tape::new();
    let params = model.bind(&mut tape, false);
    let x = tape.param(Tensor::matrix(
        model.config.channels,
        model.config.samples,
        epoch.data.clone(),
    )?);
    let logits = model.forward(&mut tape, &params, x, 1)?;
    let obj = objective(&mut tape, logits)?;
    let grads = tape.backward(obj)?;
    Ok(grads.get(x).expect("input is a trainable leaf").to_vec())
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    config: ModelConfig,
    meta: TrainingMeta,
    params: Vec<NamedTensor>,
}

pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    textio::write_record(
        path,
        &Checkpoint {
            config: model.config.clone(),
            meta: model.meta.clone(),
            params: model.params.clone(),
        },
    )
}

pub fn load_model(path: &Path) -> Result<Model> {
    let ck: Checkpoint = textio::read_record(path)?;
    ck.config
        .validate()
        .map_err(|e| Error::load(path, "config", e.to_string()))?;
    let layout = ck.config.layout();
    if layout.len() != ck.params.len() {
        return Err(Error::load(
            path,
            "params",
            format!("expected {} tensors, found {}", layout.len(), ck.params.len()),
        ));
    }
    for (i, ((name, shape, _), p)) in layout.iter().zip(&ck.params).enumerate() {
        let n: usize = shape.iter().product();
        if &p.name != name || &p.shape != shape || p.data.len() != n {
            return Err(Error::load(
                path,
                format!("params[{i}]"),
                format!("expected {name} {shape:?}, found {} {:?} with {} values", p.name, p.shape, p.data.len()),
            ));
        }
    }
    Ok(Model {
        config: ck.config,
        params: ck.params,
        meta: ck.meta,
    })
}
