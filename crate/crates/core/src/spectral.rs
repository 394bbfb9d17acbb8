//! Discrete Fourier transforms over multichannel signals, frequency-band
//! partitions, and Hermitian projection.
//!
//! Spectra are kept at full length `T` (negative frequencies included).
//! Bands are defined on the non-negative bins `0..=T/2`; each negative bin
//! inherits the band of its conjugate partner, so any band-constant mask is
//! automatically Hermitian-compatible.

use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Cached forward and inverse transforms for one signal length.
pub struct FourierPlan {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FourierPlan").field("len", &self.len).finish()
    }
}

impl FourierPlan {
    pub fn new(len: usize) -> Arc<Self> {
        let mut planner = FftPlanner::new();
        Arc::new(FourierPlan {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalized forward transform of each length-`T` row.
    /// `imag` defaults to zero (real input).
    pub fn forward(&self, real: &[f64], imag: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        let mut out_re = Vec::with_capacity(real.len());
        let mut out_im = Vec::with_capacity(real.len());
        for (r, row) in real.chunks(self.len).enumerate() {
            for (t, b) in buf.iter_mut().enumerate() {
                let im = imag.map_or(0.0, |im| im[r * self.len + t]);
                *b = Complex64::new(row[t], im);
            }
            self.forward.process(&mut buf);
            out_re.extend(buf.iter().map(|c| c.re));
            out_im.extend(buf.iter().map(|c| c.im));
        }
        (out_re, out_im)
    }

    /// `(1/T)·Re(Σ_k X_k e^{+2πikt/T})` for each row.
    pub fn inverse_real(&self, re: &[f64], im: &[f64]) -> Vec<f64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.len];
        let scale = 1.0 / self.len as f64;
        let mut out = Vec::with_capacity(re.len());
        for (rr, ri) in re.chunks(self.len).zip(im.chunks(self.len)) {
            for (b, (a, c)) in buf.iter_mut().zip(rr.iter().zip(ri)) {
                *b = Complex64::new(*a, *c);
            }
            self.inverse.process(&mut buf);
            out.extend(buf.iter().map(|c| c.re * scale));
        }
        out
    }
}

/// Complex spectrum of a multichannel signal, stored as separate real and
/// imaginary `channels × bins` planes.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub channels: usize,
    pub bins: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl Spectrum {
    pub fn new(channels: usize, bins: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != channels * bins || im.len() != channels * bins {
            return Err(Error::dim(format!(
                "spectrum {channels}x{bins} with planes of {} and {}",
                re.len(),
                im.len()
            )));
        }
        Ok(Spectrum {
            channels,
            bins,
            re,
            im,
        })
    }

    pub fn zeros(channels: usize, bins: usize) -> Self {
        Spectrum {
            channels,
            bins,
            re: vec![0.0; channels * bins],
            im: vec![0.0; channels * bins],
        }
    }

    /// Largest deviation from `X[c,k] = conj(X[c,(T-k) mod T])`.
    pub fn hermitian_error(&self) -> f64 {
        let t = self.bins;
        let mut worst: f64 = 0.0;
        for c in 0..self.channels {
            for k in 0..t {
                let (a, b) = (c * t + k, c * t + (t - k) % t);
                worst = worst
                    .max((self.re[a] - self.re[b]).abs())
                    .max((self.im[a] + self.im[b]).abs());
            }
        }
        worst
    }
}

/// Forward DFT of a `channels × T` row-major signal, no normalization.
pub fn dft_forward(signal: &[f64], channels: usize) -> Result<Spectrum> {
    let t = row_len(signal.len(), channels)?;
    if t < 2 {
        return Err(Error::contract(format!("DFT needs at least 2 samples, got {t}")));
    }
    let plan = FourierPlan::new(t);
    dft_forward_with(&plan, signal, channels)
}

pub fn dft_forward_with(plan: &FourierPlan, signal: &[f64], channels: usize) -> Result<Spectrum> {
    let t = row_len(signal.len(), channels)?;
    if t != plan.len() {
        return Err(Error::dim(format!("signal of {t} samples with a plan for {}", plan.len())));
    }
    let (re, im) = plan.forward(signal, None);
    Spectrum::new(channels, t, re, im)
}

/// Inverse DFT keeping the real part of the result.
pub fn dft_inverse(spec: &Spectrum) -> Result<Vec<f64>> {
    let plan = FourierPlan::new(spec.bins);
    dft_inverse_with(&plan, spec)
}

pub fn dft_inverse_with(plan: &FourierPlan, spec: &Spectrum) -> Result<Vec<f64>> {
    if spec.bins != plan.len() {
        return Err(Error::dim(format!(
            "spectrum of {} bins with a plan for {}",
            spec.bins,
            plan.len()
        )));
    }
    if !spec.re.iter().chain(&spec.im).all(|v| v.is_finite()) {
        return Err(Error::NonFinite("inverse DFT of a non-finite spectrum".into()));
    }
    Ok(plan.inverse_real(&spec.re, &spec.im))
}

fn row_len(len: usize, channels: usize) -> Result<usize> {
    if channels == 0 || !len.is_multiple_of(channels) {
        return Err(Error::dim(format!(
            "{len} samples do not split into {channels} channels"
        )));
    }
    Ok(len / channels)
}

/// `Y[k] = (X[k] + conj(X[(T-k) mod T])) / 2` per channel.
///
/// Idempotent; self-conjugate bins come out purely real.
pub fn enforce_hermitian(spec: &Spectrum) -> Spectrum {
    let t = spec.bins;
    let mut out = Spectrum::zeros(spec.channels, t);
    for c in 0..spec.channels {
        for k in 0..t {
            let (a, b) = (c * t + k, c * t + (t - k) % t);
            out.re[a] = 0.5 * (spec.re[a] + spec.re[b]);
            out.im[a] = 0.5 * (spec.im[a] - spec.im[b]);
        }
    }
    out
}

/// Index map `k -> (T - k) mod T`.
pub fn conjugate_index(bins: usize) -> Arc<[usize]> {
    (0..bins).map(|k| (bins - k) % bins).collect()
}

/// Assignment of every DFT bin to a frequency band.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BandPartition {
    num_bins: usize,
    num_bands: usize,
    band_of_bin: Arc<[usize]>,
}

impl BandPartition {
    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn band_of_bin(&self) -> &Arc<[usize]> {
        &self.band_of_bin
    }

    /// Non-negative-frequency bins `0..=T/2` that belong to `band`.
    pub fn positive_bins(&self, band: usize) -> impl Iterator<Item = usize> + '_ {
        (0..=self.num_bins / 2).filter(move |&k| self.band_of_bin[k] == band)
    }

    /// Every bin (both conjugate partners) that belongs to `band`.
    pub fn all_bins(&self, band: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_bins).filter(move |&k| self.band_of_bin[k] == band)
    }

    /// Frequency range in Hz covered by `band`'s non-negative bins.
    pub fn band_hz(&self, band: usize, sample_rate: f64) -> (f64, f64) {
        let res = sample_rate / self.num_bins as f64;
        let mut bins = self.positive_bins(band);
        let lo = bins.next().unwrap_or(0);
        let hi = bins.last().unwrap_or(lo);
        (lo as f64 * res, hi as f64 * res)
    }
}

/// Splits bins `0..=T/2` into `num_bands` contiguous groups whose sizes
/// differ by at most one, lower bands taking the remainder; negative bins
/// mirror their conjugate partner.
pub fn make_partition(num_bins: usize, num_bands: usize) -> Result<BandPartition> {
    let half = num_bins / 2 + 1;
    if num_bins == 0 || num_bands == 0 || num_bands > half {
        return Err(Error::contract(format!(
            "{num_bands} bands over {num_bins} bins (allowed 1..={half})"
        )));
    }
    let base = half / num_bands;
    let extra = half % num_bands;
    let mut band_of_bin = vec![0usize; num_bins];
    let mut k = 0;
    for band in 0..num_bands {
        let size = base + usize::from(band < extra);
        for _ in 0..size {
            band_of_bin[k] = band;
            k += 1;
        }
    }
    for k in half..num_bins {
        band_of_bin[k] = band_of_bin[num_bins - k];
    }
    Ok(BandPartition {
        num_bins,
        num_bands,
        band_of_bin: band_of_bin.into(),
    })
}

/// Repeats a `channels × B` band mask out to `channels × T` bins.
pub fn expand_mask(mask: &[f64], channels: usize, partition: &BandPartition) -> Result<Vec<f64>> {
    let b = partition.num_bands;
    if mask.len() != channels * b {
        return Err(Error::contract(format!(
            "mask of {} values does not match {channels} channels x {b} bands",
            mask.len()
        )));
    }
    let mut out = Vec::with_capacity(channels * partition.num_bins);
    for row in mask.chunks(b) {
        out.extend(partition.band_of_bin.iter().map(|&band| row[band]));
    }
    Ok(out)
}

/// Mean of `|X[c,k]|²` over each band's non-negative bins: `channels × B`.
pub fn band_powers(spec: &Spectrum, partition: &BandPartition) -> Result<Vec<f64>> {
    if spec.bins != partition.num_bins {
        return Err(Error::contract(format!(
            "spectrum of {} bins with a partition of {}",
            spec.bins, partition.num_bins
        )));
    }
    let (t, b) = (spec.bins, partition.num_bands);
    let mut sums = vec![0.0; spec.channels * b];
    let mut counts = vec![0usize; b];
    for k in 0..=t / 2 {
        counts[partition.band_of_bin[k]] += 1;
    }
    for c in 0..spec.channels {
        for k in 0..=t / 2 {
            let i = c * t + k;
            sums[c * b + partition.band_of_bin[k]] += spec.re[i] * spec.re[i] + spec.im[i] * spec.im[i];
        }
    }
    for (i, s) in sums.iter_mut().enumerate() {
        *s /= counts[i % b] as f64;
    }
    Ok(sums)
}
