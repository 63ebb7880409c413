//! Monte-Carlo simulation of dithered uniform quantization followed by the
//! LMMSE estimator, used to check the additive-noise covariance model.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ProblemInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DitherMode {
    /// Dither added before quantization and left in the output.
    NonSubtractive,
    /// Dither added before quantization and removed afterwards.
    Subtractive,
}

impl DitherMode {
    pub fn as_str(self) -> &'static str {
        match self {
            DitherMode::NonSubtractive => "non-subtractive",
            DitherMode::Subtractive => "subtractive",
        }
    }
}

/// Mid-rise uniform quantizer with dither `τ`:
/// `Δ·(⌊(v + τ)/Δ⌋ + ½)`, minus `τ` in subtractive mode.
pub fn quantize(value: f64, bin_width: f64, dither: f64, mode: DitherMode) -> f64 {
    let q = bin_width * (((value + dither) / bin_width).floor() + 0.5);
    match mode {
        DitherMode::NonSubtractive => q,
        DitherMode::Subtractive => q - dither,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuantizerBank {
    /// `Δᵢ = Rᵢ / 2^{bᵢ}`.
    pub bin_widths: Vec<f64>,
    pub dither_mode: DitherMode,
    pub rng_seed: u64,
}

impl QuantizerBank {
    pub fn new(bin_widths: Vec<f64>, dither_mode: DitherMode, rng_seed: u64) -> Result<Self> {
        if let Some((i, w)) = bin_widths.iter().enumerate().find(|(_, w)| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::Config(format!("bin width {i} must be positive, got {w}")));
        }
        Ok(Self {
            bin_widths,
            dither_mode,
            rng_seed,
        })
    }

    /// Bin widths implied by the instance's dynamic ranges and an allocation.
    pub fn for_allocation(
        instance: &ProblemInstance,
        bits: &[f64],
        dither_mode: DitherMode,
        rng_seed: u64,
    ) -> Result<Self> {
        if bits.len() != instance.sensors() {
            return Err(Error::DimensionMismatch {
                what: "bit vector length",
                expected: instance.sensors(),
                found: bits.len(),
            });
        }
        let widths = instance
            .dynamic_ranges()
            .iter()
            .zip(bits)
            .map(|(r, b)| r / 2f64.powf(*b))
            .collect();
        Self::new(widths, dither_mode, rng_seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub sample_count: usize,
    pub empirical_mse: f64,
    pub analytic_mse: f64,
    pub standard_error: f64,
    /// Mean of `Q(hᵢᵀx) − hᵢᵀx` (after dither removal in subtractive mode).
    pub empirical_error_mean: Vec<f64>,
    pub error_mean_standard_error: Vec<f64>,
    /// Largest Kolmogorov–Smirnov distance between a channel's normalized
    /// error `e/Δ` and Uniform(−½, ½).
    pub max_ks_distance: f64,
}

impl MonteCarloReport {
    /// `|empirical − analytic| / standard_error`.
    pub fn mse_z_score(&self) -> f64 {
        (self.empirical_mse - self.analytic_mse).abs() / self.standard_error.max(f64::MIN_POSITIVE)
    }

    /// Largest per-channel `|mean| / standard error`.
    pub fn max_error_mean_z(&self) -> f64 {
        self.empirical_error_mean
            .iter()
            .zip(&self.error_mean_standard_error)
            .map(|(m, s)| m.abs() / s.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

struct ChunkStats {
    sq_err_sum: f64,
    sq_err_sq_sum: f64,
    err_sum: Vec<f64>,
    err_sq_sum: Vec<f64>,
    normalized: Vec<Vec<f64>>,
}

/// Runs `samples` draws of `x ~ N(0, C_x)`, quantizes every `hᵢᵀx` with
/// independent uniform dither and applies the LMMSE gain built from
/// `D = diag(Δᵢ²/12)`.
///
/// Draws are split into `partitions` chunks, each with its own ChaCha
/// stream, so the report is a deterministic function of the seed and the
/// partition count regardless of thread scheduling.
pub fn simulate_lmmse(
    instance: &ProblemInstance,
    bits: &[f64],
    samples: usize,
    bank: &QuantizerBank,
    partitions: usize,
) -> Result<MonteCarloReport> {
    if samples == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let m = instance.sensors();
    let d = instance.states();
    if bank.bin_widths.len() != m {
        return Err(Error::DimensionMismatch {
            what: "quantizer bank size",
            expected: m,
            found: bank.bin_widths.len(),
        });
    }
    let analytic_mse = instance.objective(bits)?;
    let h = instance.sensing_matrix();
    let prior = instance.prior_covariance();

    // K = C_x Hᵀ (H C_x Hᵀ + D)⁻¹
    let cx_ht = prior * h.transpose();
    let mut innovation = h * &cx_ht;
    for i in 0..m {
        innovation[(i, i)] += bank.bin_widths[i] * bank.bin_widths[i] / 12.0;
    }
    let innovation_factor = linalg::cholesky(innovation)?;
    let inv = innovation_factor.inverse();
    let gain: DMatrix<f64> = &cx_ht * inv;
    let prior_factor = instance.prior_factor();

    let partitions = partitions.clamp(1, samples);
    let base = samples / partitions;
    let extra = samples % partitions;
    let chunks: Vec<ChunkStats> = (0..partitions)
        .into_par_iter()
        .map(|p| {
            let n = base + usize::from(p < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(bank.rng_seed);
            rng.set_stream(p as u64);
            let mut stats = ChunkStats {
                sq_err_sum: 0.0,
                sq_err_sq_sum: 0.0,
                err_sum: vec![0.0; m],
                err_sq_sum: vec![0.0; m],
                normalized: vec![Vec::with_capacity(n); m],
            };
            let mut y = DVector::zeros(m);
            for _ in 0..n {
                let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = prior_factor.mul_lower(&z);
                let hx = h * &x;
                for i in 0..m {
                    let w = bank.bin_widths[i];
                    let tau = w * (rng.random::<f64>() - 0.5);
                    let q = quantize(hx[i], w, tau, bank.dither_mode);
                    y[i] = q;
                    let e = q - hx[i];
                    stats.err_sum[i] += e;
                    stats.err_sq_sum[i] += e * e;
                    stats.normalized[i].push(e / w);
                }
                let err = (&gain * &y - &x).norm_squared();
                stats.sq_err_sum += err;
                stats.sq_err_sq_sum += err * err;
            }
            stats
        })
        .collect();

    let n = samples as f64;
    let mut sq_sum = 0.0;
    let mut sq_sq_sum = 0.0;
    let mut err_sum = vec![0.0; m];
    let mut err_sq_sum = vec![0.0; m];
    let mut normalized: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); m];
    for c in chunks {
        sq_sum += c.sq_err_sum;
        sq_sq_sum += c.sq_err_sq_sum;
        for i in 0..m {
            err_sum[i] += c.err_sum[i];
            err_sq_sum[i] += c.err_sq_sum[i];
            normalized[i].extend_from_slice(&c.normalized[i]);
        }
    }
    let empirical_mse = sq_sum / n;
    let standard_error = sample_std(sq_sum, sq_sq_sum, n) / n.sqrt();
    let empirical_error_mean: Vec<f64> = err_sum.iter().map(|s| s / n).collect();
    let error_mean_standard_error = err_sum
        .iter()
        .zip(&err_sq_sum)
        .map(|(s, ss)| sample_std(*s, *ss, n) / n.sqrt())
        .collect();
    let max_ks_distance = normalized
        .iter_mut()
        .map(|v| ks_uniform_distance(v))
        .fold(0.0, f64::max);

    Ok(MonteCarloReport {
        sample_count: samples,
        empirical_mse,
        analytic_mse,
        standard_error,
        empirical_error_mean,
        error_mean_standard_error,
        max_ks_distance,
    })
}

fn sample_std(sum: f64, sum_sq: f64, n: f64) -> f64 {
    if n < 2.0 {
        return 0.0;
    }
    let mean = sum / n;
    ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0).sqrt()
}

/// Kolmogorov–Smirnov distance of a sample from Uniform(−½, ½). Sorts in place.
pub fn ks_uniform_distance(sample: &mut [f64]) -> f64 {
    if sample.is_empty() {
        return 0.0;
    }
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let cdf = (v + 0.5).clamp(0.0, 1.0);
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            (cdf - lo).abs().max((hi - cdf).abs())
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.6, 1.0, 0.0, DitherMode::NonSubtractive), 0.5);
        assert_eq!(quantize(2.5, 1.0, 0.0, DitherMode::NonSubtractive), 2.5);
        assert_eq!(quantize(-0.25, 0.5, 0.0, DitherMode::NonSubtractive), -0.25);
        assert_relative_eq!(quantize(0.6, 1.0, 0.2, DitherMode::Subtractive), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn dithered_quantizer_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (v, w) = (0.37, 0.8);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let tau = w * (rng.random::<f64>() - 0.5);
            sum += quantize(v, w, tau, DitherMode::NonSubtractive);
        }
        let mean = sum / n as f64;
        // error is bounded by Δ, so its std is at most Δ/2
        assert!((mean - v).abs() < 4.0 * 0.5 * w / (n as f64).sqrt());
    }

    #[test]
    fn ks_of_exact_grid_is_small() {
        let mut v: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0 - 0.5).collect();
        assert!(ks_uniform_distance(&mut v) <= 0.5e-3 + 1e-12);
        let mut skewed = vec![0.4; 100];
        assert!(ks_uniform_distance(&mut skewed) > 0.8);
    }

    #[test]
    fn bank_rejects_nonpositive_width() {
        assert!(QuantizerBank::new(vec![1.0, 0.0], DitherMode::Subtractive, 0).is_err());
    }
}
