//! Wavelet denoising of raw RSSI traces.
//!
//! Three stages: decompose with the Haar transform, soft-threshold every
//! detail level with a data-driven threshold, reconstruct. The threshold
//! minimizes Stein's unbiased risk estimate (SURE) under a Gaussian noise
//! assumption, with the universal threshold `sigma * sqrt(2 ln n)` as the
//! fallback for detail vectors too sparse for SURE to be reliable.
//! Approximation coefficients pass through untouched.
//!
//! A single noise scale, estimated from the finest detail level by the
//! median-absolute-deviation rule, is applied to all levels: white noise has
//! flat per-level variance under an orthonormal transform.

use crate::error::{Error, Result};
use crate::trace::RssiTrace;
use crate::wavelet::{dwt_decompose, dwt_reconstruct};

/// Detail vectors shorter than this fall back to the universal threshold.
pub const SURE_MIN_LEN: usize = 32;

/// How the noise scale is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaEstimator {
    /// Median absolute deviation of the finest detail level (default).
    MadFinestLevel,
    /// Caller-supplied noise standard deviation.
    Fixed(f64),
}

/// Which threshold is applied to each detail level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdRule {
    /// SURE-minimizing threshold, universal fallback for short vectors
    /// (default).
    SureSoft,
    /// Universal threshold `sigma * sqrt(2 ln n)` on every level.
    UniversalSoft,
}

/// Denoising configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiseConfig {
    /// Decomposition depth. At 50 Hz the default of 7 covers structure from
    /// 0.04 s up to 2.5 s.
    pub levels: usize,
    pub sigma_estimator: SigmaEstimator,
    pub threshold_rule: ThresholdRule,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            levels: 7,
            sigma_estimator: SigmaEstimator::MadFinestLevel,
            threshold_rule: ThresholdRule::SureSoft,
        }
    }
}

/// Soft-threshold operator `sign(d) * max(|d| - t, 0)`.
pub fn soft_threshold(d: f64, t: f64) -> f64 {
    d.signum() * (d.abs() - t).max(0.0)
}

/// Robust noise-scale estimate `median(|d|) / 0.6745` from the finest
/// detail coefficients. Needs at least 8 coefficients.
pub fn estimate_noise_sigma(details_finest: &[f64]) -> Result<f64> {
    if details_finest.len() < 8 {
        return Err(Error::Domain(format!(
            "need at least 8 finest-level coefficients to estimate noise, got {}",
            details_finest.len()
        )));
    }
    let mut mags: Vec<f64> = details_finest.iter().map(|d| d.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let n = mags.len();
    let median = if n % 2 == 1 {
        mags[n / 2]
    } else {
        0.5 * (mags[n / 2 - 1] + mags[n / 2])
    };
    Ok(median / 0.6745)
}

/// SURE-minimizing soft threshold for one detail vector.
///
/// The exact minimizer lies in the candidate set `{0} ∪ {|d_i|}`;
/// `SURE(t) = n σ² − 2σ² · #{i : |d_i| ≤ t} + Σ_i min(d_i², t²)` is evaluated
/// over all candidates in `O(n log n)` via sorting and prefix sums. An empty
/// vector or `sigma == 0` yields the no-op threshold 0.
pub fn sure_threshold(detail: &[f64], sigma: f64) -> Result<f64> {
    if sigma < 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if detail.is_empty() || sigma == 0.0 {
        return Ok(0.0);
    }
    let n = detail.len();
    let mut mags: Vec<f64> = detail.iter().map(|d| d.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let mut prefix_sq = Vec::with_capacity(n + 1);
    prefix_sq.push(0.0);
    for &m in &mags {
        prefix_sq.push(prefix_sq.last().unwrap() + m * m);
    }
    let sig2 = sigma * sigma;
    let risk_at = |t: f64, covered: usize| -> f64 {
        n as f64 * sig2 - 2.0 * sig2 * covered as f64
            + prefix_sq[covered]
            + (n - covered) as f64 * t * t
    };

    // t = 0 covers only exactly-zero coefficients.
    let zeros = mags.partition_point(|&m| m <= 0.0);
    let mut best_t = 0.0;
    let mut best_risk = risk_at(0.0, zeros);
    for (k, &t) in mags.iter().enumerate() {
        if k + 1 < n && mags[k + 1] == t {
            continue; // evaluate each distinct candidate once, at its last index
        }
        let risk = risk_at(t, k + 1);
        if risk < best_risk {
            best_risk = risk;
            best_t = t;
        }
    }
    Ok(best_t)
}

/// Threshold for one level under the configured rule.
fn level_threshold(detail: &[f64], sigma: f64, rule: ThresholdRule) -> Result<f64> {
    let universal = |n: usize| sigma * (2.0 * (n as f64).ln()).sqrt();
    match rule {
        ThresholdRule::SureSoft if detail.len() >= SURE_MIN_LEN => sure_threshold(detail, sigma),
        ThresholdRule::SureSoft | ThresholdRule::UniversalSoft => Ok(universal(detail.len().max(1))),
    }
}

/// Denoises a trace: decompose, soft-threshold each detail level with its
/// own threshold under a single global noise scale, reconstruct.
///
/// The output differs from the input only in sample values; identity,
/// sample rate, and length are preserved.
pub fn denoise(trace: &RssiTrace, config: &DenoiseConfig) -> Result<RssiTrace> {
    let n = trace.samples.len();
    if config.levels == 0 || n < (1usize << config.levels) {
        return Err(Error::Domain(format!(
            "trace of {n} samples is too short for {} decomposition levels",
            config.levels
        )));
    }
    let mut dec = dwt_decompose(&trace.samples, config.levels)?;
    let sigma = match config.sigma_estimator {
        SigmaEstimator::MadFinestLevel => estimate_noise_sigma(dec.detail(1))?,
        SigmaEstimator::Fixed(s) => {
            if s < 0.0 || !s.is_finite() {
                return Err(Error::Domain(format!("fixed sigma must be >= 0, got {s}")));
            }
            s
        }
    };
    for level in 1..=config.levels {
        let t = level_threshold(dec.detail(level), sigma, config.threshold_rule)?;
        for d in dec.detail_mut(level) {
            *d = soft_threshold(*d, t);
        }
    }
    let samples = dwt_reconstruct(&dec)?;
    Ok(trace.with_samples(samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn normal_samples(rng: &mut impl Rng, n: usize, sigma: f64) -> Vec<f64> {
        let dist = Normal::new(0.0, sigma).unwrap();
        (0..n).map(|_| dist.sample(rng)).collect()
    }

    /// Smooth two-edge waveform used as a noiseless reference.
    fn gesture_waveform(n: usize, rate: f64) -> Vec<f64> {
        let ramp = |t: f64, center: f64, sign: f64| -> f64 {
            let k = 2.0 * 199f64.ln() / 0.6;
            sign * 6.0 / (1.0 + (-k * (t - center)).exp())
        };
        (0..n)
            .map(|i| {
                let t = i as f64 / rate;
                -45.0 + ramp(t, 2.0, 1.0) + ramp(t, 5.0, -1.0)
            })
            .collect()
    }

    #[test]
    fn mad_of_zeros_is_zero() {
        assert_eq!(estimate_noise_sigma(&[0.0; 16]).unwrap(), 0.0);
    }

    #[test]
    fn mad_recovers_known_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let sigma0 = 1.7;
        let coeffs = normal_samples(&mut rng, 10_000, sigma0);
        let est = estimate_noise_sigma(&coeffs).unwrap();
        assert!((est - sigma0).abs() / sigma0 < 0.05, "est {est}");
    }

    #[test]
    fn mad_is_robust_to_outliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut coeffs = normal_samples(&mut rng, 10_000, 1.0);
        for i in 0..100 {
            coeffs[i * 100] = 50.0; // 1% large outliers
        }
        let est = estimate_noise_sigma(&coeffs).unwrap();
        assert!((est - 1.0).abs() < 0.10, "est {est}");
    }

    #[test]
    fn mad_rejects_short_vectors() {
        assert!(estimate_noise_sigma(&[0.0; 7]).is_err());
    }

    #[test]
    fn sure_zero_sigma_means_clean_signal() {
        assert_eq!(sure_threshold(&[1.0, -2.0, 3.0], 0.0).unwrap(), 0.0);
        assert_eq!(sure_threshold(&[], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn sure_kills_most_pure_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let detail = normal_samples(&mut rng, 4096, 1.0);
        let t = sure_threshold(&detail, 1.0).unwrap();
        let zeroed = detail
            .iter()
            .filter(|&&d| soft_threshold(d, t) == 0.0)
            .count();
        assert!(
            zeroed as f64 >= 0.9 * detail.len() as f64,
            "zeroed {zeroed} of {}",
            detail.len()
        );
    }

    /// Direct quadratic-time SURE evaluation used as the oracle.
    fn sure_direct(detail: &[f64], sigma: f64, t: f64) -> f64 {
        let n = detail.len() as f64;
        let covered = detail.iter().filter(|d| d.abs() <= t).count() as f64;
        let sum: f64 = detail.iter().map(|d| (d * d).min(t * t)).sum();
        n * sigma * sigma - 2.0 * sigma * sigma * covered + sum
    }

    fn exhaustive_min(detail: &[f64], sigma: f64) -> f64 {
        let mut best = sure_direct(detail, sigma, 0.0);
        for d in detail {
            best = best.min(sure_direct(detail, sigma, d.abs()));
        }
        best
    }

    #[test]
    fn sure_preserves_large_coefficients() {
        // A quarter of the coefficients carry signal at 20 sigma. At that
        // density the risk minimum sits below one sigma, so soft
        // thresholding barely grazes the spikes.
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let sigma = 1.0;
        let mut detail = normal_samples(&mut rng, 256, sigma);
        for i in 0..64 {
            detail[i * 4] = if i % 2 == 0 { 20.0 } else { -20.0 };
        }
        let t = sure_threshold(&detail, sigma).unwrap();
        assert!(t < 20.0 * sigma, "threshold {t}");
        for i in 0..64 {
            let kept = soft_threshold(detail[i * 4], t);
            assert!(kept.abs() >= 19.0 * sigma, "spike shrunk to {kept}");
        }
        // The chosen threshold attains the exhaustive minimum.
        let chosen_risk = sure_direct(&detail, sigma, t);
        assert_eq!(chosen_risk, exhaustive_min(&detail, sigma));
    }

    #[test]
    fn noiseless_waveform_passes_through() {
        let samples = gesture_waveform(512, 50.0);
        let trace = RssiTrace::new("AP1", 50.0, 0.0, samples.clone()).unwrap();
        let out = denoise(&trace, &DenoiseConfig::default()).unwrap();
        let max_abs = out
            .samples
            .iter()
            .zip(&samples)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_abs <= 0.2, "max abs deviation {max_abs}");
    }

    #[test]
    fn denoising_gains_at_least_3_db_snr() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let clean = gesture_waveform(512, 50.0);
        let noise = normal_samples(&mut rng, clean.len(), 2.0);
        let noisy: Vec<f64> = clean.iter().zip(&noise).map(|(c, n)| c + n).collect();
        let trace = RssiTrace::new("AP1", 50.0, 0.0, noisy.clone()).unwrap();
        let out = denoise(&trace, &DenoiseConfig::default()).unwrap();
        let mse = |xs: &[f64]| -> f64 {
            xs.iter()
                .zip(&clean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / xs.len() as f64
        };
        let gain_db = 10.0 * (mse(&noisy) / mse(&out.samples)).log10();
        assert!(gain_db >= 3.0, "gain {gain_db} dB");
    }

    #[test]
    fn constant_plus_noise_loses_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let noisy: Vec<f64> = normal_samples(&mut rng, 512, 1.5)
            .iter()
            .map(|n| -45.0 + n)
            .collect();
        let trace = RssiTrace::new("AP1", 50.0, 0.0, noisy).unwrap();
        let out = denoise(&trace, &DenoiseConfig::default()).unwrap();
        let var = |xs: &[f64]| -> f64 {
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
        };
        assert!(var(&out.samples) < var(&trace.samples));
    }

    #[test]
    fn variance_never_grows_on_pure_noise() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let noisy: Vec<f64> = normal_samples(&mut rng, 256, 1.0)
                .iter()
                .map(|n| -50.0 + n)
                .collect();
            let trace = RssiTrace::new("AP1", 50.0, 0.0, noisy).unwrap();
            let out = denoise(&trace, &DenoiseConfig::default()).unwrap();
            let var = |xs: &[f64]| -> f64 {
                let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64
            };
            if var(&out.samples) <= var(&trace.samples) {
                hits += 1;
            }
        }
        assert!(hits >= 95, "variance reduced in only {hits} of 100 trials");
    }

    #[test]
    fn metadata_is_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let samples: Vec<f64> = normal_samples(&mut rng, 300, 1.0)
            .iter()
            .map(|n| -60.0 + n)
            .collect();
        let trace = RssiTrace::new("AP7", 50.0, 12.5, samples).unwrap();
        let out = denoise(&trace, &DenoiseConfig { levels: 6, ..Default::default() }).unwrap();
        assert_eq!(out.ap_id, "AP7");
        assert_eq!(out.sample_rate_hz, 50.0);
        assert_eq!(out.start_time_s, 12.5);
        assert_eq!(out.samples.len(), 300);
    }

    #[test]
    fn trace_too_short_is_domain_error() {
        let trace = RssiTrace::new("AP1", 50.0, 0.0, vec![-45.0; 100]).unwrap();
        assert!(matches!(
            denoise(&trace, &DenoiseConfig::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn soft_threshold_matches_definition() {
        let cases = [(3.0, 1.0, 2.0), (-3.0, 1.0, -2.0), (0.5, 1.0, 0.0), (-0.5, 1.0, 0.0)];
        for (d, t, want) in cases {
            assert_eq!(soft_threshold(d, t), want);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for _ in 0..1000 {
            let d: f64 = rng.gen_range(-10.0..10.0);
            let t: f64 = rng.gen_range(0.0..5.0);
            let got = soft_threshold(d, t);
            assert_eq!(got, d.signum() * (d.abs() - t).max(0.0));
        }
    }
}
