//! Linear-time multi-level Haar discrete wavelet transform and exact inverse.
//!
//! The transform recursively splits the approximation branch with the
//! orthonormal Haar pair `g = (1/sqrt(2), 1/sqrt(2))`,
//! `h = (1/sqrt(2), -1/sqrt(2))`. Odd-length stages are padded by repeating
//! the final sample; the per-level lengths implied by the original length
//! record that padding, so reconstruction is exact for every input length.
//!
//! With orthonormal filters the coefficient energy of a dyadic-length signal
//! equals the signal energy; each padded stage additionally carries the
//! energy of its replicated sample.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// Multi-level Haar decomposition of a finite signal.
///
/// `details[0]` is the finest level (level 1); `details[levels-1]` the
/// coarsest. Level `l` holds `ceil(original_len / 2^l)` coefficients, and the
/// approximation has the same length as the coarsest detail level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    levels: usize,
    approx: Vec<f64>,
    details: Vec<Vec<f64>>,
    original_len: usize,
}

impl WaveletDecomposition {
    /// Number of decomposition levels `J`.
    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Coarse approximation (scaling) coefficients.
    pub fn approximation(&self) -> &[f64] {
        &self.approx
    }

    /// Detail coefficients for `level` in `1..=levels`.
    pub fn detail(&self, level: usize) -> &[f64] {
        &self.details[level - 1]
    }

    /// Mutable detail coefficients for `level` in `1..=levels`.
    pub fn detail_mut(&mut self, level: usize) -> &mut [f64] {
        &mut self.details[level - 1]
    }

    /// All detail vectors, finest level first.
    pub fn details(&self) -> &[Vec<f64>] {
        &self.details
    }

    /// Length of the signal this decomposition came from.
    pub fn original_len(&self) -> usize {
        self.original_len
    }

    /// Sum of squared coefficients across the approximation and all details.
    pub fn energy(&self) -> f64 {
        let detail: f64 = self
            .details
            .iter()
            .map(|d| d.iter().map(|x| x * x).sum::<f64>())
            .sum();
        detail + self.approx.iter().map(|x| x * x).sum::<f64>()
    }
}

/// Coefficient count at `level` for a signal of length `n`.
pub fn level_len(n: usize, level: usize) -> usize {
    let block = 1usize << level;
    n.div_ceil(block)
}

/// Level-`level` detail coefficients evaluated off the dyadic grid, at
/// window offsets spaced `hop` samples apart.
///
/// A Haar detail coefficient is the scaled difference of two half-block
/// sums, so prefix sums give the inner product at any offset. The dyadic
/// grid can halve an edge's response when the edge straddles a block
/// boundary; a denser evaluation keeps the response stable regardless of
/// where the edge falls.
pub fn sliding_detail(samples: &[f64], level: usize, hop: usize) -> Vec<f64> {
    let n = samples.len();
    let block = 1usize << level;
    let hop = hop.max(1);
    if n < block {
        return Vec::new();
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &x in samples {
        prefix.push(prefix.last().unwrap() + x);
    }
    let half = block / 2;
    let scale = (block as f64).sqrt().recip();
    let windows = (n - block) / hop + 1;
    let mut out = Vec::with_capacity(windows);
    for w in 0..windows {
        let a = w * hop;
        out.push((2.0 * prefix[a + half] - prefix[a] - prefix[a + block]) * scale);
    }
    out
}

/// One analysis step: pairwise sums and differences scaled by `1/sqrt(2)`.
/// An odd input is padded by repeating its final sample.
fn analysis_stage(input: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = input.len();
    let out_len = m.div_ceil(2);
    let mut approx = Vec::with_capacity(out_len);
    let mut detail = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let x0 = input[2 * k];
        let x1 = if 2 * k + 1 < m { input[2 * k + 1] } else { input[m - 1] };
        approx.push((x0 + x1) * FRAC_1_SQRT_2);
        detail.push((x0 - x1) * FRAC_1_SQRT_2);
    }
    (approx, detail)
}

/// One synthesis step, truncated to `target_len` to undo stage padding.
fn synthesis_stage(approx: &[f64], detail: &[f64], target_len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(approx.len() * 2);
    for (a, d) in approx.iter().zip(detail) {
        out.push((a + d) * FRAC_1_SQRT_2);
        out.push((a - d) * FRAC_1_SQRT_2);
    }
    out.truncate(target_len);
    out
}

/// Decomposes `signal` into `levels` detail vectors plus an approximation.
///
/// Requires `levels >= 1` and `2^levels <= signal.len()`. Runs in time linear
/// in the signal length.
pub fn dwt_decompose(signal: &[f64], levels: usize) -> Result<WaveletDecomposition> {
    if levels == 0 {
        return Err(Error::Domain("decomposition needs at least one level".into()));
    }
    if levels >= usize::BITS as usize || (1usize << levels) > signal.len() {
        return Err(Error::Domain(format!(
            "{levels} levels need at least {} samples, got {}",
            1usize.checked_shl(levels as u32).unwrap_or(usize::MAX),
            signal.len()
        )));
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("signal contains non-finite samples".into()));
    }

    let mut details = Vec::with_capacity(levels);
    let (mut approx, detail) = analysis_stage(signal);
    details.push(detail);
    for _ in 1..levels {
        let (next, detail) = analysis_stage(&approx);
        details.push(detail);
        approx = next;
    }
    Ok(WaveletDecomposition {
        levels,
        approx,
        details,
        original_len: signal.len(),
    })
}

/// Inverts a decomposition back to a signal of the original length.
///
/// `dwt_reconstruct(dwt_decompose(x, J))` reproduces `x` up to floating
/// round-off for any finite `x` and valid `J`.
pub fn dwt_reconstruct(decomposition: &WaveletDecomposition) -> Result<Vec<f64>> {
    let n = decomposition.original_len;
    let levels = decomposition.levels;
    for l in 1..=levels {
        let expected = level_len(n, l);
        let got = decomposition.details[l - 1].len();
        if got != expected {
            return Err(Error::Domain(format!(
                "level {l} has {got} detail coefficients, expected {expected}"
            )));
        }
    }
    if decomposition.approx.len() != level_len(n, levels) {
        return Err(Error::Domain(format!(
            "approximation has {} coefficients, expected {}",
            decomposition.approx.len(),
            level_len(n, levels)
        )));
    }

    let mut current = decomposition.approx.clone();
    for l in (1..=levels).rev() {
        let target = level_len(n, l - 1);
        current = synthesis_stage(&current, &decomposition.details[l - 1], target);
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const SQRT_2: f64 = std::f64::consts::SQRT_2;

    fn random_signal(rng: &mut impl Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-10.0..10.0)).collect()
    }

    #[test]
    fn constant_signal_kills_detail_filter() {
        let c = 3.25;
        let signal = vec![c; 64];
        let dec = dwt_decompose(&signal, 6).unwrap();
        for l in 1..=6 {
            assert!(dec.detail(l).iter().all(|&d| d == 0.0), "level {l}");
        }
        assert_eq!(dec.approximation().len(), 1);
        let expected = c * 2f64.powi(3); // c * 2^(J/2) with J = 6
        assert!((dec.approximation()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn hand_computed_single_level() {
        let dec = dwt_decompose(&[1.0, 1.0, -1.0, -1.0], 1).unwrap();
        assert!((dec.approximation()[0] - SQRT_2).abs() < 1e-12);
        assert!((dec.approximation()[1] + SQRT_2).abs() < 1e-12);
        assert_eq!(dec.detail(1), &[0.0, 0.0]);
    }

    #[test]
    fn inverse_of_hand_computed_example() {
        let dec = WaveletDecomposition {
            levels: 1,
            approx: vec![SQRT_2, -SQRT_2],
            details: vec![vec![0.0, 0.0]],
            original_len: 4,
        };
        let x = dwt_reconstruct(&dec).unwrap();
        let expected = [1.0, 1.0, -1.0, -1.0];
        for (a, b) in x.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    /// Brute-force oracle: the full analysis matrix, built from the dyadic
    /// supports of the orthonormal Haar basis, applied by plain
    /// matrix-vector multiplication.
    #[test]
    fn matches_explicit_haar_matrix_on_length_256() {
        let n = 256;
        let levels = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let signal = random_signal(&mut rng, n);
        let dec = dwt_decompose(&signal, levels).unwrap();

        let dot = |row: &[f64]| -> f64 { row.iter().zip(&signal).map(|(r, x)| r * x).sum() };

        // Approximation rows: 2^(-J/2) over each block of 2^J samples.
        let block = 1usize << levels;
        let scale = (block as f64).sqrt().recip();
        for k in 0..n / block {
            let mut row = vec![0.0; n];
            row[block * k..block * (k + 1)].fill(scale);
            let expected = dot(&row);
            assert!(
                (dec.approximation()[k] - expected).abs() < 1e-9,
                "approx coefficient {k}"
            );
        }

        // Detail rows at level l: +2^(-l/2) on the first half-block,
        // -2^(-l/2) on the second.
        for l in 1..=levels {
            let block = 1usize << l;
            let half = block / 2;
            let scale = (block as f64).sqrt().recip();
            for k in 0..n / block {
                let mut row = vec![0.0; n];
                row[block * k..block * k + half].fill(scale);
                row[block * k + half..block * (k + 1)].fill(-scale);
                let expected = dot(&row);
                assert!(
                    (dec.detail(l)[k] - expected).abs() < 1e-9,
                    "detail level {l} coefficient {k}"
                );
            }
        }
    }

    #[test]
    fn perfect_reconstruction_power_of_two() {
        let signal: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let dec = dwt_decompose(&signal, 3).unwrap();
        let back = dwt_reconstruct(&dec).unwrap();
        for (a, b) in back.iter().zip(&signal) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn perfect_reconstruction_length_300() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let signal = random_signal(&mut rng, 300);
        let dec = dwt_decompose(&signal, 4).unwrap();
        // Padded stage bookkeeping: 300 -> 150 -> 75 -> 38 -> 19.
        assert_eq!(dec.detail(3).len(), 38);
        assert_eq!(dec.approximation().len(), 19);
        let back = dwt_reconstruct(&dec).unwrap();
        assert_eq!(back.len(), 300);
        for (a, b) in back.iter().zip(&signal) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval_energy_on_dyadic_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &n in &[16usize, 64, 256, 1024] {
            let signal = random_signal(&mut rng, n);
            let input_energy: f64 = signal.iter().map(|x| x * x).sum();
            let levels = n.trailing_zeros() as usize;
            let dec = dwt_decompose(&signal, levels).unwrap();
            let rel = (dec.energy() - input_energy).abs() / input_energy;
            assert!(rel < 1e-9, "n={n} relative error {rel}");
        }
    }

    #[test]
    fn linearity_of_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = random_signal(&mut rng, 200);
        let y = random_signal(&mut rng, 200);
        let (a, b) = (2.5, -1.25);
        let combined: Vec<f64> = x.iter().zip(&y).map(|(x, y)| a * x + b * y).collect();
        let dx = dwt_decompose(&x, 5).unwrap();
        let dy = dwt_decompose(&y, 5).unwrap();
        let dc = dwt_decompose(&combined, 5).unwrap();
        for l in 1..=5 {
            for ((cx, cy), cc) in dx.detail(l).iter().zip(dy.detail(l)).zip(dc.detail(l)) {
                assert!((a * cx + b * cy - cc).abs() < 1e-9);
            }
        }
        for ((cx, cy), cc) in dx
            .approximation()
            .iter()
            .zip(dy.approximation())
            .zip(dc.approximation())
        {
            assert!((a * cx + b * cy - cc).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_levels_too_large_for_signal() {
        assert!(matches!(
            dwt_decompose(&[1.0; 7], 3),
            Err(Error::Domain(_))
        ));
        assert!(matches!(dwt_decompose(&[1.0; 8], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_non_finite_input() {
        assert!(matches!(
            dwt_decompose(&[1.0, f64::NAN, 0.0, 0.0], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn rejects_inconsistent_lengths_on_reconstruct() {
        let mut dec = dwt_decompose(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        dec.details[0].pop();
        assert!(matches!(dwt_reconstruct(&dec), Err(Error::Domain(_))));
    }

    #[test]
    fn level_lengths_follow_ceil_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let n = rng.gen_range(16..2000);
            let max_levels = (n as f64).log2().floor() as usize;
            let levels = rng.gen_range(1..=max_levels.min(7));
            let signal = random_signal(&mut rng, n);
            let dec = dwt_decompose(&signal, levels).unwrap();
            for l in 1..=levels {
                assert_eq!(dec.detail(l).len(), level_len(n, l), "n={n} l={l}");
            }
            assert_eq!(dec.approximation().len(), level_len(n, levels));
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_is_identity(
            n in 16usize..1500,
            levels in 1usize..=7,
            seed in proptest::prelude::any::<u64>(),
        ) {
            let levels = levels.min((n as f64).log2().floor() as usize);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let signal = random_signal(&mut rng, n);
            let dec = dwt_decompose(&signal, levels).unwrap();
            let back = dwt_reconstruct(&dec).unwrap();
            proptest::prop_assert_eq!(back.len(), n);
            for (a, b) in back.iter().zip(&signal) {
                proptest::prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
