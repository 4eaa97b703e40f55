//! Local-extremum search with prominence gating, shared by edge detection
//! and preamble peak-train analysis.

/// Sign of a detected extremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExtremumSign {
    Maximum,
    Minimum,
}

/// A local extremum of a coefficient vector.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Extremum {
    /// Index into the analyzed vector.
    pub index: usize,
    pub sign: ExtremumSign,
    /// Prominence of the extremum in the vector's units.
    pub prominence: f64,
}

/// Indices of strict local maxima. A plateau counts once, at its left edge,
/// and must drop on both sides; endpoints never qualify.
fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Prominence of the peak at `index`: height above the higher of the two
/// lowest saddles separating it from taller terrain on each side.
fn prominence(values: &[f64], index: usize) -> f64 {
    let peak = values[index];
    let mut left_base = peak;
    for &v in values[..index].iter().rev() {
        if v > peak {
            break;
        }
        left_base = left_base.min(v);
    }
    let mut right_base = peak;
    for &v in &values[index + 1..] {
        if v > peak {
            break;
        }
        right_base = right_base.min(v);
    }
    peak - left_base.max(right_base)
}

/// All maxima and minima with prominence at least `min_prominence`,
/// in index order.
pub(crate) fn significant_extrema(values: &[f64], min_prominence: f64) -> Vec<Extremum> {
    let mut out = Vec::new();
    for idx in local_maxima(values) {
        let p = prominence(values, idx);
        if p >= min_prominence {
            out.push(Extremum {
                index: idx,
                sign: ExtremumSign::Maximum,
                prominence: p,
            });
        }
    }
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    for idx in local_maxima(&negated) {
        let p = prominence(&negated, idx);
        if p >= min_prominence {
            out.push(Extremum {
                index: idx,
                sign: ExtremumSign::Minimum,
                prominence: p,
            });
        }
    }
    out.sort_by_key(|e| e.index);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_isolated_peak_with_full_prominence() {
        let v = [0.0, 0.0, 5.0, 0.0, 0.0];
        let ex = significant_extrema(&v, 1.0);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].index, 2);
        assert_eq!(ex[0].sign, ExtremumSign::Maximum);
        assert!((ex[0].prominence - 5.0).abs() < 1e-12);
    }

    #[test]
    fn minima_are_reported_with_sign() {
        let v = [0.0, -4.0, 0.0, 3.0, 0.0];
        let ex = significant_extrema(&v, 2.0);
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].sign, ExtremumSign::Minimum);
        assert_eq!(ex[1].sign, ExtremumSign::Maximum);
    }

    #[test]
    fn prominence_gate_drops_small_bumps() {
        let v = [0.0, 0.5, 0.0, 5.0, 0.0, 0.4, 0.0];
        let ex = significant_extrema(&v, 1.0);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].index, 3);
    }

    #[test]
    fn plateau_counts_once() {
        let v = [0.0, 2.0, 2.0, 2.0, 0.0];
        let ex = significant_extrema(&v, 1.0);
        assert_eq!(ex.len(), 1);
        assert_eq!(ex[0].index, 1);
    }

}
