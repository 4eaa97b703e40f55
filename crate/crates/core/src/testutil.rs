//! Shared helpers for in-crate tests: deterministic synthetic waveforms
//! built from normalized s-shaped ramps.

use crate::trace::RssiTrace;

/// Normalized s-shaped ramp: 0 at `u = 0`, 1 at `u = 1`, with the same
/// spread the simulator uses.
pub fn ramp01(u: f64) -> f64 {
    let spread = 2.0 * 199f64.ln();
    let s = |x: f64| 1.0 / (1.0 + (-x).exp());
    let lo = s(-spread / 2.0);
    let hi = s(spread / 2.0);
    ((s(spread * (u.clamp(0.0, 1.0) - 0.5)) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Builds flat-baseline traces with superimposed ramp segments.
pub struct TraceBuilder {
    rate: f64,
    total_s: f64,
    baseline: f64,
    ramps: Vec<(f64, f64, f64)>,
}

impl TraceBuilder {
    pub fn new(rate: f64, total_s: f64) -> Self {
        Self {
            rate,
            total_s,
            baseline: -45.0,
            ramps: Vec::new(),
        }
    }

    pub fn baseline(mut self, dbm: f64) -> Self {
        self.baseline = dbm;
        self
    }

    /// Adds `(start_s, duration_s, delta_db)` ramp segments.
    pub fn ramps(mut self, segments: &[(f64, f64, f64)]) -> Self {
        self.ramps.extend_from_slice(segments);
        self
    }

    pub fn build(self) -> RssiTrace {
        let n = (self.total_s * self.rate) as usize;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / self.rate;
                let mut v = self.baseline;
                for &(t0, d, delta) in &self.ramps {
                    if t >= t0 + d {
                        v += delta;
                    } else if t > t0 {
                        v += delta * ramp01((t - t0) / d);
                    }
                }
                v
            })
            .collect();
        RssiTrace::new("AP1", self.rate, 0.0, samples).unwrap()
    }
}
