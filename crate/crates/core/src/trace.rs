//! Core time-series types and trace file I/O.
//!
//! An [`RssiTrace`] is a uniformly sampled received-signal-strength stream
//! from one access point. A [`TraceBundle`] groups the traces of every
//! overheard AP, aligned to a common clock, and is the unit the rest of the
//! pipeline operates on.
//!
//! Traces are persisted as CSV with the header `time_s,ap_id,rssi_dbm` and
//! fixed four-decimal values. Rows may interleave APs but must be
//! non-decreasing in time per AP.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Default sampling rate assumed when a trace is too short to infer one.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 50.0;

/// Plausible RSSI range enforced at ingestion, in dBm.
pub const RSSI_RANGE_DBM: (f64, f64) = (-120.0, 0.0);

/// Sampling jitter tolerated before a file is rejected, as a fraction of the
/// sample period. Jitter inside the tolerance is snapped to the uniform grid.
pub const JITTER_TOLERANCE: f64 = 0.01;

/// Uniformly sampled RSSI time series for a single access point.
#[derive(Debug, Clone, PartialEq)]
pub struct RssiTrace {
    /// Opaque identifier of the access point this trace was heard from.
    pub ap_id: String,
    /// Samples per second; strictly positive.
    pub sample_rate_hz: f64,
    /// Timestamp of the first sample, in seconds.
    pub start_time_s: f64,
    /// RSSI samples in dBm.
    pub samples: Vec<f64>,
}

impl RssiTrace {
    /// Builds a trace, validating rate, sample finiteness, and plausible range.
    pub fn new(
        ap_id: impl Into<String>,
        sample_rate_hz: f64,
        start_time_s: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::Domain(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("trace has no samples".into()));
        }
        for (i, &s) in samples.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::Domain(format!("non-finite sample at index {i}")));
            }
            if s < RSSI_RANGE_DBM.0 || s > RSSI_RANGE_DBM.1 {
                return Err(Error::Domain(format!(
                    "sample {s} dBm at index {i} outside plausible range [{}, {}]",
                    RSSI_RANGE_DBM.0, RSSI_RANGE_DBM.1
                )));
            }
        }
        Ok(Self {
            ap_id: ap_id.into(),
            sample_rate_hz,
            start_time_s,
            samples,
        })
    }

    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the trace holds no samples (never for validated traces).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Timestamp of sample `i`, computed from the index so no floating error
    /// accumulates over the trace length.
    pub fn time_of(&self, i: usize) -> f64 {
        self.start_time_s + i as f64 / self.sample_rate_hz
    }

    /// Timestamp one period past the final sample.
    pub fn end_time_s(&self) -> f64 {
        self.time_of(self.samples.len())
    }

    /// Index of the sample nearest to `t`, clamped into range.
    pub fn index_of(&self, t: f64) -> usize {
        let i = ((t - self.start_time_s) * self.sample_rate_hz).round();
        (i.max(0.0) as usize).min(self.samples.len().saturating_sub(1))
    }

    /// Arithmetic mean of the samples in dBm.
    pub fn mean_rssi_dbm(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Returns a copy with the same clock and identity but new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            ap_id: self.ap_id.clone(),
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: self.start_time_s,
            samples,
        }
    }

    /// Sub-trace covering `[start_s, end_s]`, clamped to the trace bounds.
    pub fn slice_time(&self, start_s: f64, end_s: f64) -> Self {
        let i0 = self.index_of(start_s);
        let i1 = self.index_of(end_s).max(i0);
        Self {
            ap_id: self.ap_id.clone(),
            sample_rate_hz: self.sample_rate_hz,
            start_time_s: self.time_of(i0),
            samples: self.samples[i0..=i1].to_vec(),
        }
    }
}

/// Aligned per-AP traces sharing one sample clock.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceBundle {
    /// One trace per overheard AP. All share `sample_rate_hz` and cover the
    /// same time window after alignment.
    pub traces: Vec<RssiTrace>,
    /// Mean RSSI of each trace, recomputed at construction rather than
    /// trusted from any file.
    pub mean_rssi_dbm: Vec<f64>,
}

impl TraceBundle {
    /// Bundle with no traces. Valid for serialization; processing calls
    /// reject it.
    pub fn empty() -> Self {
        Self::default()
    }

    /// Aligns traces to their common time window and validates that rates
    /// agree. Overlapping ranges are truncated to the intersection.
    pub fn new(traces: Vec<RssiTrace>) -> Result<Self> {
        if traces.is_empty() {
            return Ok(Self::empty());
        }
        let rate = traces[0].sample_rate_hz;
        for t in &traces {
            let rel = (t.sample_rate_hz - rate).abs() / rate;
            if rel > 0.005 {
                return Err(Error::Format(format!(
                    "sample rates disagree: {} Hz (AP {}) vs {} Hz (AP {})",
                    t.sample_rate_hz, t.ap_id, rate, traces[0].ap_id
                )));
            }
        }
        let start = traces
            .iter()
            .map(|t| t.start_time_s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut aligned = Vec::with_capacity(traces.len());
        let mut offsets = Vec::with_capacity(traces.len());
        for t in &traces {
            let i0 = ((start - t.start_time_s) * rate).round() as i64;
            let i0 = i0.max(0) as usize;
            if i0 >= t.samples.len() {
                return Err(Error::Format(format!(
                    "trace for AP {} has no samples in the common time window",
                    t.ap_id
                )));
            }
            offsets.push(i0);
        }
        let common_len = traces
            .iter()
            .zip(&offsets)
            .map(|(t, &i0)| t.samples.len() - i0)
            .min()
            .unwrap();
        for (t, &i0) in traces.iter().zip(&offsets) {
            aligned.push(RssiTrace {
                ap_id: t.ap_id.clone(),
                sample_rate_hz: rate,
                start_time_s: start,
                samples: t.samples[i0..i0 + common_len].to_vec(),
            });
        }
        let mean_rssi_dbm = aligned.iter().map(|t| t.mean_rssi_dbm()).collect();
        Ok(Self {
            traces: aligned,
            mean_rssi_dbm,
        })
    }

    /// Number of traces in the bundle.
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    /// True when the bundle holds no traces.
    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Index of the trace with the highest mean RSSI.
    pub fn strongest_ap(&self) -> Option<usize> {
        self.mean_rssi_dbm
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }
}

/// Loads a trace CSV into an aligned bundle.
///
/// Rows are grouped by AP, validated for non-decreasing time and uniform
/// sampling (jitter up to 1% of the period is snapped to the grid), and the
/// per-AP traces are aligned to their common window.
pub fn load_trace(path: impl AsRef<Path>) -> Result<TraceBundle> {
    let text = std::fs::read_to_string(path)?;
    parse_trace_csv(&text)
}

/// Parses the trace CSV format from an in-memory string.
pub fn parse_trace_csv(text: &str) -> Result<TraceBundle> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((n, l)) => break (n, l),
            None => return Err(Error::EmptyInput("trace file has no header".into())),
        }
    };
    let expected = "time_s,ap_id,rssi_dbm";
    if header.1.trim() != expected {
        return Err(Error::Parse {
            line: header.0 + 1,
            message: format!("expected header `{expected}`, got `{}`", header.1.trim()),
        });
    }

    // Rows per AP, in file order.
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<(f64, f64)>> = HashMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let mut fields = trimmed.split(',');
        let (t, ap, rssi) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(t), Some(ap), Some(r), None) => (t, ap, r),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected 3 comma-separated fields".into(),
                })
            }
        };
        let t: f64 = t.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid time_s `{t}`"),
        })?;
        let rssi: f64 = rssi.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("invalid rssi_dbm `{rssi}`"),
        })?;
        if !rssi.is_finite() || rssi < RSSI_RANGE_DBM.0 || rssi > RSSI_RANGE_DBM.1 {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "rssi {rssi} dBm outside plausible range [{}, {}]",
                    RSSI_RANGE_DBM.0, RSSI_RANGE_DBM.1
                ),
            });
        }
        let ap = ap.trim().to_string();
        let per_ap = rows.entry(ap.clone()).or_insert_with(|| {
            order.push(ap.clone());
            Vec::new()
        });
        if let Some(&(prev, _)) = per_ap.last() {
            if t < prev {
                return Err(Error::Format(format!(
                    "line {line_no}: time {t} decreases for AP {ap} (previous {prev})"
                )));
            }
        }
        per_ap.push((t, rssi));
    }

    if order.is_empty() {
        return Err(Error::EmptyInput("trace file contains no samples".into()));
    }

    let mut traces = Vec::with_capacity(order.len());
    for ap in order {
        let samples = rows.remove(&ap).unwrap();
        traces.push(trace_from_rows(&ap, &samples)?);
    }
    TraceBundle::new(traces)
}

/// Builds one uniform trace from (time, rssi) rows, snapping jitter.
fn trace_from_rows(ap_id: &str, rows: &[(f64, f64)]) -> Result<RssiTrace> {
    let n = rows.len();
    let start = rows[0].0;
    let rate = if n >= 2 {
        let span = rows[n - 1].0 - start;
        if span <= 0.0 {
            return Err(Error::Format(format!(
                "AP {ap_id}: zero time span across {n} samples"
            )));
        }
        (n - 1) as f64 / span
    } else {
        DEFAULT_SAMPLE_RATE_HZ
    };
    let period = 1.0 / rate;
    for (i, &(t, _)) in rows.iter().enumerate() {
        let expected = start + i as f64 * period;
        if (t - expected).abs() > JITTER_TOLERANCE * period {
            return Err(Error::Format(format!(
                "AP {ap_id}: sample at t={t} deviates from the uniform grid by more \
                 than {}% of the period (expected t={expected:.6})",
                JITTER_TOLERANCE * 100.0
            )));
        }
    }
    let samples = rows.iter().map(|&(_, r)| r).collect();
    RssiTrace::new(ap_id, rate, start, samples)
}

/// Writes a bundle in the trace CSV format. `load_trace` reproduces the
/// bundle at the serialized four-decimal precision.
pub fn save_trace(bundle: &TraceBundle, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("time_s,ap_id,rssi_dbm\n");
    for trace in &bundle.traces {
        for (i, &s) in trace.samples.iter().enumerate() {
            writeln!(out, "{:.4},{},{:.4}", trace.time_of(i), trace.ap_id, s)
                .expect("write to string");
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
