//! Primitive extraction: turning a denoised trace into rising-edge,
//! falling-edge, and pause events with speed and magnitude attributes.
//!
//! Edges announce themselves as prominent extrema in the detail coefficients
//! of the analysis level: a rising edge makes a local minimum, a falling
//! edge a local maximum. Each coefficient extremum is then refined on the
//! denoised samples — the event span is widened to the surrounding plateaus
//! and its duration taken from the 10–90% transition, which is insensitive
//! to the edge amplitude. Pauses are maximal stable regions: windowed
//! variance at or below a threshold for at least half a second.
//!
//! The analysis level is chosen dynamically by default: a time/scale energy
//! map ([`Scalogram`]) built from per-level detail energies tracks the
//! dominant motion scale, with a fixed fallback level when the trace carries
//! no motion energy.

use crate::denoise::estimate_noise_sigma;
use crate::error::{Error, Result};
use crate::peaks::{significant_extrema, ExtremumSign};
use crate::segment::CalibrationProfile;
use crate::trace::RssiTrace;

/// Analysis level used when dynamic selection finds no motion energy.
pub const DEFAULT_ANALYSIS_LEVEL: usize = 5;

/// Finest level dynamic selection may choose. Levels below this track
/// sub-0.2 s structure at 50 Hz, faster than any hand motion, and would
/// latch onto residual noise.
pub const MIN_DYNAMIC_LEVEL: usize = 3;

/// The three atomic signal patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    /// RSSI increases: hand moving away from the receiver.
    RisingEdge,
    /// RSSI decreases: hand approaching the receiver.
    FallingEdge,
    /// Stable RSSI: hand held still.
    Pause,
}

impl PrimitiveKind {
    /// Polarity inversion: rising and falling swap, pauses stay.
    pub fn flipped(self) -> Self {
        match self {
            PrimitiveKind::RisingEdge => PrimitiveKind::FallingEdge,
            PrimitiveKind::FallingEdge => PrimitiveKind::RisingEdge,
            PrimitiveKind::Pause => PrimitiveKind::Pause,
        }
    }

    /// Encoding symbol: `+`, `-`, or `0`.
    pub fn symbol(self) -> char {
        match self {
            PrimitiveKind::RisingEdge => '+',
            PrimitiveKind::FallingEdge => '-',
            PrimitiveKind::Pause => '0',
        }
    }
}

/// Discretized edge speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedClass {
    /// Edge duration under 0.75 s.
    High,
    /// Edge duration between 0.75 s and 1.5 s.
    Medium,
    /// Edge duration over 1.5 s.
    Low,
    /// Not applicable (pauses).
    Na,
}

/// Discretization of an edge duration into a speed class.
pub fn speed_from_duration(duration_s: f64) -> SpeedClass {
    if duration_s < 0.75 {
        SpeedClass::High
    } else if duration_s <= 1.5 {
        SpeedClass::Medium
    } else {
        SpeedClass::Low
    }
}

/// Discretized edge magnitude, relative to the calibrated reference drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnitudeClass {
    High,
    Low,
    /// Not applicable (pauses, or no calibration available).
    Na,
}

/// One extracted primitive with its time span and attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveEvent {
    pub kind: PrimitiveKind,
    pub start_s: f64,
    pub end_s: f64,
    /// RSSI change across the edge, plateau to plateau; 0 for pauses.
    pub amplitude_db: f64,
    pub speed: SpeedClass,
    pub magnitude: MagnitudeClass,
}

impl PrimitiveEvent {
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }

    /// Span as a `(start, end)` pair.
    pub fn span(&self) -> (f64, f64) {
        (self.start_s, self.end_s)
    }

    /// Copy with the edge polarity inverted.
    pub fn flipped(&self) -> Self {
        Self {
            kind: self.kind.flipped(),
            ..self.clone()
        }
    }
}

/// Overlap between two spans as a fraction of the shorter span.
pub fn span_overlap_frac(a: (f64, f64), b: (f64, f64)) -> f64 {
    let inter = (a.1.min(b.1) - a.0.max(b.0)).max(0.0);
    let shorter = (a.1 - a.0).min(b.1 - b.0);
    if shorter <= 0.0 {
        return 0.0;
    }
    inter / shorter
}

/// Extraction parameters. Defaults target 50 Hz RSSI streams.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    /// Detail level analyzed for edges when `dynamic_level` is off, and the
    /// fallback when dynamic selection finds no motion energy.
    pub analysis_level: usize,
    /// Choose the analysis level from the trace's scale-energy map.
    pub dynamic_level: bool,
    /// Coarsest level considered by dynamic selection.
    pub max_level: usize,
    /// Peak prominence gate in multiples of the analysis level's measured
    /// coefficient noise scale.
    pub peak_prominence_factor: f64,
    /// Absolute prominence floor, expressed as an edge amplitude in dB.
    pub min_prominence_db: f64,
    /// Smallest plateau-to-plateau amplitude accepted as an edge, dB.
    /// Denoised unit-noise RSSI can wander close to 3 dB peak-to-peak.
    pub min_edge_db: f64,
    /// Windowed variance at or below this value counts as stable.
    pub pause_variance_db2: f64,
    /// Minimum stable duration for a pause, seconds.
    pub pause_min_s: f64,
    /// Magnitude is High when the edge amplitude reaches this fraction of
    /// the calibrated reference drop.
    pub magnitude_fraction: f64,
    /// Ratio of a full edge extent to its 10–90% transition span. 2.46
    /// matches smooth s-shaped ramps.
    pub edge_span_scale: f64,
    /// Plateau detection horizon for span refinement, seconds.
    pub flat_window_s: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            analysis_level: DEFAULT_ANALYSIS_LEVEL,
            dynamic_level: true,
            max_level: 7,
            peak_prominence_factor: 2.0,
            min_prominence_db: 1.0,
            min_edge_db: 3.0,
            pause_variance_db2: 1.0,
            pause_min_s: 0.5,
            magnitude_fraction: 0.7,
            edge_span_scale: 2.46,
            flat_window_s: 0.15,
        }
    }
}

// ---------------------------------------------------------------------------
// Scale-energy map and analysis-level selection
// ---------------------------------------------------------------------------

/// Per-level, per-window detail-coefficient energy. Windows at level `l`
/// span `2^l` samples and hop by half a window.
#[derive(Debug, Clone)]
pub struct Scalogram {
    sample_rate_hz: f64,
    start_time_s: f64,
    /// `bands[l-1]` holds the window energies of level `l`.
    bands: Vec<Vec<f64>>,
}

impl Scalogram {
    /// Builds the map for levels `1..=max_level`, clamped to what the trace
    /// length supports.
    pub fn compute(trace: &RssiTrace, max_level: usize) -> Result<Self> {
        let n = trace.samples.len();
        let supported = if n < 2 { 0 } else { (n as f64).log2().floor() as usize };
        let max_level = max_level.min(supported);
        if max_level == 0 {
            return Err(Error::Domain(format!(
                "trace of {n} samples is too short for any analysis level"
            )));
        }
        let mut bands = Vec::with_capacity(max_level);
        for level in 1..=max_level {
            let block = 1usize << level;
            // Scale normalization: raw detail energy of an edge grows like
            // 2^level below the transition width (slope regime) and keeps
            // growing like 2^level above it (step regime), so the raw
            // maximum sits at the coarsest scale regardless of speed.
            // Dividing by 4^level turns those regimes into growth then
            // decay, putting the peak at the scale of the transition width
            // itself — fine enough that adjacent edges stay separable.
            let norm = (block as f64) * (block as f64);
            let energy = crate::wavelet::sliding_detail(&trace.samples, level, block / 2)
                .into_iter()
                .map(|beta| beta * beta / norm)
                .collect();
            bands.push(energy);
        }
        Ok(Self {
            sample_rate_hz: trace.sample_rate_hz,
            start_time_s: trace.start_time_s,
            bands,
        })
    }

    /// Coarsest level available in the map.
    pub fn max_level(&self) -> usize {
        self.bands.len()
    }

    /// Center time of window `w` at `level`.
    fn window_center_s(&self, level: usize, w: usize) -> f64 {
        let hop = (1usize << (level - 1)) as f64;
        let win = (1usize << level) as f64;
        self.start_time_s + (w as f64 * hop + win / 2.0) / self.sample_rate_hz
    }

    /// Summed local-maximum energy of `level`, restricted to windows whose
    /// centers fall in `[t0, t1]`.
    fn local_max_energy_in(&self, level: usize, t0: f64, t1: f64) -> f64 {
        let band = &self.bands[level - 1];
        let mut sum = 0.0;
        for w in 0..band.len() {
            let left = if w == 0 { f64::NEG_INFINITY } else { band[w - 1] };
            let right = if w + 1 == band.len() { f64::NEG_INFINITY } else { band[w + 1] };
            if band[w] > left && band[w] >= right && band[w] > 0.0 {
                let c = self.window_center_s(level, w);
                if c >= t0 && c <= t1 {
                    sum += band[w];
                }
            }
        }
        sum
    }

    /// Level with the greatest summed local-maximum energy inside
    /// `[t0, t1]`, or `None` when no level carries motion energy there.
    /// Ties resolve to the finer level.
    pub fn dominant_level_in(&self, t0: f64, t1: f64) -> Option<usize> {
        self.dominant_level_in_range(1, t0, t1)
    }

    /// Like [`Self::dominant_level_in`] but ignoring levels finer than
    /// `min_level`.
    pub fn dominant_level_in_range(&self, min_level: usize, t0: f64, t1: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for level in min_level.max(1)..=self.bands.len() {
            let e = self.local_max_energy_in(level, t0, t1);
            match best {
                Some((_, be)) if e <= be => {}
                _ if e > 1e-12 => best = Some((level, e)),
                _ => {}
            }
        }
        best.map(|(l, _)| l)
    }

    /// Dominant level over the whole trace.
    pub fn dominant_level(&self) -> Option<usize> {
        self.dominant_level_in(f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Outcome of analysis-level selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalysisLevel {
    pub level: usize,
    /// False when the trace carried no motion energy and the fallback
    /// level was returned.
    pub motion_energy: bool,
}

/// Picks the detail level that tracks the dominant motion scale of a
/// denoised trace. A degenerate trace yields the default level with the
/// `motion_energy` flag cleared. Only levels at or above
/// [`MIN_DYNAMIC_LEVEL`] compete.
pub fn select_analysis_level(trace: &RssiTrace, max_level: usize) -> AnalysisLevel {
    let fallback = |supported: usize| AnalysisLevel {
        level: DEFAULT_ANALYSIS_LEVEL.min(supported.max(1)),
        motion_energy: false,
    };
    match Scalogram::compute(trace, max_level) {
        Ok(map) => {
            match map.dominant_level_in_range(MIN_DYNAMIC_LEVEL, f64::NEG_INFINITY, f64::INFINITY)
            {
                Some(level) => AnalysisLevel { level, motion_energy: true },
                None => fallback(map.max_level()),
            }
        }
        Err(_) => fallback(max_level),
    }
}

// ---------------------------------------------------------------------------
// Edge detection
// ---------------------------------------------------------------------------

/// Resolved analysis level for a trace under a config.
fn resolve_level(trace: &RssiTrace, config: &ExtractorConfig) -> Option<usize> {
    let n = trace.samples.len();
    if n < 4 {
        return None;
    }
    let supported = (n as f64).log2().floor() as usize;
    if config.dynamic_level {
        let sel = select_analysis_level(trace, config.max_level.min(supported));
        Some(sel.level.min(supported))
    } else {
        (config.analysis_level <= supported).then_some(config.analysis_level)
    }
}

/// Walks outward from `anchor` while the signal keeps progressing in the
/// edge direction, stopping after `window` samples without a new extreme.
/// Returns the index of the last progress point.
fn walk_to_plateau(
    samples: &[f64],
    anchor: usize,
    window: usize,
    forward: bool,
    rising_progress: bool,
) -> usize {
    let n = samples.len() as isize;
    let step: isize = if forward { 1 } else { -1 };
    let mut best = samples[anchor];
    let mut best_i = anchor as isize;
    let mut i = anchor as isize;
    loop {
        let next = i + step;
        if next < 0 || next >= n {
            break;
        }
        if (next - best_i).abs() > window as isize {
            break;
        }
        i = next;
        let v = samples[i as usize];
        let progressed = if rising_progress { v > best } else { v < best };
        if progressed {
            best = v;
            best_i = i;
        }
    }
    best_i as usize
}

/// Detects rising and falling edges on a denoised trace.
///
/// Returns an empty list when the trace is too short for the analysis level
/// or carries no significant extrema.
pub fn detect_edges(trace: &RssiTrace, config: &ExtractorConfig) -> Vec<PrimitiveEvent> {
    let Some(level) = resolve_level(trace, config) else {
        return Vec::new();
    };
    let n = trace.samples.len();
    let block = 1usize << level;
    if n < block {
        return Vec::new();
    }

    // Sliding detail coefficients at quarter-support hops keep the edge
    // response stable wherever the edge falls relative to the dyadic grid.
    let hop = (block / 4).max(1);
    let beta = crate::wavelet::sliding_detail(&trace.samples, level, hop);

    // The level's own coefficient spread is the noise scale: robust to the
    // sparse edge responses, and it tracks whatever structure denoising
    // left behind at this scale.
    let sigma_level = estimate_noise_sigma(&beta).unwrap_or(0.0);
    let coeff_scale = (block as f64).sqrt();
    let prominence = (config.peak_prominence_factor * sigma_level)
        .max(config.min_prominence_db * coeff_scale / 2.0);

    let rate = trace.sample_rate_hz;
    let flat_window = ((config.flat_window_s * rate).round() as usize).max(2);
    let slope_half = (block / 8).max(1);

    let mut events: Vec<PrimitiveEvent> = Vec::new();
    for ex in significant_extrema(&beta, prominence) {
        // Detail-domain polarity: a rising edge carves a local minimum,
        // a falling edge a local maximum.
        let kind = match ex.sign {
            ExtremumSign::Minimum => PrimitiveKind::RisingEdge,
            ExtremumSign::Maximum => PrimitiveKind::FallingEdge,
        };
        let rising = kind == PrimitiveKind::RisingEdge;

        // Steepest directional slope near the window support.
        let support_start = ex.index * hop;
        let lo_i = support_start.saturating_sub(hop);
        let hi_i = (support_start + block + hop).min(n);
        let mut anchor = None;
        let mut best_slope = 0.0;
        for i in lo_i.max(slope_half)..hi_i.min(n - slope_half) {
            let s = trace.samples[i + slope_half] - trace.samples[i - slope_half];
            let s = if rising { s } else { -s };
            if s > best_slope {
                best_slope = s;
                anchor = Some(i);
            }
        }
        let Some(anchor) = anchor else { continue };

        // Plateau-to-plateau extent around the anchor.
        let start_i = walk_to_plateau(&trace.samples, anchor, flat_window, false, !rising);
        let end_i = walk_to_plateau(&trace.samples, anchor, flat_window, true, rising);
        if end_i <= start_i {
            continue;
        }
        let (lo_v, hi_v) = if rising {
            (trace.samples[start_i], trace.samples[end_i])
        } else {
            (trace.samples[end_i], trace.samples[start_i])
        };
        let amplitude = hi_v - lo_v;
        if amplitude < config.min_edge_db {
            continue;
        }

        // 10–90% transition, scaled back to the full edge extent so the
        // duration does not depend on amplitude.
        let v10 = lo_v + 0.1 * amplitude;
        let v90 = lo_v + 0.9 * amplitude;
        let crosses = |v: f64, from: usize| -> usize {
            let mut i = from;
            while i < end_i {
                let passed = if rising {
                    trace.samples[i] >= v
                } else {
                    trace.samples[i] <= v
                };
                if passed {
                    return i;
                }
                i += 1;
            }
            end_i
        };
        let (i10, i90) = if rising {
            let a = crosses(v10, start_i);
            (a, crosses(v90, a))
        } else {
            let a = crosses(v90, start_i);
            (a, crosses(v10, a))
        };
        let d1090 = ((i90.saturating_sub(i10)) as f64 / rate).max(1.0 / rate);
        let full = config.edge_span_scale * d1090;
        let pad = (full - d1090) / 2.0;
        let start_s = (trace.time_of(i10) - pad).max(trace.start_time_s);
        let end_s = (trace.time_of(i90) + pad).min(trace.end_time_s());
        if end_s <= start_s {
            continue;
        }
        events.push(PrimitiveEvent {
            kind,
            start_s,
            end_s,
            amplitude_db: amplitude,
            speed: speed_from_duration(end_s - start_s),
            magnitude: MagnitudeClass::Na,
        });
    }

    events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));

    // Multiple coefficient extrema can refine to the same physical edge;
    // keep the strongest of heavily overlapping same-kind events.
    let mut deduped: Vec<PrimitiveEvent> = Vec::new();
    'outer: for e in events {
        for kept in deduped.iter_mut() {
            if kept.kind == e.kind && span_overlap_frac(kept.span(), e.span()) >= 0.6 {
                if e.amplitude_db > kept.amplitude_db {
                    *kept = e;
                }
                continue 'outer;
            }
        }
        deduped.push(e);
    }
    deduped.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    deduped
}

// ---------------------------------------------------------------------------
// Pause detection
// ---------------------------------------------------------------------------

/// Detects stable regions: maximal runs where the variance of a sliding
/// `pause_min_s` window stays at or below `pause_variance_db2`.
pub fn detect_pauses(trace: &RssiTrace, config: &ExtractorConfig) -> Vec<PrimitiveEvent> {
    let n = trace.samples.len();
    let rate = trace.sample_rate_hz;
    let w = (config.pause_min_s * rate).round() as usize;
    if w < 2 || n < w {
        return Vec::new();
    }

    // Running sums on mean-removed samples keep the variance numerically
    // stable for dBm-scale values.
    let mean = trace.samples.iter().sum::<f64>() / n as f64;
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &x) in trace.samples.iter().enumerate() {
        let c = x - mean;
        s1[i + 1] = s1[i] + c;
        s2[i + 1] = s2[i] + c * c;
    }
    let wf = w as f64;
    let variance_at = |start: usize| -> f64 {
        let sum = s1[start + w] - s1[start];
        let sq = s2[start + w] - s2[start];
        (sq / wf - (sum / wf) * (sum / wf)).max(0.0)
    };

    let mut events = Vec::new();
    let mut run: Option<(usize, usize)> = None; // (first start, last start)
    for start in 0..=n - w {
        if variance_at(start) <= config.pause_variance_db2 {
            run = match run {
                Some((a, last)) if start <= last + w => Some((a, start)),
                Some((a, last)) => {
                    push_pause(&mut events, trace, a, last + w, config);
                    Some((start, start))
                }
                None => Some((start, start)),
            };
            if let Some((_, last)) = run.as_mut() {
                *last = start;
            }
        }
    }
    if let Some((a, last)) = run {
        push_pause(&mut events, trace, a, last + w, config);
    }
    events
}

fn push_pause(
    events: &mut Vec<PrimitiveEvent>,
    trace: &RssiTrace,
    start_i: usize,
    end_i: usize,
    config: &ExtractorConfig,
) {
    let start_s = trace.time_of(start_i);
    let end_s = trace.time_of(end_i);
    if end_s - start_s + 1e-9 >= config.pause_min_s {
        events.push(PrimitiveEvent {
            kind: PrimitiveKind::Pause,
            start_s,
            end_s,
            amplitude_db: 0.0,
            speed: SpeedClass::Na,
            magnitude: MagnitudeClass::Na,
        });
    }
}

// ---------------------------------------------------------------------------
// Merged extraction
// ---------------------------------------------------------------------------

/// Full extraction: edges and pauses merged into one time-ordered,
/// non-overlapping sequence.
///
/// Edges win overlaps; pauses are truncated to the gaps between edges and
/// dropped when the remnant is shorter than the minimum pause duration.
/// With a calibration profile, edge magnitudes are labeled against the
/// calibrated reference drop; without one they stay `Na`.
pub fn extract_primitives(
    trace: &RssiTrace,
    config: &ExtractorConfig,
    calibration: Option<&CalibrationProfile>,
) -> Vec<PrimitiveEvent> {
    let mut edges = detect_edges(trace, config);

    // Edge pads may brush against a neighbor; split the overlap evenly and
    // relabel speeds from the trimmed durations.
    for i in 1..edges.len() {
        if edges[i].start_s < edges[i - 1].end_s {
            let mid = 0.5 * (edges[i].start_s + edges[i - 1].end_s);
            edges[i - 1].end_s = mid;
            edges[i].start_s = mid;
            edges[i - 1].speed = speed_from_duration(edges[i - 1].duration_s());
            edges[i].speed = speed_from_duration(edges[i].duration_s());
        }
    }

    if let Some(cal) = calibration {
        let threshold = config.magnitude_fraction * cal.preamble_drop_db;
        for e in &mut edges {
            e.magnitude = if e.amplitude_db >= threshold {
                MagnitudeClass::High
            } else {
                MagnitudeClass::Low
            };
        }
    }

    let mut merged = edges.clone();
    for pause in detect_pauses(trace, config) {
        // Subtract every edge span, keeping sufficiently long fragments.
        let mut fragments = vec![(pause.start_s, pause.end_s)];
        for e in &edges {
            let mut next = Vec::new();
            for (a, b) in fragments {
                if e.end_s <= a || e.start_s >= b {
                    next.push((a, b));
                } else {
                    if e.start_s > a {
                        next.push((a, e.start_s));
                    }
                    if e.end_s < b {
                        next.push((e.end_s, b));
                    }
                }
            }
            fragments = next;
        }
        for (a, b) in fragments {
            if b - a + 1e-9 >= config.pause_min_s {
                merged.push(PrimitiveEvent {
                    kind: PrimitiveKind::Pause,
                    start_s: a,
                    end_s: b,
                    amplitude_db: 0.0,
                    speed: SpeedClass::Na,
                    magnitude: MagnitudeClass::Na,
                });
            }
        }
    }

    merged.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    merged
}
