//! Deterministic multi-AP RSSI scenario simulator.
//!
//! A [`ScenarioScript`] lists access points and timed events — preambles,
//! gestures, interference bursts — and generates a labeled [`TraceBundle`]:
//! one shared motion waveform, scaled per AP by an independent gain to
//! model geometry, plus independent Gaussian noise per AP. Everything is
//! reproducible from the script's seed.
//!
//! Waveform conventions:
//! - Edges are normalized s-shaped ramps. A speed class maps to its bucket
//!   midpoint ramp duration (high 0.5 s, medium 1.1 s, low 2.0 s).
//! - Edge amplitude scales with signal strength: a fraction of the anchor
//!   AP's baseline magnitude (high 0.15, low 0.07), so stronger signals
//!   see larger swings.
//! - Consecutive edges are separated by a short sub-pause gap; `0`
//!   primitives hold for one second.
//! - Between events the level relaxes gently back to baseline, slowly
//!   enough that the drift never looks like an edge.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gestures::TemplateSet;
use crate::primitives::{speed_from_duration, MagnitudeClass, PrimitiveKind, SpeedClass};
use crate::trace::{RssiTrace, TraceBundle};

/// Ramp duration midpoints per speed class, seconds.
pub const SPEED_RAMP_S: [(SpeedClass, f64); 3] = [
    (SpeedClass::High, 0.5),
    (SpeedClass::Medium, 1.1),
    (SpeedClass::Low, 2.0),
];

/// Edge amplitude as a fraction of the anchor baseline magnitude.
pub const MAGNITUDE_FRACTION_HIGH: f64 = 0.15;
pub const MAGNITUDE_FRACTION_LOW: f64 = 0.07;

/// Flat gap between consecutive edge primitives, seconds. Short enough to
/// never qualify as a pause.
pub const INTER_EDGE_GAP_S: f64 = 0.25;

/// Duration of a `0` (hold) primitive, seconds.
pub const PAUSE_HOLD_S: f64 = 1.0;

/// Preamble shape: drop ramp, hold at the dropped level, fast up-down
/// motions, recovery ramp. The up-downs are quick so that even a
/// four-repetition train fits the detector's search budget.
pub const PREAMBLE_DROP_RAMP_S: f64 = 0.4;
pub const PREAMBLE_HOLD_S: f64 = 0.8;
pub const PREAMBLE_UPDOWN_EDGE_S: f64 = 0.3;
pub const PREAMBLE_UPDOWN_GAP_S: f64 = 0.1;
pub const PREAMBLE_RECOVERY_S: f64 = 0.4;

/// Up-down swing as a fraction of the drop depth.
pub const PREAMBLE_SWING_FRACTION: f64 = 0.9;

/// Default preamble drop as a fraction of the anchor baseline magnitude.
/// Deep enough to trip the drop threshold at the weakest per-AP gain, yet
/// shallow enough that the calibrated magnitude threshold still separates
/// the two gesture magnitude classes.
pub const PREAMBLE_DROP_FRACTION: f64 = 0.2;

/// Post-event relaxation toward baseline: start delay and drift rate.
const RELAX_DELAY_S: f64 = 0.4;
const RELAX_RATE_DB_PER_S: f64 = 1.0;

/// Per-AP gain range modeling geometry differences.
const AP_GAIN_RANGE: (f64, f64) = (0.6, 1.0);

fn default_rate() -> f64 {
    50.0
}

/// One access point in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSpec {
    pub id: String,
    pub baseline_rssi_dbm: f64,
    #[serde(default)]
    pub noise_sigma_db: f64,
}

/// Shape of an interference burst.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurstShape {
    /// Bounded, smoothed random wander.
    RandomWalk,
    /// A gesture-like edge pattern at a scripted amplitude, modeling
    /// another person moving nearby.
    Humanlike,
}

/// A timed scenario event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScriptEvent {
    Preamble {
        start_s: f64,
        /// Drop depth in dB; defaults to a fraction of the anchor baseline.
        #[serde(default)]
        drop_db: Option<f64>,
        #[serde(default = "default_updowns")]
        updown_count: usize,
    },
    Gesture {
        start_s: f64,
        family: String,
        #[serde(default = "default_count")]
        count: u32,
        #[serde(default = "default_speed")]
        speed: SpeedClass,
        #[serde(default = "default_magnitude")]
        magnitude: MagnitudeClass,
        /// Explicit ramp duration; must stay inside the speed bucket.
        #[serde(default)]
        ramp_s: Option<f64>,
        /// Explicit spacing between repetition starts, for scripting a
        /// target repetition frequency.
        #[serde(default)]
        rep_period_s: Option<f64>,
    },
    Interference {
        start_s: f64,
        duration_s: f64,
        amplitude_db: f64,
        #[serde(default = "default_shape")]
        shape: BurstShape,
    },
}

fn default_updowns() -> usize {
    2
}
fn default_count() -> u32 {
    1
}
fn default_speed() -> SpeedClass {
    SpeedClass::High
}
fn default_magnitude() -> MagnitudeClass {
    MagnitudeClass::High
}
fn default_shape() -> BurstShape {
    BurstShape::RandomWalk
}

impl ScriptEvent {
    pub fn start_s(&self) -> f64 {
        match *self {
            ScriptEvent::Preamble { start_s, .. }
            | ScriptEvent::Gesture { start_s, .. }
            | ScriptEvent::Interference { start_s, .. } => start_s,
        }
    }
}

/// Simulator input: APs, events, noise, and a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioScript {
    #[serde(default = "default_rate")]
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "ap")]
    pub aps: Vec<ApSpec>,
    #[serde(rename = "event", default)]
    pub events: Vec<ScriptEvent>,
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(format!("scenario script: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn render(&self) -> String {
        toml::to_string_pretty(self).expect("scripts serialize")
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

/// A labeled time span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthSpan {
    pub start_s: f64,
    pub end_s: f64,
}

impl TruthSpan {
    pub fn span(&self) -> (f64, f64) {
        (self.start_s, self.end_s)
    }
}

/// Ground-truth label for one emitted primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPrimitive {
    pub kind: PrimitiveKind,
    pub start_s: f64,
    pub end_s: f64,
    pub speed: SpeedClass,
    pub magnitude: MagnitudeClass,
    pub amplitude_db: f64,
}

impl TruthPrimitive {
    pub fn span(&self) -> (f64, f64) {
        (self.start_s, self.end_s)
    }
}

/// Ground-truth label for one emitted gesture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthGesture {
    pub family: String,
    pub count: u32,
    pub start_s: f64,
    pub end_s: f64,
    pub frequency_hz: f64,
    pub speed: SpeedClass,
    pub magnitude: MagnitudeClass,
}

impl TruthGesture {
    pub fn span(&self) -> (f64, f64) {
        (self.start_s, self.end_s)
    }
}

/// Every labeled span the simulator emitted for a scenario.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroundTruth {
    pub primitives: Vec<TruthPrimitive>,
    pub gestures: Vec<TruthGesture>,
    pub preambles: Vec<TruthSpan>,
    pub interference: Vec<TruthSpan>,
}

/// One line of the ground-truth sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TruthRecord {
    Primitive(TruthPrimitive),
    Gesture(TruthGesture),
    Preamble(TruthSpan),
    Interference(TruthSpan),
}

impl GroundTruth {
    /// Writes the line-delimited labeled-span sidecar (one JSON object per
    /// line).
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        let mut push = |r: TruthRecord| {
            out.push_str(&serde_json::to_string(&r).expect("truth records serialize"));
            out.push('\n');
        };
        for p in &self.primitives {
            push(TruthRecord::Primitive(p.clone()));
        }
        for g in &self.gestures {
            push(TruthRecord::Gesture(g.clone()));
        }
        for p in &self.preambles {
            push(TruthRecord::Preamble(*p));
        }
        for i in &self.interference {
            push(TruthRecord::Interference(*i));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a sidecar written by [`Self::write_jsonl`].
    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut truth = GroundTruth::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: TruthRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
            match record {
                TruthRecord::Primitive(p) => truth.primitives.push(p),
                TruthRecord::Gesture(g) => truth.gestures.push(g),
                TruthRecord::Preamble(s) => truth.preambles.push(s),
                TruthRecord::Interference(s) => truth.interference.push(s),
            }
        }
        Ok(truth)
    }
}

/// Ramp duration for a speed class.
pub fn ramp_duration(speed: SpeedClass) -> Result<f64> {
    SPEED_RAMP_S
        .iter()
        .find(|(s, _)| *s == speed)
        .map(|&(_, d)| d)
        .ok_or_else(|| Error::Validation("gesture speed must be high, medium, or low".into()))
}

/// Amplitude fraction for a magnitude class.
pub fn magnitude_fraction(magnitude: MagnitudeClass) -> Result<f64> {
    match magnitude {
        MagnitudeClass::High => Ok(MAGNITUDE_FRACTION_HIGH),
        MagnitudeClass::Low => Ok(MAGNITUDE_FRACTION_LOW),
        MagnitudeClass::Na => Err(Error::Validation(
            "gesture magnitude must be high or low".into(),
        )),
    }
}

/// Total rendered duration of a gesture event.
pub fn gesture_duration(
    pattern: &str,
    count: u32,
    ramp_s: f64,
    rep_period_s: Option<f64>,
) -> Result<f64> {
    let one_rep = rep_duration(pattern, ramp_s);
    match rep_period_s {
        None => {
            let boundary_gaps = (count as f64 - 1.0) * INTER_EDGE_GAP_S;
            Ok(count as f64 * one_rep + boundary_gaps)
        }
        Some(period) => {
            let min_flat = INTER_EDGE_GAP_S;
            let max_flat = 0.45;
            let flat = period - one_rep;
            if flat < min_flat - 1e-9 || flat > max_flat + 1e-9 {
                return Err(Error::Validation(format!(
                    "rep_period_s {period} leaves {flat:.2} s between repetitions; \
                     must lie in [{min_flat}, {max_flat}] to stay decodable"
                )));
            }
            Ok((count as f64 - 1.0) * period + one_rep)
        }
    }
}

/// Duration of a single repetition of a pattern (no trailing gap).
fn rep_duration(pattern: &str, ramp_s: f64) -> f64 {
    let mut total = 0.0;
    let mut prev_edge = false;
    for c in pattern.chars() {
        match c {
            '0' => {
                total += PAUSE_HOLD_S;
                prev_edge = false;
            }
            _ => {
                if prev_edge {
                    total += INTER_EDGE_GAP_S;
                }
                total += ramp_s;
                prev_edge = true;
            }
        }
    }
    total
}

/// Total rendered duration of a preamble event.
pub fn preamble_duration(updown_count: usize) -> f64 {
    PREAMBLE_DROP_RAMP_S
        + PREAMBLE_HOLD_S
        + updown_count as f64 * (2.0 * PREAMBLE_UPDOWN_EDGE_S + 2.0 * PREAMBLE_UPDOWN_GAP_S)
        + PREAMBLE_RECOVERY_S
}

/// Delay from a scripted preamble's start until the detector's gesture
/// scanning opens: drop ramp, stage-one trigger latency, the full peak
/// search budget, and the end margin. Scripts must start their first
/// gesture after this point but within the silence timeout of it.
pub fn preamble_ready_delay_s() -> f64 {
    PREAMBLE_DROP_RAMP_S
        + 0.3
        + crate::segment::PEAK_SEARCH_BUDGET_S
        + crate::segment::PREAMBLE_END_MARGIN_S
}

// ---------------------------------------------------------------------------
// Waveform rendering
// ---------------------------------------------------------------------------

/// Normalized s-shaped ramp: exactly 0 at `u = 0` and 1 at `u = 1`.
fn ramp01(u: f64) -> f64 {
    let spread = 2.0 * 199f64.ln();
    let s = |x: f64| 1.0 / (1.0 + (-x).exp());
    let lo = s(-spread / 2.0);
    let hi = s(spread / 2.0);
    ((s(spread * (u.clamp(0.0, 1.0) - 0.5)) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Sequential waveform builder tracking a cursor and the current level
/// offset from baseline.
struct WaveformBuilder {
    rate: f64,
    samples: Vec<f64>,
    cursor: usize,
    level: f64,
}

impl WaveformBuilder {
    fn new(rate: f64, n: usize) -> Self {
        Self {
            rate,
            samples: vec![0.0; n],
            cursor: 0,
            level: 0.0,
        }
    }

    fn index_of(&self, t: f64) -> usize {
        ((t * self.rate).round() as usize).min(self.samples.len())
    }

    fn cursor_s(&self) -> f64 {
        self.cursor as f64 / self.rate
    }

    /// Holds the current level up to time `t`.
    fn hold_until(&mut self, t: f64) {
        let end = self.index_of(t);
        while self.cursor < end {
            self.samples[self.cursor] = self.level;
            self.cursor += 1;
        }
    }

    fn hold_for(&mut self, d: f64) {
        let t = self.cursor_s() + d;
        self.hold_until(t);
    }

    /// S-shaped ramp of `delta` dB over `d` seconds.
    fn ramp(&mut self, d: f64, delta: f64) {
        let start = self.cursor;
        let end = self.index_of(self.cursor_s() + d).max(start);
        let steps = (end - start).max(1);
        for i in start..end {
            let u = (i - start) as f64 / steps as f64;
            self.samples[i] = self.level + delta * ramp01(u);
        }
        self.cursor = end;
        self.level += delta;
    }

    /// Eases the level back toward zero between events: hold briefly, then
    /// drift at a rate far below any edge slope.
    fn relax_until(&mut self, t: f64) {
        let end = self.index_of(t);
        let delay_samples = (RELAX_DELAY_S * self.rate).round() as usize;
        let step = RELAX_RATE_DB_PER_S / self.rate;
        let mut waited = 0usize;
        while self.cursor < end {
            if waited < delay_samples && self.level != 0.0 {
                waited += 1;
            } else if self.level > 0.0 {
                self.level = (self.level - step).max(0.0);
            } else if self.level < 0.0 {
                self.level = (self.level + step).min(0.0);
            }
            self.samples[self.cursor] = self.level;
            self.cursor += 1;
        }
    }

    /// Adds an independent overlay (interference) on top of whatever the
    /// level track holds.
    fn overlay(&mut self, t0: f64, values: &[f64]) {
        let start = self.index_of(t0);
        for (i, v) in values.iter().enumerate() {
            if start + i < self.samples.len() {
                self.samples[start + i] += v;
            }
        }
    }
}

/// A rendered gesture: primitive labels plus the gesture label.
struct RenderedGesture {
    primitives: Vec<TruthPrimitive>,
    gesture: TruthGesture,
}

fn render_gesture(
    builder: &mut WaveformBuilder,
    start_s: f64,
    pattern: &str,
    family: &str,
    count: u32,
    speed: SpeedClass,
    magnitude: MagnitudeClass,
    amp: f64,
    ramp_s: f64,
    rep_period_s: Option<f64>,
) -> Result<RenderedGesture> {
    if count == 0 {
        return Err(Error::Validation("gesture count must be at least 1".into()));
    }
    builder.relax_until(start_s);
    let mut primitives = Vec::new();
    let mut rep_starts = Vec::with_capacity(count as usize);

    for rep in 0..count {
        if rep > 0 {
            match rep_period_s {
                Some(period) => builder.hold_until(rep_starts[0] + rep as f64 * period),
                None => builder.hold_for(INTER_EDGE_GAP_S),
            }
        }
        rep_starts.push(builder.cursor_s());
        let mut prev_edge = false;
        for c in pattern.chars() {
            match c {
                '0' => {
                    let t0 = builder.cursor_s();
                    builder.hold_for(PAUSE_HOLD_S);
                    primitives.push(TruthPrimitive {
                        kind: PrimitiveKind::Pause,
                        start_s: t0,
                        end_s: builder.cursor_s(),
                        speed: SpeedClass::Na,
                        magnitude: MagnitudeClass::Na,
                        amplitude_db: 0.0,
                    });
                    prev_edge = false;
                }
                edge => {
                    if prev_edge {
                        builder.hold_for(INTER_EDGE_GAP_S);
                    }
                    let delta = if edge == '+' { amp } else { -amp };
                    let kind = if edge == '+' {
                        PrimitiveKind::RisingEdge
                    } else {
                        PrimitiveKind::FallingEdge
                    };
                    let t0 = builder.cursor_s();
                    builder.ramp(ramp_s, delta);
                    primitives.push(TruthPrimitive {
                        kind,
                        start_s: t0,
                        end_s: builder.cursor_s(),
                        speed,
                        magnitude,
                        amplitude_db: amp,
                    });
                    prev_edge = true;
                }
            }
        }
    }

    let frequency_hz = if count >= 2 {
        let spanned = rep_starts[count as usize - 1] - rep_starts[0];
        if spanned > 0.0 {
            (count as f64 - 1.0) / spanned
        } else {
            0.0
        }
    } else {
        0.0
    };
    let gesture = TruthGesture {
        family: family.to_string(),
        count,
        start_s: primitives.first().map_or(start_s, |p| p.start_s),
        end_s: primitives.last().map_or(start_s, |p| p.end_s),
        frequency_hz,
        speed,
        magnitude,
    };
    Ok(RenderedGesture { primitives, gesture })
}

fn render_preamble(
    builder: &mut WaveformBuilder,
    start_s: f64,
    drop_db: f64,
    updown_count: usize,
) -> TruthSpan {
    builder.relax_until(start_s);
    let t0 = builder.cursor_s();
    builder.ramp(PREAMBLE_DROP_RAMP_S, -drop_db);
    builder.hold_for(PREAMBLE_HOLD_S);
    let swing = PREAMBLE_SWING_FRACTION * drop_db;
    for _ in 0..updown_count {
        builder.ramp(PREAMBLE_UPDOWN_EDGE_S, swing);
        builder.hold_for(PREAMBLE_UPDOWN_GAP_S);
        builder.ramp(PREAMBLE_UPDOWN_EDGE_S, -swing);
        builder.hold_for(PREAMBLE_UPDOWN_GAP_S);
    }
    builder.ramp(PREAMBLE_RECOVERY_S, drop_db);
    TruthSpan {
        start_s: t0,
        end_s: builder.cursor_s(),
    }
}

fn render_interference(
    rate: f64,
    duration_s: f64,
    amplitude_db: f64,
    shape: BurstShape,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = (duration_s * rate).round() as usize;
    match shape {
        BurstShape::RandomWalk => {
            let step_sigma = 1.5 * amplitude_db / (n as f64).sqrt();
            let noise = Normal::new(0.0, step_sigma).expect("valid sigma");
            let mut raw = Vec::with_capacity(n);
            let mut level = 0.0f64;
            for _ in 0..n {
                level = (level + noise.sample(rng)).clamp(-amplitude_db, amplitude_db);
                raw.push(level);
            }
            // Smooth and fade so the burst has no artificial cliffs.
            let w = ((0.2 * rate) as usize).max(1);
            let mut smooth = Vec::with_capacity(n);
            for i in 0..n {
                let a = i.saturating_sub(w / 2);
                let b = (i + w / 2 + 1).min(n);
                smooth.push(raw[a..b].iter().sum::<f64>() / (b - a) as f64);
            }
            let fade = ((0.3 * rate) as usize).max(1).min(n / 2);
            for i in 0..fade {
                let g = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / fade as f64).cos();
                smooth[i] *= g;
                smooth[n - 1 - i] *= g;
            }
            smooth
        }
        BurstShape::Humanlike => {
            let patterns = ["+-", "-+", "+-+-"];
            let pattern = patterns[rng.gen_range(0..patterns.len())];
            let edges = pattern.len();
            let gaps = (edges - 1) as f64 * INTER_EDGE_GAP_S;
            let edge_d = ((duration_s - gaps) / edges as f64).max(0.15);
            let mut builder = WaveformBuilder::new(rate, n);
            for (i, c) in pattern.chars().enumerate() {
                if i > 0 {
                    builder.hold_for(INTER_EDGE_GAP_S);
                }
                let delta = if c == '+' { amplitude_db } else { -amplitude_db };
                builder.ramp(edge_d, delta);
            }
            builder.hold_until(duration_s);
            builder.samples
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario generation
// ---------------------------------------------------------------------------

/// Standalone gesture waveform: level offsets from zero plus its labels.
pub struct GestureWaveform {
    /// Offset-from-baseline samples, starting at t = 0.
    pub samples: Vec<f64>,
    pub primitives: Vec<TruthPrimitive>,
    pub gesture: TruthGesture,
}

/// Renders a single gesture waveform against the stock template table.
///
/// The amplitude follows the magnitude model: a fraction of the baseline
/// magnitude, so stronger signals swing further.
pub fn synth_gesture_waveform(
    family: &str,
    count: u32,
    speed: SpeedClass,
    magnitude: MagnitudeClass,
    baseline_dbm: f64,
) -> Result<GestureWaveform> {
    synth_gesture_waveform_with(
        family,
        count,
        speed,
        magnitude,
        baseline_dbm,
        default_rate(),
        &TemplateSet::default_families(),
    )
}

/// [`synth_gesture_waveform`] with explicit rate and template table.
pub fn synth_gesture_waveform_with(
    family: &str,
    count: u32,
    speed: SpeedClass,
    magnitude: MagnitudeClass,
    baseline_dbm: f64,
    sample_rate_hz: f64,
    templates: &TemplateSet,
) -> Result<GestureWaveform> {
    let template = templates
        .get(family)
        .ok_or_else(|| Error::Domain(format!("unknown gesture family `{family}`")))?;
    let ramp_s = ramp_duration(speed)?;
    let amp = magnitude_fraction(magnitude)? * baseline_dbm.abs();
    let duration = gesture_duration(&template.pattern, count, ramp_s, None)?;
    let n = ((duration + 1.0) * sample_rate_hz).round() as usize;
    let mut builder = WaveformBuilder::new(sample_rate_hz, n);
    let rendered = render_gesture(
        &mut builder,
        0.0,
        &template.pattern,
        family,
        count,
        speed,
        magnitude,
        amp,
        ramp_s,
        None,
    )?;
    builder.hold_until(n as f64 / sample_rate_hz);
    Ok(GestureWaveform {
        samples: builder.samples,
        primitives: rendered.primitives,
        gesture: rendered.gesture,
    })
}

/// Generates the labeled trace bundle for a scenario with the stock
/// template table.
pub fn generate_scenario(script: &ScenarioScript) -> Result<(TraceBundle, GroundTruth)> {
    generate_scenario_with(script, &TemplateSet::default_families())
}

/// Generates the labeled trace bundle for a scenario.
pub fn generate_scenario_with(
    script: &ScenarioScript,
    templates: &TemplateSet,
) -> Result<(TraceBundle, GroundTruth)> {
    validate_script(script, templates)?;
    let rate = script.sample_rate_hz;
    let n = (script.duration_s * rate).round() as usize;
    let anchor_baseline = script.aps[0].baseline_rssi_dbm.abs();

    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);
    let mut truth = GroundTruth::default();
    let mut builder = WaveformBuilder::new(rate, n);
    let mut overlays: Vec<(f64, Vec<f64>)> = Vec::new();

    let mut events = script.events.clone();
    events.sort_by(|a, b| a.start_s().total_cmp(&b.start_s()));
    for event in &events {
        match event {
            ScriptEvent::Preamble { start_s, drop_db, updown_count } => {
                let drop = drop_db.unwrap_or(PREAMBLE_DROP_FRACTION * anchor_baseline);
                truth
                    .preambles
                    .push(render_preamble(&mut builder, *start_s, drop, *updown_count));
            }
            ScriptEvent::Gesture {
                start_s,
                family,
                count,
                speed,
                magnitude,
                ramp_s,
                rep_period_s,
            } => {
                let template = templates.get(family).expect("validated family");
                let base_ramp = ramp_duration(*speed)?;
                let ramp = ramp_s.unwrap_or(base_ramp);
                let amp = magnitude_fraction(*magnitude)? * anchor_baseline;
                let rendered = render_gesture(
                    &mut builder,
                    *start_s,
                    &template.pattern,
                    family,
                    *count,
                    *speed,
                    *magnitude,
                    amp,
                    ramp,
                    *rep_period_s,
                )?;
                truth.primitives.extend(rendered.primitives);
                truth.gestures.push(rendered.gesture);
            }
            ScriptEvent::Interference { start_s, duration_s, amplitude_db, shape } => {
                let burst = render_interference(rate, *duration_s, *amplitude_db, *shape, &mut rng);
                truth.interference.push(TruthSpan {
                    start_s: *start_s,
                    end_s: *start_s + *duration_s,
                });
                overlays.push((*start_s, burst));
            }
        }
    }
    builder.relax_until(script.duration_s);
    for (t0, burst) in overlays {
        builder.overlay(t0, &burst);
    }
    let waveform = builder.samples;

    let mut traces = Vec::with_capacity(script.aps.len());
    for ap in &script.aps {
        let gain = rng.gen_range(AP_GAIN_RANGE.0..=AP_GAIN_RANGE.1);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(rng.gen());
        let noise = Normal::new(0.0, ap.noise_sigma_db.max(f64::MIN_POSITIVE))
            .map_err(|e| Error::Validation(format!("noise sigma: {e}")))?;
        let samples: Vec<f64> = waveform
            .iter()
            .map(|&w| {
                let z = if ap.noise_sigma_db > 0.0 {
                    noise.sample(&mut noise_rng)
                } else {
                    0.0
                };
                (ap.baseline_rssi_dbm + gain * w + z).clamp(-119.9, -0.1)
            })
            .collect();
        traces.push(RssiTrace::new(&ap.id, rate, 0.0, samples)?);
    }
    Ok((TraceBundle::new(traces)?, truth))
}

fn validate_script(script: &ScenarioScript, templates: &TemplateSet) -> Result<()> {
    if script.sample_rate_hz <= 0.0 {
        return Err(Error::Validation("sample_rate_hz must be positive".into()));
    }
    if script.duration_s <= 0.0 {
        return Err(Error::Validation("duration_s must be positive".into()));
    }
    if script.aps.is_empty() {
        return Err(Error::Validation("scenario needs at least one AP".into()));
    }
    for ap in &script.aps {
        if !(-110.0..=-20.0).contains(&ap.baseline_rssi_dbm) {
            return Err(Error::Validation(format!(
                "AP {} baseline {} dBm outside [-110, -20]",
                ap.id, ap.baseline_rssi_dbm
            )));
        }
        if ap.noise_sigma_db < 0.0 {
            return Err(Error::Validation(format!(
                "AP {} has negative noise sigma",
                ap.id
            )));
        }
    }

    let mut spans: Vec<(f64, f64)> = Vec::with_capacity(script.events.len());
    for event in &script.events {
        let (start, duration) = match event {
            ScriptEvent::Preamble { start_s, updown_count, .. } => {
                if *updown_count == 0 {
                    return Err(Error::Validation("updown_count must be at least 1".into()));
                }
                (*start_s, preamble_duration(*updown_count))
            }
            ScriptEvent::Gesture {
                start_s,
                family,
                count,
                speed,
                ramp_s,
                rep_period_s,
                magnitude,
            } => {
                let template = templates.get(family).ok_or_else(|| {
                    Error::Validation(format!("unknown gesture family `{family}`"))
                })?;
                magnitude_fraction(*magnitude)?;
                let base_ramp = ramp_duration(*speed)?;
                let ramp = ramp_s.unwrap_or(base_ramp);
                if speed_from_duration(ramp) != *speed {
                    return Err(Error::Validation(format!(
                        "ramp_s {ramp} is outside the {speed:?} speed bucket"
                    )));
                }
                (
                    *start_s,
                    gesture_duration(&template.pattern, *count, ramp, *rep_period_s)?,
                )
            }
            ScriptEvent::Interference { start_s, duration_s, amplitude_db, .. } => {
                if *duration_s <= 0.0 || *amplitude_db < 0.0 {
                    return Err(Error::Validation(
                        "interference needs positive duration and non-negative amplitude".into(),
                    ));
                }
                (*start_s, *duration_s)
            }
        };
        if start < 0.0 || start + duration > script.duration_s + 1e-9 {
            return Err(Error::Validation(format!(
                "event at {start:.2} s (duration {duration:.2} s) does not fit in the scenario"
            )));
        }
        spans.push((start, start + duration));
    }
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 - 1e-9 {
            return Err(Error::Validation(format!(
                "events overlap: one ends at {:.2} s, the next starts at {:.2} s",
                pair[0].1, pair[1].0
            )));
        }
    }
    Ok(())
}

/// Regenerates a scenario across noise levels with a fixed seed stream, for
/// accuracy-versus-noise sweeps.
pub fn snr_sweep(
    script: &ScenarioScript,
    sigma_list: &[f64],
) -> Result<Vec<(f64, TraceBundle, GroundTruth)>> {
    let mut out = Vec::with_capacity(sigma_list.len());
    for &sigma in sigma_list {
        let mut variant = script.clone();
        for ap in &mut variant.aps {
            ap.noise_sigma_db = sigma;
        }
        let (bundle, truth) = generate_scenario(&variant)?;
        out.push((sigma, bundle, truth));
    }
    Ok(out)
}
