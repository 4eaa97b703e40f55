//! Preamble detection, per-session calibration, and gesture-window
//! segmentation.
//!
//! Recognition is gated by a reserved preamble: a drop in signal strength
//! (hand held over the device) followed by repeated up-down motions. The
//! scanner runs two stages. Stage one is a constant-time-per-sample
//! threshold test comparing a short window mean against the trailing
//! baseline, so an idle receiver does almost no work. Stage two, armed only
//! after a stage-one hit, looks for the up-down peak train — alternating
//! prominent extrema in the detail coefficients — within a bounded budget
//! after the drop.
//!
//! The detected preamble calibrates the session: the measured drop depth
//! anchors magnitude discretization, the peak-train level records the
//! motion scale, and the direction of the first state decides whether edge
//! polarity must be flipped for the rest of the session.

use std::collections::VecDeque;

use crate::denoise::estimate_noise_sigma;
use crate::peaks::{significant_extrema, ExtremumSign};
use crate::primitives::{detect_edges, ExtractorConfig};
use crate::trace::RssiTrace;
use crate::wavelet::sliding_detail;

/// Trailing window that defines the pre-drop baseline, seconds.
pub const BASELINE_WINDOW_S: f64 = 2.0;

/// Guard gap between the baseline window and the drop window, so the drop
/// ramp itself does not drag the baseline down.
pub const BASELINE_GAP_S: f64 = 0.5;

/// How long after a stage-one hit the peak train may take, seconds.
pub const PEAK_SEARCH_BUDGET_S: f64 = 4.0;

/// Margin appended after the peak-search budget before gesture scanning.
pub const PREAMBLE_END_MARGIN_S: f64 = 0.3;

/// Detail levels searched for the preamble peak train.
const PEAK_TRAIN_LEVELS: std::ops::RangeInclusive<usize> = 2..=6;

/// Session parameters extracted from a detected preamble.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationProfile {
    /// Measured depth of the preamble drop, dB. Anchors the magnitude
    /// threshold for the session.
    pub preamble_drop_db: f64,
    /// Detail level carrying the preamble's up-down peak train.
    pub motion_level: usize,
    /// True when the first preamble state rose instead of dropped; all
    /// downstream edge labels for the session are inverted.
    pub polarity_flipped: bool,
    /// Trailing baseline right before the preamble, dBm.
    pub baseline_rssi_dbm: f64,
}

/// A time window holding one gesture, carrying the session calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureWindow {
    pub start_s: f64,
    pub end_s: f64,
    pub calibration: CalibrationProfile,
}

/// Segmenter parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmenterConfig {
    /// Stage-one trigger: short-window mean deviating this far from the
    /// trailing baseline, dB.
    pub drop_threshold_db: f64,
    /// Up-down repetitions required in the preamble; each contributes two
    /// alternating peaks.
    pub preamble_updown_count: usize,
    /// Silence that terminates gesture recognition, seconds.
    pub silence_timeout_s: f64,
    /// Length of the stage-one short window, seconds.
    pub drop_window_s: f64,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            drop_threshold_db: 5.0,
            preamble_updown_count: 2,
            silence_timeout_s: 2.0,
            drop_window_s: 0.5,
        }
    }
}

/// Direction of the first preamble state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateDirection {
    Drop,
    Rise,
}

/// Whether downstream primitive labels must be inverted for the session.
/// The first state is expected to be a drop; a rise means the channel
/// inverted the signal.
pub fn resolve_polarity(first_state_direction: StateDirection) -> bool {
    first_state_direction == StateDirection::Rise
}

/// A detected preamble and the calibration it yields.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleDetection {
    /// Stage-one trigger time, seconds.
    pub trigger_s: f64,
    /// Time after which gesture scanning may begin.
    pub preamble_end_s: f64,
    pub calibration: CalibrationProfile,
}

enum ScanState {
    Scanning,
    Armed {
        trigger_idx: usize,
        direction: StateDirection,
        baseline0: f64,
        peak_deviation: f64,
    },
}

/// Streaming preamble scanner.
///
/// Feed samples one at a time; stage-one costs O(1) per sample via running
/// window sums, and only a bounded history (at most 10 s) is retained for
/// stage two.
pub struct PreambleScanner {
    cfg: SegmenterConfig,
    sample_rate_hz: f64,
    start_time_s: f64,
    baseline_w: usize,
    gap_w: usize,
    drop_w: usize,
    budget_w: usize,
    pre_w: usize,
    history_cap: usize,
    history: VecDeque<f64>,
    history_start_idx: usize,
    pushed: usize,
    baseline_sum: f64,
    drop_sum: f64,
    state: ScanState,
    /// After a detection or a failed stage two, stage one stays quiet until
    /// the deviation releases below half the threshold.
    suppressed: bool,
}

impl PreambleScanner {
    pub fn new(cfg: SegmenterConfig, sample_rate_hz: f64, start_time_s: f64) -> Self {
        let baseline_w = ((BASELINE_WINDOW_S * sample_rate_hz).round() as usize).max(2);
        let gap_w = (BASELINE_GAP_S * sample_rate_hz).round() as usize;
        let drop_w = ((cfg.drop_window_s * sample_rate_hz).round() as usize).max(1);
        let budget_w = (PEAK_SEARCH_BUDGET_S * sample_rate_hz).round() as usize;
        let pre_w = sample_rate_hz.round() as usize;
        let history_cap = (10.0 * sample_rate_hz).round() as usize;
        Self {
            cfg,
            sample_rate_hz,
            start_time_s,
            baseline_w,
            gap_w,
            drop_w,
            budget_w,
            pre_w,
            history_cap,
            history: VecDeque::with_capacity(history_cap + 1),
            history_start_idx: 0,
            pushed: 0,
            baseline_sum: 0.0,
            drop_sum: 0.0,
            state: ScanState::Scanning,
            suppressed: false,
        }
    }

    fn time_of(&self, idx: usize) -> f64 {
        self.start_time_s + idx as f64 / self.sample_rate_hz
    }

    fn sample_at(&self, idx: usize) -> f64 {
        self.history[idx - self.history_start_idx]
    }

    /// Pushes one sample, returning a detection when a full preamble has
    /// been confirmed.
    pub fn push(&mut self, value: f64) -> Option<PreambleDetection> {
        let idx = self.pushed;
        self.history.push_back(value);
        self.pushed += 1;
        if self.history.len() > self.history_cap {
            self.history.pop_front();
            self.history_start_idx += 1;
        }

        // Maintain the rolling windows: the drop window covers the latest
        // drop_w samples; the baseline sits baseline_w long, a guard gap
        // before it.
        self.drop_sum += value;
        if idx >= self.drop_w {
            self.drop_sum -= self.sample_at(idx - self.drop_w);
        }
        if idx >= self.drop_w + self.gap_w {
            self.baseline_sum += self.sample_at(idx - self.drop_w - self.gap_w);
        }
        if idx >= self.drop_w + self.gap_w + self.baseline_w {
            self.baseline_sum -=
                self.sample_at(idx - self.drop_w - self.gap_w - self.baseline_w);
        }
        if self.pushed < self.drop_w + self.gap_w + self.baseline_w {
            return None;
        }

        let baseline = self.baseline_sum / self.baseline_w as f64;
        let drop_mean = self.drop_sum / self.drop_w as f64;
        let delta = baseline - drop_mean; // positive on a drop

        match &mut self.state {
            ScanState::Scanning => {
                if self.suppressed {
                    if delta.abs() < self.cfg.drop_threshold_db / 2.0 {
                        self.suppressed = false;
                    }
                    return None;
                }
                if delta.abs() >= self.cfg.drop_threshold_db {
                    self.state = ScanState::Armed {
                        trigger_idx: idx,
                        direction: if delta > 0.0 {
                            StateDirection::Drop
                        } else {
                            StateDirection::Rise
                        },
                        baseline0: baseline,
                        peak_deviation: delta.abs(),
                    };
                }
                None
            }
            ScanState::Armed {
                trigger_idx,
                direction,
                baseline0,
                peak_deviation,
            } => {
                let dev = match direction {
                    StateDirection::Drop => *baseline0 - drop_mean,
                    StateDirection::Rise => drop_mean - *baseline0,
                };
                *peak_deviation = peak_deviation.max(dev);
                if idx - *trigger_idx < self.budget_w {
                    return None;
                }
                let trigger_idx = *trigger_idx;
                let direction = *direction;
                let baseline0 = *baseline0;
                let peak_deviation = *peak_deviation;
                self.state = ScanState::Scanning;
                self.suppressed = true;
                self.confirm_peak_train(trigger_idx, idx, direction, baseline0, peak_deviation)
            }
        }
    }

    /// Stage two: find the alternating peak train in the detail
    /// coefficients of the armed chunk.
    fn confirm_peak_train(
        &self,
        trigger_idx: usize,
        now_idx: usize,
        direction: StateDirection,
        baseline0: f64,
        peak_deviation: f64,
    ) -> Option<PreambleDetection> {
        let chunk_start = trigger_idx
            .saturating_sub(self.pre_w)
            .max(self.history_start_idx);
        let chunk: Vec<f64> = (chunk_start..=now_idx).map(|i| self.sample_at(i)).collect();
        let needed = 2 * self.cfg.preamble_updown_count;
        let supported = (chunk.len() as f64).log2().floor() as usize;

        let mut best: Option<(usize, f64, usize, usize)> = None; // run, prom, level, last coeff
        for level in PEAK_TRAIN_LEVELS {
            if level > supported {
                break;
            }
            let block = 1usize << level;
            let beta = sliding_detail(&chunk, level, (block / 4).max(1));
            let sigma = estimate_noise_sigma(&beta).unwrap_or(0.0);
            let scale = (block as f64).sqrt();
            // Permissive amplitude floor: denoising shrinks the fast
            // up-down swings, and the alternation requirement is the real
            // false-positive gate.
            let floor_db = (0.25 * self.cfg.drop_threshold_db).max(1.0);
            let prominence = (2.0 * sigma).max(floor_db * scale / 2.0);
            let extrema = significant_extrema(&beta, prominence);

            // Collapse consecutive same-sign extrema (keeping the most
            // prominent of each group); the collapsed sequence alternates
            // by construction, and its length is the peak-train size.
            let mut collapsed: Vec<(ExtremumSign, f64, usize)> = Vec::new();
            for e in &extrema {
                match collapsed.last_mut() {
                    Some((sign, prom, idx)) if *sign == e.sign => {
                        if e.prominence > *prom {
                            *prom = e.prominence;
                            *idx = e.index;
                        }
                    }
                    _ => collapsed.push((e.sign, e.prominence, e.index)),
                }
            }
            if let Some(&(_, _, last)) = collapsed.last() {
                let run = collapsed.len();
                let prom: f64 = collapsed.iter().map(|(_, p, _)| p).sum();
                if best.map_or(true, |(r, p, _, _)| run > r || (run == r && prom > p)) {
                    best = Some((run, prom, level, last));
                }
            }
        }

        let (run, _, level, _) = best?;
        if run < needed {
            return None;
        }
        // Gesture scanning starts once the whole search budget has elapsed;
        // the preamble's own recovery motion falls inside it.
        let preamble_end_s = self.time_of(now_idx) + PREAMBLE_END_MARGIN_S;
        Some(PreambleDetection {
            trigger_s: self.time_of(trigger_idx),
            preamble_end_s,
            calibration: CalibrationProfile {
                preamble_drop_db: peak_deviation,
                motion_level: level,
                polarity_flipped: resolve_polarity(direction),
                baseline_rssi_dbm: baseline0,
            },
        })
    }
}

/// Scans a whole trace for the first preamble at or after `from_s`.
pub fn detect_preamble_from(
    trace: &RssiTrace,
    cfg: &SegmenterConfig,
    from_s: f64,
) -> Option<PreambleDetection> {
    let start_i = if from_s <= trace.start_time_s {
        0
    } else {
        trace.index_of(from_s)
    };
    let mut scanner = PreambleScanner::new(cfg.clone(), trace.sample_rate_hz, trace.time_of(start_i));
    for &x in &trace.samples[start_i..] {
        if let Some(found) = scanner.push(x) {
            return Some(found);
        }
    }
    None
}

/// Scans a whole trace for its first preamble.
pub fn detect_preamble(trace: &RssiTrace, cfg: &SegmenterConfig) -> Option<PreambleDetection> {
    detect_preamble_from(trace, cfg, trace.start_time_s)
}

/// Determines the gesture window that follows a detected preamble.
///
/// A window opens at the first edge activity after the preamble and closes
/// once no edge activity occurs for the silence timeout; the session then
/// returns to preamble scanning, so at most one window is produced per
/// preamble. No activity within the timeout yields no window.
pub fn segment_gestures(
    trace: &RssiTrace,
    preamble_end_s: f64,
    calibration: &CalibrationProfile,
    cfg: &SegmenterConfig,
    extractor: &ExtractorConfig,
) -> Vec<GestureWindow> {
    if preamble_end_s >= trace.end_time_s() {
        return Vec::new();
    }
    let region = trace.slice_time(preamble_end_s, trace.end_time_s());
    let edges = detect_edges(&region, extractor);
    let Some(first) = edges.first() else {
        return Vec::new();
    };
    if first.start_s > preamble_end_s + cfg.silence_timeout_s {
        return Vec::new();
    }
    let mut end = first.end_s;
    for e in &edges[1..] {
        if e.start_s - end <= cfg.silence_timeout_s {
            end = end.max(e.end_s);
        } else {
            break;
        }
    }
    vec![GestureWindow {
        start_s: first.start_s,
        end_s: end,
        calibration: calibration.clone(),
    }]
}
