//! End-to-end pipeline: denoise per AP, gate on the strongest AP's
//! preamble, extract primitives per AP, fuse, match, map actions.
//!
//! The strongest AP drives segmentation; its calibration (drop depth,
//! polarity, motion level) applies to every AP for the session. After a
//! gesture window closes the session returns to preamble scanning, so one
//! trace can hold several preamble-gated gestures.

use thiserror::Error;

use crate::actions::{map_action, ActionEvent, RuleSet};
use crate::denoise::{denoise, DenoiseConfig};
use crate::error::Error as CoreError;
use crate::fusion::{fuse, ApDecision, ApPrimitives};
use crate::gestures::{classify_window, encode, match_gesture, GestureEvent, TemplateSet};
use crate::primitives::{extract_primitives, ExtractorConfig, PrimitiveEvent, PrimitiveKind};
use crate::segment::{
    detect_preamble_from, segment_gestures, GestureWindow, PreambleDetection, SegmenterConfig,
};
use crate::trace::{RssiTrace, TraceBundle};

/// Extraction slack kept around a window for plateau measurement.
const WINDOW_LEAD_S: f64 = 0.3;

/// Granularity at which per-AP decisions are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionGranularity {
    /// Associate and vote on individual primitives, then decode the fused
    /// stream (default).
    #[default]
    Primitive,
    /// Decode per AP and vote on (family, count) decisions.
    Gesture,
}

/// Full pipeline configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub denoise: DenoiseConfig,
    pub extractor: ExtractorConfig,
    pub segmenter: SegmenterConfig,
    pub templates: TemplateSet,
    pub rules: RuleSet,
    pub granularity: FusionGranularity,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            denoise: DenoiseConfig::default(),
            extractor: ExtractorConfig::default(),
            segmenter: SegmenterConfig::default(),
            templates: TemplateSet::default_families(),
            rules: RuleSet::default_media_player(),
            granularity: FusionGranularity::default(),
        }
    }
}

/// A pipeline failure attributed to its stage.
#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: &'static str,
    #[source]
    pub source: CoreError,
}

impl PipelineError {
    fn at(stage: &'static str) -> impl FnOnce(CoreError) -> PipelineError {
        move |source| PipelineError { stage, source }
    }
}

/// Intermediate artifacts captured for debugging and figure regeneration.
#[derive(Debug, Clone, Default)]
pub struct StageDump {
    /// Denoised trace per AP.
    pub denoised: Vec<RssiTrace>,
    /// Per-AP primitive streams of each gesture window.
    pub per_ap_primitives: Vec<Vec<(String, Vec<PrimitiveEvent>)>>,
    /// Fused primitive stream of each gesture window.
    pub fused_primitives: Vec<Vec<PrimitiveEvent>>,
    /// Encoded string of each gesture window.
    pub encoded: Vec<String>,
    /// Every detected preamble.
    pub preambles: Vec<PreambleDetection>,
}

/// Pipeline output for one trace bundle.
#[derive(Debug, Clone, Default)]
pub struct PipelineRun {
    pub windows: Vec<GestureWindow>,
    pub gestures: Vec<GestureEvent>,
    pub actions: Vec<ActionEvent>,
    /// Present when stage capture was requested.
    pub stages: Option<StageDump>,
}

/// Trims window-boundary pauses: every template starts and ends with an
/// edge, so boundary pauses are windowing artifacts.
fn trim_boundary_pauses(primitives: &mut Vec<PrimitiveEvent>) {
    while primitives.first().is_some_and(|p| p.kind == PrimitiveKind::Pause) {
        primitives.remove(0);
    }
    while primitives.last().is_some_and(|p| p.kind == PrimitiveKind::Pause) {
        primitives.pop();
    }
}

/// Runs the full pipeline over an aligned bundle.
pub fn run_pipeline(
    bundle: &TraceBundle,
    cfg: &PipelineConfig,
    capture_stages: bool,
) -> Result<PipelineRun, PipelineError> {
    if bundle.is_empty() {
        return Err(PipelineError::at("input")(CoreError::EmptyInput(
            "bundle holds no traces".into(),
        )));
    }

    let mut denoised = Vec::with_capacity(bundle.traces.len());
    for trace in &bundle.traces {
        denoised.push(denoise(trace, &cfg.denoise).map_err(PipelineError::at("denoise"))?);
    }
    let strongest = bundle.strongest_ap().expect("non-empty bundle");
    // Preamble scanning runs on the raw stream: stage one is the cheap
    // always-on path, and soft thresholding would bias the measured drop
    // depth. The denoised traces feed extraction and classification.
    let gate = &bundle.traces[strongest];

    let mut run = PipelineRun {
        stages: capture_stages.then(|| StageDump {
            denoised: denoised.clone(),
            ..Default::default()
        }),
        ..Default::default()
    };

    let mut cursor = gate.start_time_s;
    let end = gate.end_time_s();
    while cursor < end {
        let Some(found) = detect_preamble_from(gate, &cfg.segmenter, cursor) else {
            break;
        };
        if let Some(stages) = run.stages.as_mut() {
            stages.preambles.push(found.clone());
        }
        let windows = segment_gestures(
            gate,
            found.preamble_end_s,
            &found.calibration,
            &cfg.segmenter,
            &cfg.extractor,
        );
        let Some(window) = windows.into_iter().next() else {
            cursor = found.preamble_end_s + cfg.segmenter.silence_timeout_s;
            continue;
        };

        let gesture = match cfg.granularity {
            FusionGranularity::Primitive => {
                classify_window_fused(&denoised, bundle, &window, cfg, run.stages.as_mut())
            }
            FusionGranularity::Gesture => {
                classify_window_voted(&denoised, bundle, &window, cfg)
                    .map_err(PipelineError::at("fuse"))?
            }
        };
        if let Some(action) = map_action(&gesture, &cfg.rules) {
            run.actions.push(action);
        }
        cursor = window.end_s + cfg.segmenter.silence_timeout_s;
        run.gestures.push(gesture);
        run.windows.push(window);
    }
    Ok(run)
}

/// Primitive-level fusion: extract per AP, associate and vote per event,
/// decode the fused stream.
fn classify_window_fused(
    denoised: &[RssiTrace],
    bundle: &TraceBundle,
    window: &GestureWindow,
    cfg: &PipelineConfig,
    mut stages: Option<&mut StageDump>,
) -> GestureEvent {
    let mut streams = Vec::with_capacity(denoised.len());
    for (i, trace) in denoised.iter().enumerate() {
        let region = trace.slice_time(
            window.start_s - WINDOW_LEAD_S,
            (window.end_s + WINDOW_LEAD_S).min(trace.end_time_s()),
        );
        let events = extract_primitives(&region, &cfg.extractor, Some(&window.calibration));
        streams.push(ApPrimitives {
            ap_id: trace.ap_id.clone(),
            mean_rssi_dbm: bundle.mean_rssi_dbm[i],
            events,
        });
    }
    if let Some(stages) = stages.as_mut() {
        stages
            .per_ap_primitives
            .push(streams.iter().map(|s| (s.ap_id.clone(), s.events.clone())).collect());
    }
    let mut fused = crate::fusion::fuse_primitive_streams(&streams);
    trim_boundary_pauses(&mut fused);
    let encoded = encode(&fused, window.calibration.polarity_flipped);
    if let Some(stages) = stages {
        stages.fused_primitives.push(fused.clone());
        stages.encoded.push(encoded.clone());
    }
    match_gesture(&encoded, &fused, &cfg.templates)
}

/// Gesture-level fusion: decode per AP, then vote on (family, count).
fn classify_window_voted(
    denoised: &[RssiTrace],
    bundle: &TraceBundle,
    window: &GestureWindow,
    cfg: &PipelineConfig,
) -> Result<GestureEvent, CoreError> {
    let per_ap: Vec<GestureEvent> = denoised
        .iter()
        .map(|trace| classify_window(trace, window, &cfg.templates, &cfg.extractor))
        .collect();
    let votes: Vec<ApDecision<(String, u32)>> = per_ap
        .iter()
        .enumerate()
        .map(|(i, g)| ApDecision {
            ap_id: denoised[i].ap_id.clone(),
            mean_rssi_dbm: bundle.mean_rssi_dbm[i],
            decision: (g.family_name.clone(), g.count),
            span: (g.start_s, g.end_s),
        })
        .collect();
    let winner = fuse(&votes)?;
    let representative = per_ap
        .iter()
        .enumerate()
        .filter(|(_, g)| (g.family_name.clone(), g.count) == winner)
        .max_by(|(a, _), (b, _)| bundle.mean_rssi_dbm[*a].total_cmp(&bundle.mean_rssi_dbm[*b]))
        .map(|(_, g)| g.clone())
        .expect("winning camp has a member");
    Ok(representative)
}
