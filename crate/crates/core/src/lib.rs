//! RSSI hand-gesture sensing library.
//!
//! Processing flow:
//!
//! ```text
//! RSSI traces (per AP)
//!   -> wavelet denoising (Haar DWT + SURE soft thresholding)
//!   -> preamble gate (drop + up-down peak train, per-session calibration)
//!   -> primitive extraction (rising / falling / pause, speed + magnitude)
//!   -> multi-AP majority fusion
//!   -> template matching (family, count, frequency)
//!   -> application action mapping
//! ```
//!
//! A deterministic scenario simulator generates labeled multi-AP traces and
//! backs the evaluation harness.

pub mod actions;
pub mod denoise;
pub mod error;
pub mod fusion;
pub mod gestures;
mod peaks;
pub mod primitives;
pub mod pipeline;
pub mod segment;
pub mod sim;
pub mod trace;
pub mod wavelet;

#[cfg(test)]
pub(crate) mod testutil;

pub use actions::{map_action, ActionEvent, ActionRule, AttributeSet, CountPredicate, RuleSet};
pub use denoise::{
    denoise, estimate_noise_sigma, soft_threshold, sure_threshold, DenoiseConfig, SigmaEstimator,
    ThresholdRule,
};
pub use error::{Error, Result};
pub use fusion::{fuse, fuse_primitive_streams, ApDecision, ApPrimitives};
pub use gestures::{
    classify_window, encode, match_gesture, GestureEvent, GestureTemplate, TemplateSet,
    UNKNOWN_FAMILY,
};
pub use primitives::{
    detect_edges, detect_pauses, extract_primitives, select_analysis_level, speed_from_duration,
    AnalysisLevel, ExtractorConfig, MagnitudeClass, PrimitiveEvent, PrimitiveKind, Scalogram,
    SpeedClass,
};
pub use pipeline::{run_pipeline, FusionGranularity, PipelineConfig, PipelineError, PipelineRun, StageDump};
pub use segment::{
    detect_preamble, detect_preamble_from, resolve_polarity, segment_gestures, CalibrationProfile,
    GestureWindow, PreambleDetection, PreambleScanner, SegmenterConfig, StateDirection,
};
pub use sim::{
    generate_scenario, generate_scenario_with, snr_sweep, synth_gesture_waveform, ApSpec,
    BurstShape, GroundTruth, ScenarioScript, ScriptEvent, TruthGesture, TruthPrimitive, TruthSpan,
};
pub use trace::{load_trace, parse_trace_csv, save_trace, RssiTrace, TraceBundle};
pub use wavelet::{dwt_decompose, dwt_reconstruct, WaveletDecomposition};
