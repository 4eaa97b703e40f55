//! Gesture identification: encode a primitive sequence as a sign string,
//! match it against family templates, and extract count and frequency.
//!
//! Rising edges map to `+`, falling edges to `-`, pauses to `0`. A template
//! matches when its pattern, repeated some whole number of times, equals the
//! encoded string exactly; repetition above one is reserved for templates
//! marked repeatable. Strings no template tiles fall into the `unknown`
//! reject class.

use std::path::Path;

use crate::error::{Error, Result};
use crate::primitives::{
    extract_primitives, ExtractorConfig, MagnitudeClass, PrimitiveEvent, PrimitiveKind, SpeedClass,
};
use crate::segment::GestureWindow;
use crate::trace::RssiTrace;

/// Family name assigned when no template matches.
pub const UNKNOWN_FAMILY: &str = "unknown";

/// Context kept around a window when classifying, seconds. Plateau
/// measurement needs a little slack on both sides.
const WINDOW_LEAD_S: f64 = 0.3;

/// One gesture-family template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GestureTemplate {
    pub family_name: String,
    /// Pattern over the alphabet `{+, -, 0}`.
    pub pattern: String,
    /// Whether consecutive repetitions form counts above one.
    pub repeatable: bool,
}

/// A validated set of templates: non-empty patterns, no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: Vec<GestureTemplate>,
}

impl TemplateSet {
    pub fn new(templates: Vec<GestureTemplate>) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::Validation("template set is empty".into()));
        }
        for t in &templates {
            if t.family_name.is_empty() {
                return Err(Error::Validation("template with empty family name".into()));
            }
            if t.pattern.is_empty() {
                return Err(Error::Validation(format!(
                    "template {} has an empty pattern",
                    t.family_name
                )));
            }
            if let Some(c) = t.pattern.chars().find(|c| !matches!(c, '+' | '-' | '0')) {
                return Err(Error::Validation(format!(
                    "template {} contains `{c}`; patterns use only + - 0",
                    t.family_name
                )));
            }
        }
        for (i, a) in templates.iter().enumerate() {
            for b in &templates[i + 1..] {
                if a.pattern == b.pattern {
                    return Err(Error::Validation(format!(
                        "templates {} and {} share the pattern {}",
                        a.family_name, b.family_name, a.pattern
                    )));
                }
                if a.family_name == b.family_name {
                    return Err(Error::Validation(format!(
                        "duplicate family name {}",
                        a.family_name
                    )));
                }
            }
        }
        Ok(Self { templates })
    }

    /// The seven stock families.
    ///
    /// The infinity pattern is a provisional repo default: it must both
    /// reflect the gesture's sweep-back-and-forth signature and stay
    /// decodable next to the repeatable down-up family, which rules out a
    /// plain double alternation.
    pub fn default_families() -> Self {
        let t = |family: &str, pattern: &str, repeatable: bool| GestureTemplate {
            family_name: family.into(),
            pattern: pattern.into(),
            repeatable,
        };
        Self::new(vec![
            t("up", "+", false),
            t("down", "-", false),
            t("up-down", "+-", true),
            t("down-up", "-+", true),
            t("up-pause-down", "+0-", false),
            t("down-pause-up", "-0+", false),
            t("infinity", "-+-", true),
        ])
        .expect("stock templates are valid")
    }

    pub fn iter(&self) -> impl Iterator<Item = &GestureTemplate> {
        self.templates.iter()
    }

    pub fn get(&self, family: &str) -> Option<&GestureTemplate> {
        self.templates.iter().find(|t| t.family_name == family)
    }

    /// Parses the template file format: `family_name,pattern,repeatable`
    /// per line, `#` comments.
    pub fn parse(text: &str) -> Result<Self> {
        let mut templates = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: "expected `family_name,pattern,repeatable`".into(),
                });
            }
            let repeatable = match fields[2] {
                "true" => true,
                "false" => false,
                other => {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: format!("repeatable must be true or false, got `{other}`"),
                    })
                }
            };
            templates.push(GestureTemplate {
                family_name: fields[0].to_string(),
                pattern: fields[1].to_string(),
                repeatable,
            });
        }
        Self::new(templates)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Renders the set back into the file format.
    pub fn render(&self) -> String {
        let mut out = String::from("# family_name,pattern,repeatable\n");
        for t in &self.templates {
            out.push_str(&format!("{},{},{}\n", t.family_name, t.pattern, t.repeatable));
        }
        out
    }
}

/// A matched gesture with its attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureEvent {
    /// Matched family, or [`UNKNOWN_FAMILY`].
    pub family_name: String,
    /// Number of template repetitions; 1 for unmatched strings.
    pub count: u32,
    /// Repetitions per second, from repetition start spacing; 0 below two
    /// repetitions.
    pub frequency_hz: f64,
    pub start_s: f64,
    pub end_s: f64,
    /// The encoded string the match was made on.
    pub primitive_string: String,
    /// Dominant speed class of the gesture's edges.
    pub speed: SpeedClass,
    /// Dominant magnitude class of the gesture's edges.
    pub magnitude: MagnitudeClass,
}

impl GestureEvent {
    pub fn is_known(&self) -> bool {
        self.family_name != UNKNOWN_FAMILY
    }
}

/// Encodes primitives in time order; `flip` swaps `+` and `-`.
pub fn encode(primitives: &[PrimitiveEvent], flip: bool) -> String {
    primitives
        .iter()
        .map(|p| if flip { p.kind.flipped() } else { p.kind }.symbol())
        .collect()
}

/// Dominant non-pause attribute values: modal class, earliest-first on ties.
fn dominant_speed(primitives: &[PrimitiveEvent]) -> SpeedClass {
    let mut counts: Vec<(SpeedClass, usize)> = Vec::new();
    for p in primitives {
        if p.kind == PrimitiveKind::Pause {
            continue;
        }
        match counts.iter_mut().find(|(s, _)| *s == p.speed) {
            Some((_, c)) => *c += 1,
            None => counts.push((p.speed, 1)),
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(_, c)| c)
        .map_or(SpeedClass::Na, |(s, _)| s)
}

fn dominant_magnitude(primitives: &[PrimitiveEvent]) -> MagnitudeClass {
    let mut counts: Vec<(MagnitudeClass, usize)> = Vec::new();
    for p in primitives {
        if p.kind == PrimitiveKind::Pause {
            continue;
        }
        match counts.iter_mut().find(|(m, _)| *m == p.magnitude) {
            Some((_, c)) => *c += 1,
            None => counts.push((p.magnitude, 1)),
        }
    }
    counts
        .into_iter()
        .max_by_key(|&(_, c)| c)
        .map_or(MagnitudeClass::Na, |(m, _)| m)
}

/// Matches an encoded string against the template set.
///
/// Every candidate must tile the whole string exactly; counts above one are
/// only open to repeatable templates. When several templates decode the
/// string, the larger count wins, then the longer pattern, then the
/// lexicographically smaller family name. `primitives` supplies the
/// timestamps for the span and frequency attributes.
pub fn match_gesture(
    encoded: &str,
    primitives: &[PrimitiveEvent],
    templates: &TemplateSet,
) -> GestureEvent {
    let bytes = encoded.as_bytes();
    let mut best: Option<(&GestureTemplate, u32)> = None;
    for t in templates.iter() {
        let plen = t.pattern.len();
        if bytes.is_empty() || bytes.len() % plen != 0 {
            continue;
        }
        let count = (bytes.len() / plen) as u32;
        if count > 1 && !t.repeatable {
            continue;
        }
        if !bytes.chunks(plen).all(|chunk| chunk == t.pattern.as_bytes()) {
            continue;
        }
        let better = match best {
            None => true,
            Some((bt, bc)) => {
                count > bc
                    || (count == bc && plen > bt.pattern.len())
                    || (count == bc
                        && plen == bt.pattern.len()
                        && t.family_name < bt.family_name)
            }
        };
        if better {
            best = Some((t, count));
        }
    }

    let (start_s, end_s) = match (primitives.first(), primitives.last()) {
        (Some(a), Some(b)) => (a.start_s, b.end_s),
        _ => (0.0, 0.0),
    };
    let speed = dominant_speed(primitives);
    let magnitude = dominant_magnitude(primitives);

    match best {
        Some((t, count)) => {
            let plen = t.pattern.len();
            let frequency_hz = if count >= 2 && primitives.len() == bytes.len() {
                let first = primitives[0].start_s;
                let last = primitives[(count as usize - 1) * plen].start_s;
                if last > first {
                    (count as f64 - 1.0) / (last - first)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            GestureEvent {
                family_name: t.family_name.clone(),
                count,
                frequency_hz,
                start_s,
                end_s,
                primitive_string: encoded.to_string(),
                speed,
                magnitude,
            }
        }
        None => GestureEvent {
            family_name: UNKNOWN_FAMILY.into(),
            count: 1,
            frequency_hz: 0.0,
            start_s,
            end_s,
            primitive_string: encoded.to_string(),
            speed,
            magnitude,
        },
    }
}

/// Classifies the gesture inside a segmented window of a denoised trace:
/// extract primitives, encode with the session polarity, match.
///
/// Pauses touching the window boundary are windowing artifacts (every
/// template begins and ends with an edge) and are trimmed before encoding.
pub fn classify_window(
    trace: &RssiTrace,
    window: &GestureWindow,
    templates: &TemplateSet,
    extractor: &ExtractorConfig,
) -> GestureEvent {
    let region = trace.slice_time(
        window.start_s - WINDOW_LEAD_S,
        (window.end_s + WINDOW_LEAD_S).min(trace.end_time_s()),
    );
    let mut primitives = extract_primitives(&region, extractor, Some(&window.calibration));
    while primitives.first().is_some_and(|p| p.kind == PrimitiveKind::Pause) {
        primitives.remove(0);
    }
    while primitives.last().is_some_and(|p| p.kind == PrimitiveKind::Pause) {
        primitives.pop();
    }
    let encoded = encode(&primitives, window.calibration.polarity_flipped);
    match_gesture(&encoded, &primitives, templates)
}
