//! Multi-receiver decision fusion.
//!
//! Each overheard AP contributes a decision; a plurality vote picks the
//! winner, with ties broken by the decision held by the AP with the
//! strongest mean signal. Event-level fusion first associates events across
//! APs by span overlap, then votes inside each association group; events no
//! other AP saw pass through as single-AP detections.

use crate::error::{Error, Result};
use crate::primitives::{span_overlap_frac, PrimitiveEvent};

/// Spans overlapping by at least this fraction of the shorter span are
/// treated as observations of the same event.
pub const ASSOCIATION_OVERLAP: f64 = 0.5;

/// One AP's decision over a time span.
#[derive(Debug, Clone, PartialEq)]
pub struct ApDecision<D> {
    pub ap_id: String,
    pub mean_rssi_dbm: f64,
    pub decision: D,
    /// Time span the decision covers.
    pub span: (f64, f64),
}

/// Fuses per-AP decisions by plurality vote.
///
/// Ties go to the decision of the strongest AP among the tied camps; a
/// residual tie on signal strength falls back to decision order, keeping
/// the result independent of input order.
pub fn fuse<D: Clone + Ord>(decisions: &[ApDecision<D>]) -> Result<D> {
    if decisions.is_empty() {
        return Err(Error::Domain("cannot fuse an empty decision list".into()));
    }
    let mut camps: Vec<(&D, usize, f64)> = Vec::new(); // decision, votes, strongest rssi
    for d in decisions {
        if !d.mean_rssi_dbm.is_finite() {
            return Err(Error::Domain(format!(
                "AP {} has non-finite mean RSSI",
                d.ap_id
            )));
        }
        match camps.iter_mut().find(|(v, _, _)| **v == d.decision) {
            Some((_, count, rssi)) => {
                *count += 1;
                *rssi = rssi.max(d.mean_rssi_dbm);
            }
            None => camps.push((&d.decision, 1, d.mean_rssi_dbm)),
        }
    }
    let winner = camps
        .into_iter()
        .max_by(|a, b| {
            a.1.cmp(&b.1)
                .then(a.2.total_cmp(&b.2))
                .then_with(|| b.0.cmp(a.0)) // ascending decision order wins
        })
        .expect("non-empty camps");
    Ok(winner.0.clone())
}

/// Per-AP primitive stream with its identity and mean signal strength.
#[derive(Debug, Clone)]
pub struct ApPrimitives {
    pub ap_id: String,
    pub mean_rssi_dbm: f64,
    pub events: Vec<PrimitiveEvent>,
}

/// Fuses per-AP primitive streams into one event sequence.
///
/// Events are associated across APs when spans overlap by at least
/// [`ASSOCIATION_OVERLAP`]; each group votes on the primitive kind and the
/// winning camp's strongest-AP member represents the group. Unassociated
/// events pass through unchanged.
pub fn fuse_primitive_streams(streams: &[ApPrimitives]) -> Vec<PrimitiveEvent> {
    struct Member {
        ap: usize,
        event: PrimitiveEvent,
    }
    struct Group {
        span: (f64, f64),
        members: Vec<Member>,
    }

    let mut all: Vec<Member> = Vec::new();
    for (ap, s) in streams.iter().enumerate() {
        for e in &s.events {
            all.push(Member { ap, event: e.clone() });
        }
    }
    all.sort_by(|a, b| {
        a.event
            .start_s
            .total_cmp(&b.event.start_s)
            .then(a.event.end_s.total_cmp(&b.event.end_s))
            .then(a.ap.cmp(&b.ap))
    });

    let mut groups: Vec<Group> = Vec::new();
    'events: for m in all {
        for g in groups.iter_mut() {
            let already_voted = g.members.iter().any(|o| o.ap == m.ap);
            if !already_voted && span_overlap_frac(g.span, m.event.span()) >= ASSOCIATION_OVERLAP {
                g.members.push(m);
                continue 'events;
            }
        }
        groups.push(Group { span: m.event.span(), members: vec![m] });
    }

    // A lone-AP event whose span collides with a group several APs agree
    // on is an outvoted competitor, not an independent detection.
    let multi_spans: Vec<(f64, f64)> = groups
        .iter()
        .filter(|g| g.members.len() > 1)
        .map(|g| g.span)
        .collect();
    groups.retain(|g| {
        g.members.len() > 1
            || !multi_spans
                .iter()
                .any(|&s| span_overlap_frac(s, g.span) >= 0.3)
    });

    let mut fused = Vec::with_capacity(groups.len());
    for g in groups {
        let votes: Vec<ApDecision<crate::primitives::PrimitiveKind>> = g
            .members
            .iter()
            .map(|m| ApDecision {
                ap_id: streams[m.ap].ap_id.clone(),
                mean_rssi_dbm: streams[m.ap].mean_rssi_dbm,
                decision: m.event.kind,
                span: m.event.span(),
            })
            .collect();
        let winner = fuse(&votes).expect("groups are non-empty");
        let representative = g
            .members
            .iter()
            .filter(|m| m.event.kind == winner)
            .max_by(|a, b| streams[a.ap].mean_rssi_dbm.total_cmp(&streams[b.ap].mean_rssi_dbm))
            .expect("winning camp has a member");
        fused.push(representative.event.clone());
    }
    fused.sort_by(|a, b| a.start_s.total_cmp(&b.start_s).then(a.end_s.total_cmp(&b.end_s)));
    fused
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{MagnitudeClass, PrimitiveKind, SpeedClass};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn vote(ap: &str, rssi: f64, decision: PrimitiveKind) -> ApDecision<PrimitiveKind> {
        ApDecision { ap_id: ap.into(), mean_rssi_dbm: rssi, decision, span: (0.0, 1.0) }
    }

    #[test]
    fn strict_majority_wins() {
        use PrimitiveKind::*;
        let votes = [vote("a", -50.0, RisingEdge), vote("b", -60.0, RisingEdge), vote("c", -40.0, FallingEdge)];
        assert_eq!(fuse(&votes).unwrap(), RisingEdge);
    }

    #[test]
    fn tie_goes_to_strongest_ap() {
        use PrimitiveKind::*;
        let votes = [vote("a", -40.0, RisingEdge), vote("b", -70.0, FallingEdge)];
        assert_eq!(fuse(&votes).unwrap(), RisingEdge);
        let votes = [vote("a", -70.0, RisingEdge), vote("b", -40.0, FallingEdge)];
        assert_eq!(fuse(&votes).unwrap(), FallingEdge);
    }

    #[test]
    fn single_ap_passes_through() {
        use PrimitiveKind::*;
        assert_eq!(fuse(&[vote("a", -50.0, Pause)]).unwrap(), Pause);
    }

    #[test]
    fn empty_input_is_a_domain_error() {
        assert!(matches!(
            fuse::<PrimitiveKind>(&[]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn permutation_invariance_and_monotonicity() {
        use PrimitiveKind::*;
        let kinds = [RisingEdge, FallingEdge, Pause];
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..2000 {
            let n = rng.gen_range(1..=7);
            let mut votes: Vec<ApDecision<PrimitiveKind>> = (0..n)
                .map(|i| {
                    vote(
                        &format!("ap{i}"),
                        rng.gen_range(-90.0..-30.0),
                        kinds[rng.gen_range(0..3)],
                    )
                })
                .collect();
            let winner = fuse(&votes).unwrap();

            votes.shuffle(&mut rng);
            assert_eq!(fuse(&votes).unwrap(), winner, "order changed the winner");

            votes.push(vote("extra", rng.gen_range(-90.0..-30.0), winner));
            assert_eq!(fuse(&votes).unwrap(), winner, "extra vote flipped the winner");
        }
    }

    #[test]
    fn monte_carlo_matches_closed_form_majority_gain() {
        // Three voters, each independently correct with p = 0.875; the
        // closed-form majority accuracy is 3p^2 - 2p^3 = 0.957.
        use PrimitiveKind::*;
        let p = 0.875;
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        let trials = 10_000;
        let mut correct = 0;
        for _ in 0..trials {
            let votes: Vec<ApDecision<PrimitiveKind>> = (0..3)
                .map(|i| {
                    let ok = rng.gen_bool(p);
                    let decision = if ok {
                        RisingEdge
                    } else if rng.gen_bool(0.5) {
                        FallingEdge
                    } else {
                        Pause
                    };
                    vote(&format!("ap{i}"), rng.gen_range(-90.0..-30.0), decision)
                })
                .collect();
            if fuse(&votes).unwrap() == RisingEdge {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / trials as f64;
        let analytic = 3.0 * p * p - 2.0 * p * p * p;
        assert!(
            (accuracy - analytic).abs() <= 0.02,
            "accuracy {accuracy} vs analytic {analytic}"
        );
    }

    #[test]
    fn odd_panels_beat_single_receivers() {
        use PrimitiveKind::*;
        let p = 0.8;
        for n in [3usize, 5, 7] {
            let mut rng = ChaCha8Rng::seed_from_u64(79 + n as u64);
            let trials = 4000;
            let mut correct = 0;
            for _ in 0..trials {
                let votes: Vec<ApDecision<PrimitiveKind>> = (0..n)
                    .map(|i| {
                        let ok = rng.gen_bool(p);
                        let decision = if ok {
                            RisingEdge
                        } else if rng.gen_bool(0.5) {
                            FallingEdge
                        } else {
                            Pause
                        };
                        vote(&format!("ap{i}"), rng.gen_range(-90.0..-30.0), decision)
                    })
                    .collect();
                if fuse(&votes).unwrap() == RisingEdge {
                    correct += 1;
                }
            }
            let accuracy = correct as f64 / trials as f64;
            assert!(accuracy >= p, "n={n}: fused {accuracy} below single-receiver {p}");
        }
    }

    fn event(kind: PrimitiveKind, start: f64, end: f64) -> PrimitiveEvent {
        PrimitiveEvent {
            kind,
            start_s: start,
            end_s: end,
            amplitude_db: 5.0,
            speed: SpeedClass::High,
            magnitude: MagnitudeClass::Na,
        }
    }

    #[test]
    fn stream_fusion_votes_per_overlapping_event() {
        use PrimitiveKind::*;
        let streams = vec![
            ApPrimitives {
                ap_id: "a".into(),
                mean_rssi_dbm: -50.0,
                events: vec![event(RisingEdge, 1.0, 1.5), event(FallingEdge, 3.0, 3.5)],
            },
            ApPrimitives {
                ap_id: "b".into(),
                mean_rssi_dbm: -55.0,
                events: vec![event(RisingEdge, 1.05, 1.55), event(FallingEdge, 3.02, 3.5)],
            },
            ApPrimitives {
                ap_id: "c".into(),
                mean_rssi_dbm: -60.0,
                events: vec![event(FallingEdge, 1.02, 1.48), event(FallingEdge, 3.0, 3.45)],
            },
        ];
        let fused = fuse_primitive_streams(&streams);
        assert_eq!(fused.len(), 2, "fused: {fused:?}");
        assert_eq!(fused[0].kind, RisingEdge);
        assert_eq!(fused[1].kind, FallingEdge);
    }

    #[test]
    fn unmatched_events_pass_through() {
        use PrimitiveKind::*;
        let streams = vec![
            ApPrimitives {
                ap_id: "a".into(),
                mean_rssi_dbm: -50.0,
                events: vec![event(RisingEdge, 1.0, 1.5)],
            },
            ApPrimitives {
                ap_id: "b".into(),
                mean_rssi_dbm: -55.0,
                events: vec![event(FallingEdge, 8.0, 8.5)],
            },
        ];
        let fused = fuse_primitive_streams(&streams);
        assert_eq!(fused.len(), 2);
        assert_eq!(fused[0].kind, RisingEdge);
        assert_eq!(fused[1].kind, FallingEdge);
    }
}
