//! Equal error rate scoring.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::protocol::{Label, ProtocolEntry, Split};
use crate::{Error, Result};

/// A scored trial; higher scores mean "more likely bonafide".
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub utt_id: String,
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EerResult {
    /// Fraction in [0, 0.5].
    pub eer: f64,
    pub threshold: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

/// One operating point: trials with `score >= threshold` are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// Locate the FAR/FRR crossing on operating points ordered by increasing
/// threshold. If FAR = FRR is hit exactly that point is used, otherwise the
/// two adjacent points bracketing the sign change of `FRR - FAR` are linearly
/// interpolated.
pub fn eer_from_operating_points(points: &[OperatingPoint]) -> (f64, f64) {
    let mut prev: Option<&OperatingPoint> = None;
    for p in points {
        let d = p.frr - p.far;
        if d == 0.0 {
            return (p.far, p.threshold);
        }
        if d > 0.0 {
            let Some(q) = prev else {
                return ((p.far + p.frr) / 2.0, p.threshold);
            };
            let dq = q.frr - q.far;
            let alpha = -dq / (d - dq);
            let far = q.far + alpha * (p.far - q.far);
            let frr = q.frr + alpha * (p.frr - q.frr);
            let threshold = if p.threshold.is_finite() {
                p.threshold
            } else {
                q.threshold
            };
            return ((far + frr) / 2.0, threshold);
        }
        prev = Some(p);
    }
    // FRR < FAR everywhere cannot happen once the +inf point is included.
    let last = points.last().expect("operating points");
    ((last.far + last.frr) / 2.0, last.threshold)
}

/// EER via a single sorted sweep over the unique scores.
pub fn compute_eer(trials: &[Trial]) -> Result<EerResult> {
    let n_bona = trials.iter().filter(|t| t.label == Label::Bonafide).count();
    let n_spoof = trials.len() - n_bona;
    if n_bona == 0 || n_spoof == 0 {
        return Err(Error::OneClassOnly);
    }
    if trials.iter().any(|t| !t.score.is_finite()) {
        return Err(Error::NonFinite("trial score"));
    }
    let mut sorted: Vec<(f64, Label)> = trials.iter().map(|t| (t.score, t.label)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Ascending thresholds; at threshold u, everything strictly below u is rejected.
    let mut points = Vec::with_capacity(sorted.len() + 1);
    let (mut bona_below, mut spoof_below) = (0usize, 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let u = sorted[i].0;
        points.push(OperatingPoint {
            threshold: u,
            far: (n_spoof - spoof_below) as f64 / n_spoof as f64,
            frr: bona_below as f64 / n_bona as f64,
        });
        while i < sorted.len() && sorted[i].0 == u {
            match sorted[i].1 {
                Label::Bonafide => bona_below += 1,
                Label::Spoof => spoof_below += 1,
            }
            i += 1;
        }
    }
    points.push(OperatingPoint {
        threshold: f64::INFINITY,
        far: 0.0,
        frr: 1.0,
    });
    let (eer, threshold) = eer_from_operating_points(&points);
    Ok(EerResult {
        eer: eer.clamp(0.0, 0.5),
        threshold,
        n_bonafide: n_bona,
        n_spoof,
    })
}

/// Attach protocol labels to `(utt_id, score)` pairs.
///
/// Every score must name a protocol utterance, no utterance may be scored
/// twice, and every protocol entry of `split` (all entries when `None`) must
/// be scored. Output follows protocol order.
pub fn merge_with_protocol(
    scores: &[(String, f64)],
    protocol: &[ProtocolEntry],
    split: Option<Split>,
) -> Result<Vec<Trial>> {
    let known: BTreeSet<&str> = protocol.iter().map(|e| e.utt_id.as_str()).collect();
    let mut by_id: BTreeMap<&str, f64> = BTreeMap::new();
    for (utt, score) in scores {
        if !known.contains(utt.as_str()) {
            return Err(Error::UnknownUtt(utt.clone()));
        }
        if by_id.insert(utt.as_str(), *score).is_some() {
            return Err(Error::DuplicateUtt(utt.clone()));
        }
    }
    protocol
        .iter()
        .filter(|e| split.map_or(true, |s| e.split == s))
        .map(|e| {
            by_id
                .get(e.utt_id.as_str())
                .map(|&score| Trial {
                    utt_id: e.utt_id.clone(),
                    label: e.label,
                    score,
                })
                .ok_or_else(|| Error::MissingScore(e.utt_id.clone()))
        })
        .collect()
}
