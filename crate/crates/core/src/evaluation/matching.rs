use serde::{Deserialize, Serialize};

use crate::array_model::{rayleigh_beamwidth, AngleDeg, ArrayConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub detection_deg: f64,
    pub truth_deg: f64,
    /// `detection - truth`.
    pub error_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_alarms: usize,
    pub misses: usize,
    pub pairings: Vec<Pairing>,
}

impl MatchResult {
    /// Every truth was paired with a detection.
    pub fn all_resolved(&self) -> bool {
        self.misses == 0
    }
}

/// Half the boresight Rayleigh beamwidth of `array`.
pub fn default_tolerance(array: &ArrayConfig) -> f64 {
    let boresight = AngleDeg::new(0.0).expect("0 deg is a valid angle");
    rayleigh_beamwidth(array, boresight) / 2.0
}

/// Greedy nearest-neighbour assignment of detections to truths.
///
/// Candidate pairs are taken in order of increasing angular distance; a pair
/// is accepted when neither side is used yet and the distance is at most
/// `tol`. A non-positive `tol` matches nothing.
pub fn match_detections(detections: &[f64], truths: &[AngleDeg], tol: f64) -> MatchResult {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in detections.iter().enumerate() {
        for (j, t) in truths.iter().enumerate() {
            let dist = (d - t.deg()).abs();
            if dist <= tol {
                candidates.push((dist, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detections.len()];
    let mut truth_used = vec![false; truths.len()];
    let mut pairings = Vec::new();
    for (_, i, j) in candidates {
        if det_used[i] || truth_used[j] {
            continue;
        }
        det_used[i] = true;
        truth_used[j] = true;
        pairings.push(Pairing {
            detection_deg: detections[i],
            truth_deg: truths[j].deg(),
            error_deg: detections[i] - truths[j].deg(),
        });
    }
    let tp = pairings.len();
    MatchResult {
        true_positives: tp,
        false_alarms: detections.len() - tp,
        misses: truths.len() - tp,
        pairings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn deg(v: &[f64]) -> Vec<AngleDeg> {
        v.iter().map(|d| AngleDeg::new(*d).unwrap()).collect()
    }

    #[test]
    fn exact_detections_all_match() {
        let t = deg(&[-10.0, 3.0, 40.0]);
        let r = match_detections(&[-10.0, 3.0, 40.0], &t, 0.5);
        assert_eq!((r.true_positives, r.false_alarms, r.misses), (3, 0, 0));
        assert!(r.pairings.iter().all(|p| p.error_deg == 0.0));
    }

    #[test]
    fn no_detections_all_missed() {
        let r = match_detections(&[], &deg(&[1.0, 2.0]), 1.0);
        assert_eq!((r.true_positives, r.false_alarms, r.misses), (0, 0, 2));
    }

    #[test]
    fn detection_between_truths_pairs_with_nearer() {
        let tol = 1.0;
        let r = match_detections(&[10.4], &deg(&[10.0, 11.0]), tol);
        assert_eq!(r.true_positives, 1);
        assert_eq!(r.misses, 1);
        assert_eq!(r.pairings[0].truth_deg, 10.0);
        assert!((r.pairings[0].error_deg - 0.4).abs() < 1e-12);
    }

    #[test]
    fn far_detection_is_false_alarm() {
        let r = match_detections(&[5.0], &deg(&[0.0]), 1.0);
        assert_eq!((r.true_positives, r.false_alarms, r.misses), (0, 1, 1));
    }

    #[test]
    fn default_tolerance_is_half_beamwidth() {
        let a = ArrayConfig::half_wavelength(86).unwrap();
        assert!((default_tolerance(&a) - 0.5 * (2.0f64 / 86.0).to_degrees()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn counts_are_consistent(
            dets in prop::collection::vec(-80.0f64..80.0, 0..8),
            truths in prop::collection::vec(-80.0f64..80.0, 0..8),
            tol in 0.1f64..5.0,
        ) {
            let r = match_detections(&dets, &deg(&truths), tol);
            prop_assert_eq!(r.true_positives + r.misses, truths.len());
            prop_assert_eq!(r.true_positives + r.false_alarms, dets.len());
            prop_assert!(r.pairings.iter().all(|p| p.error_deg.abs() <= tol));
        }

        #[test]
        fn extra_detections_never_lose_matches(
            dets in prop::collection::vec(-20.0f64..20.0, 0..6),
            extra in prop::collection::vec(-20.0f64..20.0, 0..4),
            truths in prop::collection::vec(-20.0f64..20.0, 0..6),
            tol in 0.1f64..5.0,
        ) {
            let t = deg(&truths);
            let before = match_detections(&dets, &t, tol);
            let mut more = dets.clone();
            more.extend(extra);
            let after = match_detections(&more, &t, tol);
            prop_assert!(after.true_positives >= before.true_positives);
            prop_assert!(after.false_alarms >= before.false_alarms);
        }
    }
}
