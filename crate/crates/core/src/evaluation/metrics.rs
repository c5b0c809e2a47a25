use serde::{Deserialize, Serialize};

use super::matching::match_detections;
use crate::array_model::{rayleigh_beamwidth, AngleDeg, ArrayConfig};
use crate::doa::{detect_peaks, AngularSpectrum};
use crate::{Error, Result};

/// Angular field of view over which false alarms are counted.
pub const FIELD_OF_VIEW_DEG: f64 = 140.0;

/// Number of resolution cells of `array` in the field of view:
/// `floor(140 deg / boresight beamwidth)`.
pub fn angular_cells(array: &ArrayConfig) -> usize {
    let bw = rayleigh_beamwidth(array, AngleDeg::new(0.0).expect("0 deg is a valid angle"));
    (FIELD_OF_VIEW_DEG / bw).floor().max(1.0) as usize
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
}

/// Running totals for one ROC threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RocCounts {
    pub true_positives: usize,
    pub false_alarms: usize,
    pub truths: usize,
    pub cells: usize,
}

impl RocCounts {
    pub fn add(&mut self, other: &RocCounts) {
        self.true_positives += other.true_positives;
        self.false_alarms += other.false_alarms;
        self.truths += other.truths;
        self.cells += other.cells;
    }

    pub fn point(&self, threshold: f64) -> RocPoint {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        RocPoint {
            threshold,
            pfa: ratio(self.false_alarms, self.cells),
            pd: ratio(self.true_positives, self.truths),
        }
    }
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::Config("no ROC thresholds".into()));
    }
    if thresholds.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
        return Err(Error::Config("ROC thresholds must lie in (0, 1]".into()));
    }
    if thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("ROC thresholds must be strictly descending".into()));
    }
    Ok(())
}

/// Per-threshold counts of one scene.
pub fn roc_counts(
    spectrum: &AngularSpectrum,
    truths: &[AngleDeg],
    thresholds: &[f64],
    tol: f64,
    cells: usize,
) -> Result<Vec<RocCounts>> {
    thresholds
        .iter()
        .map(|&thr| {
            let dets = detect_peaks(spectrum, thr)?;
            let m = match_detections(&dets.angles_deg, truths, tol);
            Ok(RocCounts {
                true_positives: m.true_positives,
                false_alarms: m.false_alarms,
                truths: truths.len(),
                cells,
            })
        })
        .collect()
}

/// ROC over a scene set: `Pd = sum tp / sum truths`, `Pfa = sum fa / sum
/// cells`, one point per threshold.
pub fn roc_curve(
    scenes: &[(AngularSpectrum, Vec<AngleDeg>)],
    thresholds: &[f64],
    tol: f64,
    cells: usize,
) -> Result<Vec<RocPoint>> {
    if scenes.is_empty() {
        return Err(Error::Degenerate("empty scene set".into()));
    }
    validate_thresholds(thresholds)?;
    let mut totals = vec![RocCounts::default(); thresholds.len()];
    for (spec, truths) in scenes {
        for (tot, c) in totals.iter_mut().zip(roc_counts(spec, truths, thresholds, tol, cells)?) {
            tot.add(&c);
        }
    }
    Ok(totals.iter().zip(thresholds).map(|(c, &t)| c.point(t)).collect())
}

/// Smallest pairwise distance between detected angles.
pub fn min_angular_separation(angles_deg: &[f64]) -> Option<f64> {
    let mut sorted = angles_deg.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.windows(2).map(|w| w[1] - w[0]).min_by(f64::total_cmp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts[i]` covers `[i * bin_width, (i + 1) * bin_width)`.
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `(bin start, count)` of the non-empty bins.
    pub fn occupied(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, c)| **c > 0)
            .map(|(i, c)| (i as f64 * self.bin_width, *c))
    }

    /// Number of values in bins that end at or below `limit`.
    pub fn mass_below(&self, limit: f64) -> usize {
        self.counts
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as f64 + 1.0) * self.bin_width <= limit + 1e-12)
            .map(|(_, c)| c)
            .sum()
    }
}

/// Fixed-width histogram starting at 0.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::Config(format!("histogram bin width {bin_width}")));
    }
    let mut counts: Vec<usize> = Vec::new();
    for &v in values {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("histogram value {v} is not a finite non-negative number")));
        }
        let bin = (v / bin_width).floor() as usize;
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(Histogram { bin_width, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseBucket {
    pub snr_db: f64,
    pub count: usize,
    /// Mean squared angle error in deg^2; `None` for an empty bucket.
    pub mse_deg2: Option<f64>,
}

/// Mean squared error of `(snr_db, error_deg)` samples per SNR bucket.
pub fn doa_mse(samples: &[(f64, f64)], buckets: &[f64]) -> Vec<MseBucket> {
    buckets
        .iter()
        .map(|&snr| {
            let errs: Vec<f64> = samples.iter().filter(|(s, _)| *s == snr).map(|(_, e)| *e).collect();
            MseBucket {
                snr_db: snr,
                count: errs.len(),
                mse_deg2: (!errs.is_empty()).then(|| errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64),
            }
        })
        .collect()
}
