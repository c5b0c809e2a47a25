use std::ops::Range;

use ndarray::Array3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::cfar::DetectionMask;
use crate::array_model::ArrayConfig;
use crate::scene_sim::Snapshot;
use crate::{Error, Result};

/// Antenna vector of every detected cell, ordered by `(doppler, range)`.
pub fn extract_antenna_vectors(
    rd: &Array3<Complex64>,
    mask: &DetectionMask,
    array: &ArrayConfig,
) -> Result<Vec<Snapshot>> {
    let (nd, nr, na) = rd.dim();
    if mask.mask.dim() != (nd, nr) {
        return Err(Error::Config(format!(
            "mask shape {:?} does not match range-Doppler shape {:?}",
            mask.mask.dim(),
            (nd, nr)
        )));
    }
    if na != array.num_elements() {
        return Err(Error::Config(format!("cube has {na} antennas, array {}", array.num_elements())));
    }
    mask.cells()
        .into_iter()
        .map(|(d, r)| {
            let samples = (0..na).map(|m| rd[[d, r, m]]).collect();
            let mut snap = Snapshot::new(samples, *array)?;
            snap.cell = Some((d, r));
            Ok(snap)
        })
        .collect()
}

/// Divide by the largest magnitude. Phases are untouched.
pub fn normalize_magnitude(v: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let scale = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return Err(Error::Numeric("non-finite sample in vector".into()));
    }
    if scale == 0.0 {
        return Err(Error::Degenerate("cannot normalise an all-zero vector".into()));
    }
    Ok((v.iter().map(|z| z / scale).collect(), scale))
}

pub fn unnormalize(v: &[Complex64], scale: f64) -> Vec<Complex64> {
    v.iter().map(|z| z * scale).collect()
}

/// Reverse the element order and conjugate. An involution.
pub fn flip_conjugate(v: &[Complex64]) -> Vec<Complex64> {
    v.iter().rev().map(|z| z.conj()).collect()
}

/// Split of an `M`-element aperture into `K/2` outer elements on each side of
/// the inner `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApertureSplit {
    large: usize,
    small: usize,
}

impl ApertureSplit {
    pub fn new(large: usize, small: usize) -> Result<Self> {
        if small < 2 || small >= large {
            return Err(Error::Config(format!("need 2 <= L < M, got L={small}, M={large}")));
        }
        if !(large - small).is_multiple_of(2) {
            return Err(Error::Config(format!("K = M - L = {} must be even", large - small)));
        }
        Ok(Self { large, small })
    }

    pub fn large(&self) -> usize {
        self.large
    }

    pub fn small(&self) -> usize {
        self.small
    }

    /// `K`, the number of extrapolated elements.
    pub fn outer(&self) -> usize {
        self.large - self.small
    }

    /// `K / 2`, elements added on each side.
    pub fn half(&self) -> usize {
        self.outer() / 2
    }

    pub fn inner_range(&self) -> Range<usize> {
        self.half()..self.half() + self.small
    }

    pub fn inner<'a>(&self, snap: &'a [Complex64]) -> &'a [Complex64] {
        &snap[self.inner_range()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Right,
    LeftFlipped,
}

/// Self-supervised sample: normalised inner elements and the outer
/// elements on one side under the same scale.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub input: Vec<Complex64>,
    pub label: Vec<Complex64>,
    pub direction: Direction,
    pub norm_scale: f64,
}

/// Right and left (flip-conjugated) pairs of one `M`-element snapshot with
/// `L` inner and `K` outer elements.
pub fn make_training_pairs(snap: &[Complex64], l: usize, k: usize) -> Result<(TrainingPair, TrainingPair)> {
    if k + l != snap.len() {
        return Err(Error::Config(format!("K + L = {} but the snapshot has {} elements", k + l, snap.len())));
    }
    let split = ApertureSplit::new(snap.len(), l)?;
    let half = split.half();
    let (inner, scale) = normalize_magnitude(split.inner(snap))?;
    let right_label: Vec<Complex64> = snap[half + l..].iter().map(|z| z / scale).collect();
    let left_label: Vec<Complex64> = snap[..half].iter().map(|z| z / scale).collect();
    let right = TrainingPair {
        input: inner.clone(),
        label: right_label,
        direction: Direction::Right,
        norm_scale: scale,
    };
    let left = TrainingPair {
        input: flip_conjugate(&inner),
        label: flip_conjugate(&left_label),
        direction: Direction::LeftFlipped,
        norm_scale: scale,
    };
    Ok((right, left))
}

/// Reassemble a full normalised aperture from both pairs' labels and the
/// inner samples: `[conj-flip(left label), inner, right label]`.
pub fn stitch_labels(right: &TrainingPair, left: &TrainingPair) -> Vec<Complex64> {
    let mut out = flip_conjugate(&left.label);
    out.extend_from_slice(&right.input);
    out.extend_from_slice(&right.label);
    out
}
