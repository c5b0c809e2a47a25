//! Single-snapshot angle estimation: Fourier beamformer, single-snapshot
//! MUSIC on a Hankel matrix, and threshold peak detection.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::array_model::steering_from_sine;
use crate::{Error, Result};

/// Default FFT length of the Fourier beamformer (arrays up to 128 elements).
pub const DEFAULT_FFT_GRID: usize = 4096;
/// Default MUSIC grid: 0.05 deg steps over the open half-plane.
pub const DEFAULT_MUSIC_GRID: usize = 3599;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Fourier,
    Music,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Fourier => "fourier",
            Estimator::Music => "music",
        })
    }
}

/// Pseudospectrum on an increasing angle grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSpectrum {
    pub angles_deg: Vec<f64>,
    pub power: Vec<f64>,
    pub source: Estimator,
    pub snapshot_len: usize,
}

impl AngularSpectrum {
    /// Angle of the largest grid value.
    pub fn peak_angle(&self) -> f64 {
        let k = self
            .power
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if *p > self.power[best] { i } else { best });
        self.angles_deg[k]
    }

    pub fn max_power(&self) -> f64 {
        self.power.iter().copied().fold(0.0, f64::max)
    }
}

/// Reusable zero-padded FFT beamformer.
pub struct FourierBeamformer {
    fft: Arc<dyn Fft<f64>>,
    grid_size: usize,
    /// FFT bin for each output grid point, in increasing angle order.
    bins: Vec<usize>,
    angles_deg: Vec<f64>,
}

impl FourierBeamformer {
    pub fn new(grid_size: usize, spacing_wavelengths: f64) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::Config(format!("FFT grid of {grid_size} points")));
        }
        if !(spacing_wavelengths > 0.0) {
            return Err(Error::Config("element spacing must be positive".into()));
        }
        let n = grid_size as f64;
        let mut pairs: Vec<(f64, usize)> = (0..grid_size)
            .map(|k| {
                let f = if 2 * k < grid_size { k as f64 / n } else { k as f64 / n - 1.0 };
                (f, k)
            })
            .filter(|(f, _)| f.abs() <= spacing_wavelengths)
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let angles_deg = pairs
            .iter()
            .map(|(f, _)| (f / spacing_wavelengths).clamp(-1.0, 1.0).asin().to_degrees())
            .collect();
        let bins = pairs.iter().map(|(_, k)| *k).collect();
        let fft = FftPlanner::new().plan_fft_forward(grid_size);
        Ok(Self {
            fft,
            grid_size,
            bins,
            angles_deg,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn spectrum(&self, snap: &[Complex64]) -> Result<AngularSpectrum> {
        if snap.is_empty() {
            return Err(Error::Degenerate("empty snapshot".into()));
        }
        if self.grid_size < 4 * snap.len() {
            return Err(Error::Config(format!(
                "FFT grid {} shorter than 4x the snapshot length {}",
                self.grid_size,
                snap.len()
            )));
        }
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid_size];
        buf[..snap.len()].copy_from_slice(snap);
        self.fft.process(&mut buf);
        Ok(AngularSpectrum {
            angles_deg: self.angles_deg.clone(),
            power: self.bins.iter().map(|&k| buf[k].norm_sqr()).collect(),
            source: Estimator::Fourier,
            snapshot_len: snap.len(),
        })
    }
}

/// Conventional beamformer spectrum `|v(theta)^H x|^2` via a zero-padded FFT.
pub fn fourier_spectrum(snap: &[Complex64], spacing_wavelengths: f64, grid_size: usize) -> Result<AngularSpectrum> {
    FourierBeamformer::new(grid_size, spacing_wavelengths)?.spectrum(snap)
}

/// How the single-snapshot data matrix is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HankelMode {
    #[default]
    Forward,
    /// Forward Hankel side by side with its conjugate-reversed counterpart.
    ForwardBackward,
}

/// Hankel column count used for a snapshot of length `m`.
pub fn hankel_columns(m: usize) -> usize {
    m / 2 + 1
}

fn hankel_matrix(snap: &[Complex64], mode: HankelMode) -> DMatrix<Complex64> {
    let m = snap.len();
    let q = hankel_columns(m);
    let rows = m - q + 1;
    let forward = DMatrix::from_fn(rows, q, |i, j| snap[i + j]);
    match mode {
        HankelMode::Forward => forward,
        HankelMode::ForwardBackward => {
            let backward = DMatrix::from_fn(rows, q, |i, j| snap[m - 1 - i - j].conj());
            let mut both = DMatrix::zeros(rows, 2 * q);
            both.columns_mut(0, q).copy_from(&forward);
            both.columns_mut(q, q).copy_from(&backward);
            both
        }
    }
}

/// Uniform grid of `grid_size` angles strictly inside (-90, 90) degrees.
pub fn uniform_angle_grid(grid_size: usize) -> Vec<f64> {
    let step = 180.0 / (grid_size as f64 + 1.0);
    (1..=grid_size).map(|i| -90.0 + step * i as f64).collect()
}

/// Single-snapshot MUSIC with a forward Hankel matrix.
pub fn ss_music_spectrum(
    snap: &[Complex64],
    spacing_wavelengths: f64,
    num_targets: usize,
    grid_size: usize,
) -> Result<AngularSpectrum> {
    ss_music_spectrum_with(snap, spacing_wavelengths, num_targets, grid_size, HankelMode::Forward)
}

pub fn ss_music_spectrum_with(
    snap: &[Complex64],
    spacing_wavelengths: f64,
    num_targets: usize,
    grid_size: usize,
    mode: HankelMode,
) -> Result<AngularSpectrum> {
    let m = snap.len();
    if m < 3 {
        return Err(Error::Config(format!("MUSIC needs at least 3 elements, got {m}")));
    }
    let rows = m - hankel_columns(m) + 1;
    if num_targets == 0 || num_targets >= rows {
        return Err(Error::Config(format!(
            "MUSIC with {num_targets} targets needs 1 <= p < {rows} for {m} elements"
        )));
    }
    if grid_size == 0 {
        return Err(Error::Config("empty MUSIC grid".into()));
    }
    if snap.iter().all(|s| s.norm_sqr() == 0.0) {
        return Err(Error::Degenerate("all-zero snapshot".into()));
    }
    if snap.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
        return Err(Error::Numeric("non-finite snapshot sample".into()));
    }

    let h = hankel_matrix(snap, mode);
    let svd = h.svd(true, false);
    let u = svd.u.as_ref().expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    // Columns of U beyond the p largest singular values span the noise subspace.
    let noise: Vec<usize> = order[num_targets..].to_vec();
    let noise_cols: Vec<Vec<Complex64>> = noise
        .iter()
        .map(|&c| u.column(c).iter().map(|z| z.conj()).collect())
        .collect();

    let angles_deg = uniform_angle_grid(grid_size);
    let floor = f64::EPSILON * rows as f64;
    let power = angles_deg
        .iter()
        .map(|deg| {
            let a = steering_from_sine(rows, spacing_wavelengths, deg.to_radians().sin());
            let proj: f64 = noise_cols
                .iter()
                .map(|col| {
                    col.iter()
                        .zip(&a)
                        .fold(Complex64::new(0.0, 0.0), |acc, (u, a)| acc + u * a)
                        .norm_sqr()
                })
                .sum();
            1.0 / proj.max(floor)
        })
        .collect();
    Ok(AngularSpectrum {
        angles_deg,
        power,
        source: Estimator::Music,
        snapshot_len: m,
    })
}

/// Detected peaks of a spectrum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub angles_deg: Vec<f64>,
    pub powers: Vec<f64>,
    /// Threshold as a fraction of the spectrum maximum.
    pub threshold: f64,
}

impl DetectionSet {
    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }
}

/// Grid indices of strict local maxima. The first/last grid point only has
/// one neighbour to beat.
fn local_maxima(power: &[f64]) -> Vec<usize> {
    let n = power.len();
    (0..n)
        .filter(|&k| {
            let left = k == 0 || power[k] > power[k - 1];
            let right = k + 1 == n || power[k] > power[k + 1];
            left && right && n > 1
        })
        .collect()
}

/// Peak angle refined by a parabola through the three dB values around `k`.
fn refine(spec: &AngularSpectrum, k: usize) -> f64 {
    let n = spec.power.len();
    let th = &spec.angles_deg;
    if k == 0 || k + 1 >= n {
        return th[k];
    }
    let (a, b, c) = (spec.power[k - 1], spec.power[k], spec.power[k + 1]);
    if a <= 0.0 || b <= 0.0 || c <= 0.0 {
        return th[k];
    }
    let (a, b, c) = (10.0 * a.log10(), 10.0 * b.log10(), 10.0 * c.log10());
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 {
        return th[k];
    }
    let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
    if delta >= 0.0 {
        th[k] + delta * (th[k + 1] - th[k])
    } else {
        th[k] + delta * (th[k] - th[k - 1])
    }
}

/// Local maxima whose power is at least `threshold * max(power)`, with
/// sub-grid parabolic refinement in dB.
pub fn detect_peaks(spec: &AngularSpectrum, threshold: f64) -> Result<DetectionSet> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Config(format!("threshold {threshold} outside (0, 1]")));
    }
    let max = spec.max_power();
    let mut out = DetectionSet {
        threshold,
        ..Default::default()
    };
    if max <= 0.0 {
        return Ok(out);
    }
    for k in local_maxima(&spec.power) {
        if spec.power[k] >= threshold * max {
            out.angles_deg.push(refine(spec, k));
            out.powers.push(spec.power[k]);
        }
    }
    Ok(out)
}

/// The `count` strongest local maxima, in increasing angle order.
pub fn strongest_peaks(spec: &AngularSpectrum, count: usize) -> DetectionSet {
    let mut peaks = local_maxima(&spec.power);
    peaks.sort_by(|&a, &b| spec.power[b].total_cmp(&spec.power[a]));
    peaks.truncate(count);
    peaks.sort_unstable();
    let max = spec.max_power();
    let weakest = peaks.iter().map(|&k| spec.power[k]).fold(f64::INFINITY, f64::min);
    DetectionSet {
        angles_deg: peaks.iter().map(|&k| refine(spec, k)).collect(),
        powers: peaks.iter().map(|&k| spec.power[k]).collect(),
        threshold: if max > 0.0 && weakest.is_finite() { weakest / max } else { 1.0 },
    }
}
