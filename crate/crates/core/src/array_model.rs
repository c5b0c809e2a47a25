//! Virtual uniform linear array geometry.
//!
//! Angles cross every public interface in degrees. Trigonometry is done in
//! radians, and [`steering_derivative`] differentiates with respect to
//! radians, so Fisher information and CRB values come out in rad².

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Virtual ULA: element count and inter-element spacing in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    num_elements: usize,
    spacing_wavelengths: f64,
}

impl ArrayConfig {
    pub fn new(num_elements: usize, spacing_wavelengths: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(Error::Config(format!(
                "array needs at least 2 elements, got {num_elements}"
            )));
        }
        if !(spacing_wavelengths.is_finite() && spacing_wavelengths > 0.0) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {spacing_wavelengths}"
            )));
        }
        Ok(Self {
            num_elements,
            spacing_wavelengths,
        })
    }

    /// Half-wavelength spaced ULA.
    pub fn half_wavelength(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, 0.5)
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing_wavelengths(&self) -> f64 {
        self.spacing_wavelengths
    }

    /// Same spacing, different element count.
    pub fn with_elements(&self, num_elements: usize) -> Result<Self> {
        Self::new(num_elements, self.spacing_wavelengths)
    }
}

/// Direction of arrival in degrees, restricted to the open half-plane
/// `(-90, 90)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AngleDeg(f64);

impl AngleDeg {
    pub fn new(deg: f64) -> Result<Self> {
        if deg.is_finite() && deg.abs() < 90.0 {
            Ok(Self(deg))
        } else {
            Err(Error::Domain(format!(
                "angle {deg} deg outside the open interval (-90, 90)"
            )))
        }
    }

    pub fn deg(self) -> f64 {
        self.0
    }

    pub fn rad(self) -> f64 {
        self.0.to_radians()
    }
}

impl TryFrom<f64> for AngleDeg {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AngleDeg> for f64 {
    fn from(a: AngleDeg) -> f64 {
        a.0
    }
}

/// Steering vector for an arbitrary `sin(theta)`; element `m` is
/// `exp(j 2 pi (d/lambda) m sin(theta))`.
pub fn steering_from_sine(num_elements: usize, spacing_wavelengths: f64, sine: f64) -> Vec<Complex64> {
    let step = 2.0 * PI * spacing_wavelengths * sine;
    (0..num_elements)
        .map(|m| Complex64::from_polar(1.0, step * m as f64))
        .collect()
}

/// Array response to a far-field plane wave from `theta`, phase-referenced to
/// element 0.
pub fn steering_vector(cfg: &ArrayConfig, theta: AngleDeg) -> Vec<Complex64> {
    steering_from_sine(cfg.num_elements, cfg.spacing_wavelengths, theta.rad().sin())
}

/// `d v / d theta` with theta in radians.
pub fn steering_derivative(cfg: &ArrayConfig, theta: AngleDeg) -> Vec<Complex64> {
    let k = 2.0 * PI * cfg.spacing_wavelengths * theta.rad().cos();
    steering_vector(cfg, theta)
        .into_iter()
        .enumerate()
        .map(|(m, v)| Complex64::new(0.0, k * m as f64) * v)
        .collect()
}

/// Rayleigh beamwidth `lambda / (M d cos(theta))`, in degrees.
pub fn rayleigh_beamwidth(cfg: &ArrayConfig, theta: AngleDeg) -> f64 {
    let aperture = cfg.num_elements as f64 * cfg.spacing_wavelengths;
    (1.0 / (aperture * theta.rad().cos())).to_degrees()
}
