//! Synthetic FMCW radar cubes and their raw on-disk layout.
//!
//! The raw cube file is little-endian `f32` interleaved `(re, im)`, antenna
//! index fastest, then sample, then chirp. A JSON sidecar with the same stem
//! and a `.json` extension carries the [`FmcwParams`], antenna count and
//! element spacing.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::array_model::{AngleDeg, ArrayConfig};
use crate::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Chirp and frame parameters of an FMCW radar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FmcwParams {
    pub center_frequency_hz: f64,
    pub chirp_slope_hz_per_s: f64,
    pub samples_per_chirp: usize,
    /// Complex baseband sample rate.
    pub sample_rate_hz: f64,
    pub chirp_period_s: f64,
    pub chirps_per_frame: usize,
}

impl FmcwParams {
    /// The 79 GHz cascaded-chip configuration: 320 MHz effective bandwidth
    /// at 5 MHz/us, i.e. 256 samples over 64 us.
    pub fn automotive_79ghz() -> Self {
        Self {
            center_frequency_hz: 78.58e9,
            chirp_slope_hz_per_s: 5e12,
            samples_per_chirp: 256,
            sample_rate_hz: 4e6,
            chirp_period_s: 80e-6,
            chirps_per_frame: 128,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.center_frequency_hz,
            self.chirp_slope_hz_per_s,
            self.sample_rate_hz,
            self.chirp_period_s,
        ];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("non-positive FMCW parameter in {self:?}")));
        }
        if self.samples_per_chirp == 0 || self.chirps_per_frame == 0 {
            return Err(Error::Config("FMCW frame with zero samples or chirps".into()));
        }
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.chirp_slope_hz_per_s * self.samples_per_chirp as f64 / self.sample_rate_hz
    }

    /// Range covered by one FFT bin.
    pub fn range_resolution_m(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth_hz())
    }

    /// Largest range whose beat frequency stays below the sample rate.
    pub fn max_range_m(&self) -> f64 {
        self.sample_rate_hz * SPEED_OF_LIGHT / (2.0 * self.chirp_slope_hz_per_s)
    }

    /// Fractional range-FFT bin of a target at `range_m`.
    pub fn range_bin(&self, range_m: f64) -> f64 {
        let beat = 2.0 * self.chirp_slope_hz_per_s * range_m / SPEED_OF_LIGHT;
        beat * self.samples_per_chirp as f64 / self.sample_rate_hz
    }

    pub fn max_velocity_mps(&self) -> f64 {
        self.wavelength_m() / (4.0 * self.chirp_period_s)
    }

    /// Fractional Doppler bin after centring (zero velocity at the middle bin).
    pub fn doppler_bin(&self, velocity_mps: f64) -> f64 {
        let doppler = 2.0 * velocity_mps / self.wavelength_m();
        let n = self.chirps_per_frame as f64;
        doppler * self.chirp_period_s * n + (self.chirps_per_frame / 2) as f64
    }
}

/// Point target for cube synthesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CubeTarget {
    pub range_m: f64,
    pub velocity_mps: f64,
    pub angle: AngleDeg,
    /// Amplitude in dB relative to unit noise.
    pub amplitude_db: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CubeScene {
    pub targets: Vec<CubeTarget>,
    /// Standard deviation of the complex noise (`E|n|^2 = sigma^2`).
    pub noise_sigma: f64,
}

/// Raw ADC cube, indexed `[chirp, sample, antenna]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCube {
    pub data: Array3<Complex64>,
    pub params: FmcwParams,
    pub array: ArrayConfig,
}

impl RadarCube {
    pub fn new(data: Array3<Complex64>, params: FmcwParams, array: ArrayConfig) -> Result<Self> {
        params.validate()?;
        let want = (params.chirps_per_frame, params.samples_per_chirp, array.num_elements());
        if data.dim() != want {
            return Err(Error::Config(format!("cube shape {:?} does not match {want:?}", data.dim())));
        }
        Ok(Self { data, params, array })
    }
}

/// Beat-signal cube: range phase ramp over samples, Doppler progression over
/// chirps and the steering phase over antennas, plus complex white noise.
pub fn synth_fmcw_cube(scene: &CubeScene, params: &FmcwParams, array: &ArrayConfig, seed: u64) -> Result<RadarCube> {
    params.validate()?;
    let max_range = params.max_range_m();
    for t in &scene.targets {
        if !(t.range_m >= 0.0 && t.range_m < max_range) {
            return Err(Error::Domain(format!(
                "target range {} m outside the unambiguous range [0, {max_range:.2}) m",
                t.range_m
            )));
        }
    }
    let (nc, ns, na) = (params.chirps_per_frame, params.samples_per_chirp, array.num_elements());
    let mut data = Array3::<Complex64>::zeros((nc, ns, na));
    let lambda = params.wavelength_m();
    for t in &scene.targets {
        let amp = 10f64.powf(t.amplitude_db / 20.0);
        let beat = 2.0 * params.chirp_slope_hz_per_s * t.range_m / SPEED_OF_LIGHT;
        let fast = 2.0 * PI * beat / params.sample_rate_hz;
        let slow = 2.0 * PI * (2.0 * t.velocity_mps / lambda) * params.chirp_period_s;
        let spatial = 2.0 * PI * array.spacing_wavelengths() * t.angle.rad().sin();
        let chirp_ph: Vec<Complex64> = (0..nc).map(|c| Complex64::from_polar(1.0, slow * c as f64)).collect();
        let sample_ph: Vec<Complex64> = (0..ns).map(|n| Complex64::from_polar(1.0, fast * n as f64)).collect();
        let ant_ph: Vec<Complex64> = (0..na)
            .map(|m| Complex64::from_polar(amp, spatial * m as f64 + t.phase_rad))
            .collect();
        for ((c, n, m), v) in data.indexed_iter_mut() {
            *v += chirp_ph[c] * sample_ph[n] * ant_ph[m];
        }
    }
    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = scene.noise_sigma * std::f64::consts::FRAC_1_SQRT_2;
        for v in data.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(s * re, s * im);
        }
    }
    RadarCube::new(data, *params, *array)
}

#[derive(Debug, Serialize, Deserialize)]
struct CubeSidecar {
    params: FmcwParams,
    num_antennas: usize,
    spacing_wavelengths: f64,
}

pub fn cube_sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

pub fn write_cube(path: &Path, cube: &RadarCube) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut buf = Vec::with_capacity(cube.data.len() * 8);
    for v in cube.data.iter() {
        buf.extend_from_slice(&(v.re as f32).to_le_bytes());
        buf.extend_from_slice(&(v.im as f32).to_le_bytes());
    }
    out.write_all(&buf).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))?;
    let side = CubeSidecar {
        params: cube.params,
        num_antennas: cube.array.num_elements(),
        spacing_wavelengths: cube.array.spacing_wavelengths(),
    };
    let side_path = cube_sidecar_path(path);
    let json = serde_json::to_string_pretty(&side).expect("sidecar serializes");
    std::fs::write(&side_path, json).map_err(|e| Error::io(&side_path, e))
}

pub fn read_cube(path: &Path) -> Result<RadarCube> {
    let side_path = cube_sidecar_path(path);
    let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
    let side: CubeSidecar = serde_json::from_str(&text).map_err(|e| Error::format(&side_path, e.to_string()))?;
    let array = ArrayConfig::new(side.num_antennas, side.spacing_wavelengths)?;
    side.params.validate()?;
    let shape = (side.params.chirps_per_frame, side.params.samples_per_chirp, side.num_antennas);
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() != shape.0 * shape.1 * shape.2 * 8 {
        return Err(Error::format(path, format!("{} bytes do not match cube shape {shape:?}", bytes.len())));
    }
    let f = |b: &[u8]| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64;
    let values: Vec<Complex64> = bytes
        .chunks_exact(8)
        .map(|c| Complex64::new(f(&c[0..4]), f(&c[4..8])))
        .collect();
    let data = Array3::from_shape_vec(shape, values).expect("length checked");
    RadarCube::new(data, side.params, array)
}
