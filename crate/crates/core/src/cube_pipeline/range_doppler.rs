use std::f64::consts::PI;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::fmcw::RadarCube;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hamming,
    /// No tapering; for debugging and closed-form checks.
    Rectangular,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hamming if n == 1 => vec![1.0],
            Window::Hamming => (0..n)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
                .collect(),
        }
    }
}

/// Windowed 2-D FFT of every antenna channel.
///
/// Output is indexed `[doppler, range, antenna]` with the Doppler axis
/// centred, i.e. zero velocity at bin `chirps / 2`. Forward FFTs are
/// unnormalised, so `sum |out|^2 = chirps * samples * sum |windowed in|^2`.
pub fn range_doppler_map(cube: &RadarCube, window: Window) -> Array3<Complex64> {
    let (nc, ns, na) = cube.data.dim();
    let wc = window.coefficients(nc);
    let ws = window.coefficients(ns);
    let mut planner = FftPlanner::new();
    let fft_range = planner.plan_fft_forward(ns);
    let fft_doppler = planner.plan_fft_forward(nc);

    let mut out = Array3::<Complex64>::zeros((nc, ns, na));
    let mut buf = vec![Complex64::new(0.0, 0.0); ns.max(nc)];
    for m in 0..na {
        for c in 0..nc {
            let lane = &mut buf[..ns];
            for (n, b) in lane.iter_mut().enumerate() {
                *b = cube.data[[c, n, m]] * (wc[c] * ws[n]);
            }
            fft_range.process(lane);
            for (n, b) in lane.iter().enumerate() {
                out[[c, n, m]] = *b;
            }
        }
        for n in 0..ns {
            let lane = &mut buf[..nc];
            for (c, b) in lane.iter_mut().enumerate() {
                *b = out[[c, n, m]];
            }
            fft_doppler.process(lane);
            for (c, b) in lane.iter().enumerate() {
                out[[(c + nc / 2) % nc, n, m]] = *b;
            }
        }
    }
    out
}

/// Non-coherent power over antennas, indexed `[doppler, range]`.
pub fn power_map(rd: &Array3<Complex64>) -> Array2<f64> {
    rd.map(|v| v.norm_sqr()).sum_axis(Axis(2))
}
