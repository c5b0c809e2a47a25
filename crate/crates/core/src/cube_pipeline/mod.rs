//! From radar cube to training pairs: range-Doppler FFT, CA-CFAR,
//! antenna-vector extraction, subsampling and the flip-conjugate transform.

pub mod cfar;
pub mod fmcw;
pub mod pairs;
pub mod range_doppler;

pub use cfar::{ca_cfar_2d, CfarParams, DetectionMask};
pub use fmcw::{read_cube, synth_fmcw_cube, write_cube, CubeScene, CubeTarget, FmcwParams, RadarCube};
pub use pairs::{
    extract_antenna_vectors, flip_conjugate, make_training_pairs, normalize_magnitude, stitch_labels,
    unnormalize, ApertureSplit, Direction, TrainingPair,
};
pub use range_doppler::{power_map, range_doppler_map, Window};

use crate::scene_sim::Snapshot;
use crate::Result;

/// Steps 1-2 of the design-phase pipeline: windowed range-Doppler FFT, CFAR
/// on the antenna-integrated power, and extraction of the detected cells.
pub fn detect_snapshots(cube: &RadarCube, cfar: &CfarParams) -> Result<Vec<Snapshot>> {
    let rd = range_doppler_map(cube, Window::Hamming);
    let mask = ca_cfar_2d(&power_map(&rd), cfar)?;
    extract_antenna_vectors(&rd, &mask, &cube.array)
}
