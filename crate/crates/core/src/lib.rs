//! Angular-resolution enhancement for MIMO radar by neural extrapolation of
//! the virtual antenna vector.
//!
//! A recurrent extrapolator is trained on snapshots from a large virtual
//! array: the inner `L` elements are the input and the `K = M - L` outer
//! elements are the labels. At run time the same network extends a small
//! `L`-element array to an artificial `M`-element aperture before angle
//! estimation.
//!
//! Modules:
//! - [`array_model`]: ULA steering vectors, derivatives and beamwidth.
//! - [`scene_sim`]: Monte-Carlo scenes, snapshot synthesis, datasets.
//! - [`cube_pipeline`]: FMCW cube synthesis, range-Doppler FFT, CA-CFAR,
//!   antenna-vector extraction and training-pair generation.
//! - [`extrapolator`]: stacked LSTM extrapolator, BPTT training with Adam.
//! - [`doa`]: Fourier beamformer, single-snapshot MUSIC, peak picking.
//! - [`evaluation`]: truth matching, ROC, separation histograms, MSE, CRB.
//! - [`cli`]: configuration, file formats and the command implementations.

// `!(x > 0.0)` guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_model;
pub mod cli;
pub mod cube_pipeline;
pub mod dataset;
pub mod doa;
pub mod error;
pub mod evaluation;
pub mod extrapolator;
pub mod scene_sim;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use array_model::{AngleDeg, ArrayConfig};
pub use scene_sim::{Scene, SimParams, Snapshot, Target};
