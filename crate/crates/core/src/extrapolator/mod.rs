//! Recurrent antenna-vector extrapolator.
//!
//! Two stacked LSTM layers read the normalised inner `L` samples one
//! `(re, im)` pair at a time; a dense head then predicts the next sample,
//! which is fed back until `K/2` samples exist. The left side of the array
//! reuses the same network on the flip-conjugated input.

mod io;
mod lstm;
mod model;
mod train;

use std::fmt::Debug;
use std::ops::AddAssign;

use ndarray::{s, Array2, Array3, LinalgScalar, ScalarOperand};
use num_complex::Complex64;
use num_traits::Float;

pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use lstm::{Dense, LstmLayer};
pub use model::{init_model, ExtrapolatorModel, Tape, DEFAULT_HIDDEN, INPUT_SIZE};
pub use train::{
    batch_gradient, evaluate_loss, train, train_with, Adam, EpochRecord, PairSet, TrainConfig, TrainingLog,
};

use crate::cube_pipeline::{flip_conjugate, normalize_magnitude};
use crate::{Error, Result};

/// Floating-point type the network runs in: `f32` for training and storage,
/// `f64` for gradient checks.
pub trait Scalar: Float + LinalgScalar + ScalarOperand + AddAssign + Debug + Send + Sync {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Recurrent state of both layers for a single sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<T> {
    h1: Array2<T>,
    c1: Array2<T>,
    h2: Array2<T>,
    c2: Array2<T>,
}

impl<T: Scalar> LstmState<T> {
    pub fn zeros(hidden: usize) -> Self {
        let z = Array2::zeros((1, hidden));
        Self {
            h1: z.clone(),
            c1: z.clone(),
            h2: z.clone(),
            c2: z,
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.h1.ncols()
    }
}

/// One time step through both layers and the head.
pub fn forward_step<T: Scalar>(
    model: &ExtrapolatorModel<T>,
    x: [T; 2],
    state: &LstmState<T>,
) -> Result<([T; 2], LstmState<T>)> {
    if state.hidden_size() != model.hidden_size() {
        return Err(Error::Config(format!(
            "state hidden size {} does not match model {}",
            state.hidden_size(),
            model.hidden_size()
        )));
    }
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite extrapolator input".into()));
    }
    let x = Array2::from_shape_vec((1, 2), x.to_vec()).expect("1x2 input");
    let s1 = model.lstm1.forward(&x, &state.h1, &state.c1);
    let s2 = model.lstm2.forward(&s1.h, &state.h2, &state.c2);
    let y = model.dense.forward(&s2.h);
    let next = LstmState {
        h1: s1.h,
        c1: s1.c,
        h2: s2.h,
        c2: s2.c,
    };
    Ok(([y[[0, 0]], y[[0, 1]]], next))
}

fn pack<T: Scalar>(seqs: &[Vec<Complex64>]) -> Result<Array3<T>> {
    let len = seqs.first().map_or(0, Vec::len);
    let mut out = Array3::<T>::zeros((seqs.len(), len, 2));
    for (b, seq) in seqs.iter().enumerate() {
        if seq.len() != len {
            return Err(Error::Config(format!(
                "batch mixes sequence lengths {len} and {}",
                seq.len()
            )));
        }
        for (t, z) in seq.iter().enumerate() {
            if !(z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Numeric(format!("non-finite extrapolator input at sample {t}")));
            }
            out[[b, t, 0]] = T::from(z.re).expect("float conversion");
            out[[b, t, 1]] = T::from(z.im).expect("float conversion");
        }
    }
    Ok(out)
}

fn unpack<T: Scalar>(pred: &Array3<T>) -> Vec<Vec<Complex64>> {
    pred.outer_iter()
        .map(|seq| {
            seq.outer_iter()
                .map(|p| Complex64::new(p[0].to_f64().unwrap_or(f64::NAN), p[1].to_f64().unwrap_or(f64::NAN)))
                .collect()
        })
        .collect()
}

/// Autoregressive forward extension of one normalised sequence by `steps`
/// samples.
pub fn extrapolate<T: Scalar>(model: &ExtrapolatorModel<T>, input: &[Complex64], steps: usize) -> Result<Vec<Complex64>> {
    Ok(extrapolate_batch(model, &[input.to_vec()], steps)?.remove(0))
}

/// [`extrapolate`] for many equal-length sequences in one batched rollout.
pub fn extrapolate_batch<T: Scalar>(
    model: &ExtrapolatorModel<T>,
    inputs: &[Vec<Complex64>],
    steps: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if inputs.iter().any(Vec::is_empty) {
        return Err(Error::Config("cannot extrapolate an empty sequence".into()));
    }
    let packed = pack::<T>(inputs)?;
    let pred = model.rollout(packed.view(), steps, None);
    Ok(unpack(&pred))
}

/// Extend a normalised inner snapshot by `steps` samples on both sides:
/// `[conj-flip(extrapolate(conj-flip(inner))), inner, extrapolate(inner)]`.
pub fn extrapolate_bidirectional<T: Scalar>(
    model: &ExtrapolatorModel<T>,
    inner: &[Complex64],
    steps: usize,
) -> Result<Vec<Complex64>> {
    let both = extrapolate_batch(model, &[inner.to_vec(), flip_conjugate(inner)], steps)?;
    let mut out = flip_conjugate(&both[1]);
    out.extend_from_slice(inner);
    out.extend_from_slice(&both[0]);
    Ok(out)
}

/// Build artificial apertures from raw (unnormalised) small-array snapshots.
///
/// Each snapshot is scaled to unit peak magnitude, extended by `steps` on
/// both sides, and the predictions are scaled back. The original inner
/// samples are copied through untouched.
pub fn extend_apertures<T: Scalar>(
    model: &ExtrapolatorModel<T>,
    inners: &[Vec<Complex64>],
    steps: usize,
) -> Result<Vec<Vec<Complex64>>> {
    let mut batch = Vec::with_capacity(2 * inners.len());
    let mut scales = Vec::with_capacity(inners.len());
    for inner in inners {
        let (norm, scale) = normalize_magnitude(inner)?;
        batch.push(flip_conjugate(&norm));
        batch.push(norm);
        scales.push(scale);
    }
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let packed = pack::<T>(&batch)?;
    let pred = model.rollout(packed.view(), steps, None);
    let mut out = Vec::with_capacity(inners.len());
    for (i, (inner, scale)) in inners.iter().zip(&scales).enumerate() {
        let side = |b: usize| -> Vec<Complex64> {
            pred.slice(s![b, .., ..])
                .outer_iter()
                .map(|p| Complex64::new(p[0].to_f64().unwrap_or(f64::NAN), p[1].to_f64().unwrap_or(f64::NAN)) * *scale)
                .collect()
        };
        let mut full = flip_conjugate(&side(2 * i));
        full.extend_from_slice(inner);
        full.extend(side(2 * i + 1));
        out.push(full);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array_model::{steering_vector, AngleDeg, ArrayConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_model(hidden: usize, seed: u64) -> ExtrapolatorModel<f64> {
        // Non-zero biases everywhere so every parameter affects the output.
        let mut m = init_model::<f64>(hidden, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for p in m.params_mut() {
            for v in p.iter_mut() {
                *v += rng.random_range(-0.3..0.3);
            }
        }
        m
    }

    #[test]
    fn init_shapes_and_determinism() {
        let a = init_model::<f32>(128, 5).unwrap();
        assert_eq!(a.lstm1.w.dim(), (512, 2));
        assert_eq!(a.lstm1.u.dim(), (512, 128));
        assert_eq!(a.lstm2.w.dim(), (512, 128));
        assert_eq!(a.dense.w.dim(), (2, 128));
        assert_eq!(a, init_model::<f32>(128, 5).unwrap());
        assert_ne!(a, init_model::<f32>(128, 6).unwrap());
        let bound = 1.0 / (128f32).sqrt();
        assert!(a.lstm1.w.iter().all(|v| v.abs() <= bound));
        assert!(a.lstm1.b.slice(s![128..256]).iter().all(|&v| v == 1.0));
        assert!(a.lstm1.b.slice(s![..128]).iter().all(|&v| v == 0.0));
        assert!(a.lstm2.b.slice(s![256..]).iter().all(|&v| v == 0.0));
        assert!(a.dense.b.iter().all(|&v| v == 0.0));
        assert!(matches!(init_model::<f32>(0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn zero_network_outputs_dense_bias() {
        let mut m = ExtrapolatorModel::<f64>::zeros(8);
        let (y, _) = forward_step(&m, [3.0, -1.0], &LstmState::zeros(8)).unwrap();
        assert_eq!(y, [0.0, 0.0]);
        m.dense.b[0] = 0.25;
        m.dense.b[1] = -2.0;
        let out = extrapolate(&m, &[c(1.0, 0.0), c(0.0, 1.0)], 3).unwrap();
        assert_eq!(out, vec![c(0.25, -2.0); 3]);
    }

    #[test]
    fn forward_step_rejects_bad_input() {
        let m = init_model::<f64>(4, 0).unwrap();
        assert!(matches!(
            forward_step(&m, [f64::NAN, 0.0], &LstmState::zeros(4)),
            Err(Error::Numeric(_))
        ));
        assert!(forward_step(&m, [0.0, 0.0], &LstmState::zeros(5)).is_err());
        assert!(matches!(extrapolate(&m, &[c(f64::INFINITY, 0.0)], 2), Err(Error::Numeric(_))));
    }

    #[test]
    fn head_inputs_are_tanh_bounded() {
        let m = random_model(6, 3);
        let mut state = LstmState::zeros(6);
        let mut x = [5.0, -7.0];
        for _ in 0..20 {
            let (y, next) = forward_step(&m, x, &state).unwrap();
            assert!(next.h2.iter().all(|h| h.abs() <= 1.0));
            let wsum = m.dense.w.rows().into_iter().map(|r| r.iter().map(|w| w.abs()).sum::<f64>()).fold(0.0, f64::max);
            let bmax = m.dense.b.iter().map(|b| b.abs()).fold(0.0, f64::max);
            assert!(y.iter().all(|v| v.abs() <= wsum + bmax));
            state = next;
            x = y;
        }
    }

    #[test]
    fn rollout_matches_stepwise_recursion() {
        let m = random_model(5, 11);
        let input = vec![c(0.3, -0.2), c(1.0, 0.0), c(-0.5, 0.7), c(0.1, 0.1)];
        let fast = extrapolate(&m, &input, 4).unwrap();
        let mut state = LstmState::zeros(5);
        let mut y = [0.0, 0.0];
        for z in &input {
            (y, state) = forward_step(&m, [z.re, z.im], &state).unwrap();
        }
        let mut slow = vec![c(y[0], y[1])];
        for _ in 1..4 {
            (y, state) = forward_step(&m, y, &state).unwrap();
            slow.push(c(y[0], y[1]));
        }
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(extrapolate(&m, &input, 0).unwrap().is_empty());
        assert_eq!(extrapolate(&m, &input, 4).unwrap(), fast);
    }

    #[test]
    fn bidirectional_passes_inner_through() {
        let m = init_model::<f32>(8, 2).unwrap();
        let arr = ArrayConfig::half_wavelength(10).unwrap();
        let inner = steering_vector(&arr, AngleDeg::new(12.0).unwrap());
        let out = extrapolate_bidirectional(&m, &inner, 3).unwrap();
        assert_eq!(out.len(), 16);
        assert_eq!(&out[3..13], &inner[..]);

        // A conj-palindromic input yields conj-mirrored extensions.
        let boresight = steering_vector(&arr, AngleDeg::new(0.0).unwrap());
        let out = extrapolate_bidirectional(&m, &boresight, 3).unwrap();
        assert_eq!(flip_conjugate(&out[..3]), out[13..].to_vec());

        let raw: Vec<Complex64> = inner.iter().map(|z| z * 7.5).collect();
        let ext = extend_apertures(&m, std::slice::from_ref(&raw), 3).unwrap();
        assert_eq!(&ext[0][3..13], &raw[..]);
        let direct = extrapolate_bidirectional(&m, &inner, 3).unwrap();
        for (a, b) in ext[0][..3].iter().zip(&direct[..3]) {
            assert!((a - b * 7.5).norm() < 1e-5);
        }
    }

    /// Loss used by the gradient check: plain MSE over the rollout.
    fn loss(m: &ExtrapolatorModel<f64>, x: &Array3<f64>, y: &Array3<f64>) -> f64 {
        let pred = m.rollout(x.view(), y.dim().1, None);
        (&pred - y).mapv(|d| d * d).sum() / y.len() as f64
    }

    #[test]
    fn bptt_gradient_matches_finite_differences() {
        let hidden = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Array3::from_shape_fn((2, 4, 2), |_| rng.random_range(-1.0..1.0));
        let y = Array3::from_shape_fn((2, 4, 2), |_| rng.random_range(-1.0..1.0));
        let model = random_model(hidden, 4);
        let (_, grad) = batch_gradient(&model, x.view(), y.view(), 1);
        let h = 1e-6;
        let mut worst = 0.0f64;
        for (slot, g) in grad.params().iter().enumerate() {
            for i in 0..g.len() {
                let mut plus = model.clone();
                plus.params_mut()[slot][i] += h;
                let mut minus = model.clone();
                minus.params_mut()[slot][i] -= h;
                let num = (loss(&plus, &x, &y) - loss(&minus, &x, &y)) / (2.0 * h);
                let rel = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(1e-7);
                worst = worst.max(rel);
                assert!(rel < 1e-4, "tensor {slot} index {i}: analytic {} numeric {num}", g[i]);
            }
        }
        assert!(worst < 1e-4);
    }
}
