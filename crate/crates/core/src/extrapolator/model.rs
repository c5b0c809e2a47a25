use ndarray::{s, Array2, Array3, ArrayView3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lstm::{Dense, LstmLayer, StepCache};
use super::Scalar;

/// Two stacked LSTM layers and a dense head mapping the top hidden state to
/// the next `(re, im)` sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolatorModel<T> {
    pub lstm1: LstmLayer<T>,
    pub lstm2: LstmLayer<T>,
    pub dense: Dense<T>,
}

pub const INPUT_SIZE: usize = 2;
pub const DEFAULT_HIDDEN: usize = 128;

impl<T: Scalar> ExtrapolatorModel<T> {
    /// All weights and biases zero. Also the shape of a gradient buffer.
    pub fn zeros(hidden: usize) -> Self {
        Self {
            lstm1: LstmLayer::zeros(INPUT_SIZE, hidden),
            lstm2: LstmLayer::zeros(hidden, hidden),
            dense: Dense::zeros(hidden, INPUT_SIZE),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.lstm1.hidden()
    }

    /// Parameter tensors as flat slices, in file order.
    pub fn params(&self) -> [&[T]; 8] {
        fn f<T>(a: Option<&[T]>) -> &[T] {
            a.expect("parameters are contiguous")
        }
        [
            f(self.lstm1.w.as_slice()),
            f(self.lstm1.u.as_slice()),
            f(self.lstm1.b.as_slice()),
            f(self.lstm2.w.as_slice()),
            f(self.lstm2.u.as_slice()),
            f(self.lstm2.b.as_slice()),
            f(self.dense.w.as_slice()),
            f(self.dense.b.as_slice()),
        ]
    }

    pub fn params_mut(&mut self) -> [&mut [T]; 8] {
        let [a, b, c] = layer_mut(&mut self.lstm1);
        let [d, e, g] = layer_mut(&mut self.lstm2);
        [
            a,
            b,
            c,
            d,
            e,
            g,
            self.dense.w.as_slice_mut().expect("parameters are contiguous"),
            self.dense.b.as_slice_mut().expect("parameters are contiguous"),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Self) {
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> ExtrapolatorModel<U> {
        let mut out = ExtrapolatorModel::<U>::zeros(self.hidden_size());
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d = U::from(*s).expect("float conversion");
            }
        }
        out
    }

    /// Autoregressive rollout over a batch.
    ///
    /// `inputs` is `[batch, L, 2]`. All `L` samples are fed as warm-up; the
    /// head output after the last one is the first prediction, and each
    /// prediction is fed back as the next input. Returns `[batch, steps, 2]`.
    /// With a tape, every step's activations are kept for [`Self::backward`].
    pub fn rollout(&self, inputs: ArrayView3<T>, steps: usize, mut tape: Option<&mut Tape<T>>) -> Array3<T> {
        let (batch, warmup, _) = inputs.dim();
        let hs = self.hidden_size();
        let mut out = Array3::<T>::zeros((batch, steps, INPUT_SIZE));
        if steps == 0 || warmup == 0 {
            return out;
        }
        if let Some(t) = tape.as_deref_mut() {
            t.clear(warmup, steps);
        }
        let mut h1 = Array2::<T>::zeros((batch, hs));
        let mut c1 = Array2::<T>::zeros((batch, hs));
        let mut h2 = Array2::<T>::zeros((batch, hs));
        let mut c2 = Array2::<T>::zeros((batch, hs));
        let total = warmup + steps - 1;
        let mut fed_back: Option<Array2<T>> = None;
        for t in 0..total {
            let x = match fed_back.take() {
                Some(y) if t >= warmup => y,
                _ => inputs.slice(s![.., t, ..]).to_owned(),
            };
            let s1 = self.lstm1.forward(&x, &h1, &c1);
            let s2 = self.lstm2.forward(&s1.h, &h2, &c2);
            h1.clone_from(&s1.h);
            c1.clone_from(&s1.c);
            h2.clone_from(&s2.h);
            c2.clone_from(&s2.c);
            if t + 1 >= warmup {
                let y = self.dense.forward(&s2.h);
                out.slice_mut(s![.., t + 1 - warmup, ..]).assign(&y);
                fed_back = Some(y);
            }
            if let Some(tape) = tape.as_deref_mut() {
                tape.lower.push(s1);
                tape.upper.push(s2);
            }
        }
        out
    }

    /// BPTT through a taped rollout. `d_pred` is the loss gradient with
    /// respect to the `[batch, steps, 2]` predictions. Gradients are added
    /// into `grad`.
    pub fn backward(&self, tape: &Tape<T>, d_pred: &Array3<T>, grad: &mut Self) {
        let (batch, steps, _) = d_pred.dim();
        let warmup = tape.warmup;
        let hs = self.hidden_size();
        let total = tape.lower.len();
        debug_assert_eq!(total, warmup + steps - 1);
        let zeros = || Array2::<T>::zeros((batch, hs));
        let (mut dh1_next, mut dc1_next) = (zeros(), zeros());
        let (mut dh2_next, mut dc2_next) = (zeros(), zeros());
        // Gradient reaching the input of step t + 1, which for fed-back
        // steps is the prediction of step t.
        let mut dx_next: Option<Array2<T>> = None;
        for t in (0..total).rev() {
            let s1 = &tape.lower[t];
            let s2 = &tape.upper[t];
            let mut dh2 = dh2_next;
            if t + 1 >= warmup {
                let mut dy = d_pred.slice(s![.., t + 1 - warmup, ..]).to_owned();
                if let Some(dx) = dx_next.take() {
                    dy += &dx;
                }
                dh2 += &self.dense.backward(&s2.h, &dy, &mut grad.dense);
            }
            let (dx2, dh2p, dc2p) = self.lstm2.backward(s2, &dh2, &dc2_next, &mut grad.lstm2);
            dh2_next = dh2p;
            dc2_next = dc2p;
            let dh1 = dx2 + &dh1_next;
            let (dx1, dh1p, dc1p) = self.lstm1.backward(s1, &dh1, &dc1_next, &mut grad.lstm1);
            dh1_next = dh1p;
            dc1_next = dc1p;
            dx_next = (t >= warmup).then_some(dx1);
        }
    }
}

fn layer_mut<T>(layer: &mut LstmLayer<T>) -> [&mut [T]; 3] {
    [
        layer.w.as_slice_mut().expect("parameters are contiguous"),
        layer.u.as_slice_mut().expect("parameters are contiguous"),
        layer.b.as_slice_mut().expect("parameters are contiguous"),
    ]
}

/// Per-step activations of a rollout, kept for the backward pass.
#[derive(Debug, Default)]
pub struct Tape<T> {
    warmup: usize,
    lower: Vec<StepCache<T>>,
    upper: Vec<StepCache<T>>,
}

impl<T> Tape<T> {
    pub fn new() -> Self {
        Self {
            warmup: 0,
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    fn clear(&mut self, warmup: usize, steps: usize) {
        self.warmup = warmup;
        self.lower.clear();
        self.upper.clear();
        self.lower.reserve(warmup + steps);
        self.upper.reserve(warmup + steps);
    }
}

/// Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero biases except the forget
/// gate at 1. Draws happen in `f64` so every precision gets the same model.
pub fn init_model<T: Scalar>(hidden: usize, seed: u64) -> crate::Result<ExtrapolatorModel<T>> {
    if hidden == 0 {
        return Err(crate::Error::Config("hidden size must be at least 1".into()));
    }
    if hidden > u16::MAX as usize {
        return Err(crate::Error::Config(format!("hidden size {hidden} exceeds {}", u16::MAX)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 1.0 / (hidden as f64).sqrt();
    let mut model = ExtrapolatorModel::<T>::zeros(hidden);
    {
        let [w1, u1, _, w2, u2, _, wd, _] = model.params_mut();
        for slot in [w1, u1, w2, u2, wd] {
            for v in slot.iter_mut() {
                *v = T::from(rng.random_range(-bound..bound)).expect("float conversion");
            }
        }
    }
    for layer in [&mut model.lstm1, &mut model.lstm2] {
        layer.b.slice_mut(s![hidden..2 * hidden]).fill(T::one());
    }
    Ok(model)
}
