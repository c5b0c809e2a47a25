//! Batched LSTM cell and dense head with hand-written backward passes.
//!
//! Gate rows are stacked `[input, forget, candidate, output]`, so `w` is
//! `[4H x in]`, `u` is `[4H x H]` and `b` is `[4H]`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, Axis};

use super::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayer<T> {
    pub w: Array2<T>,
    pub u: Array2<T>,
    pub b: Array1<T>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Debug, Clone)]
pub struct StepCache<T> {
    x: Array2<T>,
    h_prev: Array2<T>,
    c_prev: Array2<T>,
    /// Activated gates `[i f g o]`, `[B x 4H]`.
    gates: Array2<T>,
    tanh_c: Array2<T>,
    pub h: Array2<T>,
    pub c: Array2<T>,
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

impl<T: Scalar> LstmLayer<T> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w: Array2::zeros((4 * hidden, input)),
            u: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn input_size(&self) -> usize {
        self.w.ncols()
    }

    pub fn forward(&self, x: &Array2<T>, h: &Array2<T>, c: &Array2<T>) -> StepCache<T> {
        let hs = self.hidden();
        let batch = x.nrows();
        let mut z = Array2::<T>::zeros((batch, 4 * hs));
        for mut row in z.rows_mut() {
            row.assign(&self.b);
        }
        general_mat_mul(T::one(), x, &self.w.t(), T::one(), &mut z);
        general_mat_mul(T::one(), h, &self.u.t(), T::one(), &mut z);

        let mut c_new = Array2::<T>::zeros((batch, hs));
        let mut tanh_c = Array2::<T>::zeros((batch, hs));
        let mut h_new = Array2::<T>::zeros((batch, hs));
        for r in 0..batch {
            let zr = z.row_mut(r).into_slice().expect("standard layout");
            let cp = c.row(r);
            let cn = c_new.row_mut(r).into_slice().expect("standard layout");
            let tc = tanh_c.row_mut(r).into_slice().expect("standard layout");
            let hn = h_new.row_mut(r).into_slice().expect("standard layout");
            for j in 0..hs {
                let i = sigmoid(zr[j]);
                let f = sigmoid(zr[hs + j]);
                let g = zr[2 * hs + j].tanh();
                let o = sigmoid(zr[3 * hs + j]);
                zr[j] = i;
                zr[hs + j] = f;
                zr[2 * hs + j] = g;
                zr[3 * hs + j] = o;
                let cell = f * cp[j] + i * g;
                let t = cell.tanh();
                cn[j] = cell;
                tc[j] = t;
                hn[j] = o * t;
            }
        }
        StepCache {
            x: x.clone(),
            h_prev: h.clone(),
            c_prev: c.clone(),
            gates: z,
            tanh_c,
            h: h_new,
            c: c_new,
        }
    }

    /// Backward through one step. `dh` is the total gradient reaching this
    /// step's hidden output and `dc` the gradient from the next step's cell.
    /// Parameter gradients are accumulated into `grad`; returns
    /// `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &self,
        cache: &StepCache<T>,
        dh: &Array2<T>,
        dc: &Array2<T>,
        grad: &mut LstmLayer<T>,
    ) -> (Array2<T>, Array2<T>, Array2<T>) {
        let hs = self.hidden();
        let batch = dh.nrows();
        let one = T::one();
        let mut dz = Array2::<T>::zeros((batch, 4 * hs));
        let mut dc_prev = Array2::<T>::zeros((batch, hs));
        for r in 0..batch {
            let gates = cache.gates.row(r);
            let tc = cache.tanh_c.row(r);
            let cp = cache.c_prev.row(r);
            let dhr = dh.row(r);
            let dcr = dc.row(r);
            let dzr = dz.row_mut(r).into_slice().expect("standard layout");
            let dcp = dc_prev.row_mut(r).into_slice().expect("standard layout");
            for j in 0..hs {
                let (i, f, g, o) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
                let t = tc[j];
                let dcell = dcr[j] + dhr[j] * o * (one - t * t);
                dzr[j] = dcell * g * i * (one - i);
                dzr[hs + j] = dcell * cp[j] * f * (one - f);
                dzr[2 * hs + j] = dcell * i * (one - g * g);
                dzr[3 * hs + j] = dhr[j] * t * o * (one - o);
                dcp[j] = dcell * f;
            }
        }
        general_mat_mul(one, &dz.t(), &cache.x, one, &mut grad.w);
        general_mat_mul(one, &dz.t(), &cache.h_prev, one, &mut grad.u);
        grad.b += &dz.sum_axis(Axis(0));
        let dx = dz.dot(&self.w);
        let dh_prev = dz.dot(&self.u);
        (dx, dh_prev, dc_prev)
    }
}

/// Linear output head `y = h W^T + b`, `W` is `[out x H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub w: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            w: Array2::zeros((output, input)),
            b: Array1::zeros(output),
        }
    }

    pub fn forward(&self, h: &Array2<T>) -> Array2<T> {
        let mut y = Array2::<T>::zeros((h.nrows(), self.w.nrows()));
        for mut row in y.rows_mut() {
            row.assign(&self.b);
        }
        general_mat_mul(T::one(), h, &self.w.t(), T::one(), &mut y);
        y
    }

    /// Accumulates parameter gradients and returns `dh`.
    pub fn backward(&self, h: &Array2<T>, dy: &Array2<T>, grad: &mut Dense<T>) -> Array2<T> {
        general_mat_mul(T::one(), &dy.t(), h, T::one(), &mut grad.w);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w)
    }
}
