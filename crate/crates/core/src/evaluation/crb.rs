//! Deterministic single-snapshot Cramér-Rao bound on the target angles.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::array_model::{steering_derivative, steering_vector, ArrayConfig};
use crate::scene_sim::Scene;
use crate::{Error, Result};

/// Bound on the angle covariance, `[p x p]`, in rad^2.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbMatrix {
    pub matrix: DMatrix<f64>,
}

impl CrbMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Per-target variance bounds in rad^2.
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().copied().collect()
    }

    /// Per-target variance bounds in deg^2.
    pub fn diagonal_deg2(&self) -> Vec<f64> {
        let k = 180.0 / std::f64::consts::PI;
        self.diagonal().into_iter().map(|v| v * k * k).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        (&self.matrix - self.matrix.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = (&self.matrix + self.matrix.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }
}

fn columns(vectors: Vec<Vec<Complex64>>, rows: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, vectors.len(), |r, c| vectors[c][r])
}

/// Relative eigenvalue floor below which `A^H A` counts as rank deficient.
const RANK_TOL: f64 = 1e-12;

/// `sigma^2 / 2 * (Re[S^H D^H P_perp D S])^-1` for the scene's targets on
/// `cfg`, with unit noise variance and `S` the diagonal of complex target
/// amplitudes.
pub fn crb(scene: &Scene, cfg: &ArrayConfig) -> Result<CrbMatrix> {
    crb_with_noise(scene, cfg, 1.0)
}

pub fn crb_with_noise(scene: &Scene, cfg: &ArrayConfig, noise_variance: f64) -> Result<CrbMatrix> {
    let p = scene.targets.len();
    if p == 0 {
        return Err(Error::Config("CRB of a scene without targets".into()));
    }
    if !(noise_variance > 0.0) {
        return Err(Error::Config(format!("noise variance {noise_variance}")));
    }
    let m = cfg.num_elements();
    let angles = scene.angles();
    let a = columns(angles.iter().map(|t| steering_vector(cfg, *t)).collect(), m);
    let d = columns(angles.iter().map(|t| steering_derivative(cfg, *t)).collect(), m);
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(scene.amplitudes()));

    let gram = a.adjoint() * &a;
    let eig = gram.clone().symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(lo > RANK_TOL * hi) {
        return Err(Error::Singular("steering matrix is rank deficient (coincident angles)".into()));
    }
    let gram_inv = gram
        .try_inverse()
        .ok_or_else(|| Error::Singular("A^H A is not invertible".into()))?;
    let proj = DMatrix::<Complex64>::identity(m, m) - &a * gram_inv * a.adjoint();
    let ds = d * &s;
    let inner = ds.adjoint() * proj * ds;
    let fisher = inner.map(|z| z.re);
    let fisher = (&fisher + fisher.transpose()) * 0.5;
    let inv = fisher
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Singular("angle information matrix is not positive definite".into()))?;
    let matrix = inv * (noise_variance / 2.0);
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite CRB".into()));
    }
    Ok(CrbMatrix { matrix })
}
