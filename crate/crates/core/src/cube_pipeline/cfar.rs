use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Square-ring CA-CFAR window: `guard_cells` and `training_cells` per side
/// in both dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CfarParams {
    pub guard_cells: usize,
    pub training_cells: usize,
    pub pfa: f64,
}

impl Default for CfarParams {
    fn default() -> Self {
        Self {
            guard_cells: 2,
            training_cells: 8,
            pfa: 1e-3,
        }
    }
}

impl CfarParams {
    pub fn validate(&self) -> Result<()> {
        if self.training_cells == 0 {
            return Err(Error::Config("CA-CFAR needs at least one training cell per side".into()));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::Config(format!("CFAR Pfa {} outside (0, 1)", self.pfa)));
        }
        Ok(())
    }

    fn half_width(&self) -> usize {
        self.guard_cells + self.training_cells
    }
}

/// CA-CFAR threshold multiplier for `n` exponentially distributed training cells.
pub fn cfar_alpha(n: usize, pfa: f64) -> f64 {
    let n = n as f64;
    n * (pfa.powf(-1.0 / n) - 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMask {
    /// `[doppler, range]`.
    pub mask: Array2<bool>,
    pub params: CfarParams,
}

impl DetectionMask {
    /// Detected `(doppler, range)` cells in row-major order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.mask
            .indexed_iter()
            .filter_map(|(idx, hit)| hit.then_some(idx))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|h| **h).count()
    }
}

/// Summed-area table with a zero row/column in front.
struct Integral {
    sums: Array2<f64>,
}

impl Integral {
    fn new(map: &Array2<f64>) -> Self {
        let (rows, cols) = map.dim();
        let mut sums = Array2::<f64>::zeros((rows + 1, cols + 1));
        for r in 0..rows {
            let mut run = 0.0;
            for c in 0..cols {
                run += map[[r, c]];
                sums[[r + 1, c + 1]] = sums[[r, c + 1]] + run;
            }
        }
        Self { sums }
    }

    /// Sum over rows `r0..r1` and columns `c0..c1` (half-open).
    fn sum(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> f64 {
        self.sums[[r1, c1]] - self.sums[[r0, c1]] - self.sums[[r1, c0]] + self.sums[[r0, c0]]
    }
}

fn clipped(centre: usize, half: usize, len: usize) -> (usize, usize) {
    (centre.saturating_sub(half), (centre + half + 1).min(len))
}

/// Two-dimensional cell-averaging CFAR on a power map.
///
/// At the map edges the training window is truncated instead of wrapped, and
/// the threshold multiplier is recomputed for the reduced cell count.
pub fn ca_cfar_2d(power: &Array2<f64>, params: &CfarParams) -> Result<DetectionMask> {
    params.validate()?;
    let (rows, cols) = power.dim();
    let span = 2 * params.half_width() + 1;
    if span > rows || span > cols {
        return Err(Error::Config(format!(
            "CFAR window of {span} cells does not fit a {rows}x{cols} map"
        )));
    }
    let table = Integral::new(power);
    let outer = params.half_width();
    let guard = params.guard_cells;
    let mut alpha_cache = std::collections::HashMap::new();
    let mask = Array2::from_shape_fn((rows, cols), |(r, c)| {
        let (r0, r1) = clipped(r, outer, rows);
        let (c0, c1) = clipped(c, outer, cols);
        let (g0, g1) = clipped(r, guard, rows);
        let (h0, h1) = clipped(c, guard, cols);
        let n = (r1 - r0) * (c1 - c0) - (g1 - g0) * (h1 - h0);
        if n == 0 {
            return false;
        }
        let noise = (table.sum(r0, r1, c0, c1) - table.sum(g0, g1, h0, h1)) / n as f64;
        let alpha = *alpha_cache
            .entry(n)
            .or_insert_with(|| cfar_alpha(n, params.pfa));
        power[[r, c]] > alpha * noise
    });
    Ok(DetectionMask { mask, params: *params })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Exp1;

    #[test]
    fn constant_map_has_no_detections() {
        let map = Array2::from_elem((40, 40), 3.0);
        let m = ca_cfar_2d(&map, &CfarParams::default()).unwrap();
        assert_eq!(m.count(), 0);
    }

    #[test]
    fn isolated_peak_is_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut map = Array2::from_shape_fn((64, 64), |_| 1.0 + 0.01 * rng.random::<f64>());
        map[[20, 33]] = 1e4;
        let m = ca_cfar_2d(&map, &CfarParams::default()).unwrap();
        assert_eq!(m.cells(), vec![(20, 33)]);
    }

    #[test]
    fn alpha_matches_design_pfa() {
        // For exponential noise Pfa = (1 + alpha / N)^-N exactly.
        for n in [8, 64, 1344] {
            let a = cfar_alpha(n, 1e-3);
            let pfa = (1.0 + a / n as f64).powf(-(n as f64));
            assert!((pfa - 1e-3).abs() < 1e-12);
        }
    }

    #[test]
    fn edge_cells_use_truncated_windows() {
        // A brute-force average over the truncated ring must agree with the
        // integral-image path for an edge cell.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = Array2::from_shape_fn((30, 30), |_| rng.sample::<f64, _>(Exp1));
        let p = CfarParams {
            guard_cells: 1,
            training_cells: 3,
            pfa: 0.2,
        };
        let mask = ca_cfar_2d(&map, &p).unwrap();
        for (r, c) in [(0usize, 0usize), (0, 15), (29, 2), (14, 14)] {
            let mut sum = 0.0;
            let mut n = 0;
            for rr in r.saturating_sub(4)..(r + 5).min(30) {
                for cc in c.saturating_sub(4)..(c + 5).min(30) {
                    if rr.abs_diff(r) <= 1 && cc.abs_diff(c) <= 1 {
                        continue;
                    }
                    sum += map[[rr, cc]];
                    n += 1;
                }
            }
            let hit = map[[r, c]] > cfar_alpha(n, 0.2) * sum / n as f64;
            assert_eq!(mask.mask[[r, c]], hit, "cell {r},{c}");
        }
    }

    #[test]
    fn configuration_errors() {
        let map = Array2::from_elem((10, 10), 1.0);
        assert!(matches!(ca_cfar_2d(&map, &CfarParams::default()), Err(Error::Config(_))));
        let zero_train = CfarParams {
            training_cells: 0,
            ..Default::default()
        };
        assert!(ca_cfar_2d(&Array2::from_elem((64, 64), 1.0), &zero_train).is_err());
        let bad_pfa = CfarParams {
            pfa: 1.0,
            ..Default::default()
        };
        assert!(ca_cfar_2d(&Array2::from_elem((64, 64), 1.0), &bad_pfa).is_err());
    }
}
