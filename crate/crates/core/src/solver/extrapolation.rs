//! Minimal polynomial extrapolation (MPE) of a vector sequence.
//!
//! Given iterates `x_0, .., x_{k+1}` with differences `u_j = x_{j+1} - x_j`,
//! MPE solves the least-squares problem
//! `min || sum_{j<k} c_j u_j + u_k ||` and returns the affine combination
//! `sum_{j<=k} gamma_j x_j` with `gamma_j = c_j / sum(c)` and `c_k = 1`.
//! For a linear iteration `x -> M x + b` whose error lies in a
//! `k+1`-dimensional invariant subspace the result is the exact fixed point.

use nalgebra::{DMatrix, DVector};

/// Relative singular value cutoff below which the difference matrix is
/// treated as rank deficient.
const RANK_CUTOFF: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct Extrapolated {
    pub point: Vec<f64>,
    /// `true` when the least-squares system was unusable and `point` is the
    /// last iterate of the history.
    pub fell_back: bool,
}

/// Number of iterates consumed by one MPE cycle with `cycle_length`
/// coefficients: `cycle_length + 1` differences.
pub fn history_len(cycle_length: usize) -> usize {
    cycle_length + 2
}

/// Extrapolate from consecutive iterates (oldest first). Histories shorter
/// than three vectors fall back to the last iterate.
pub fn mpe(history: &[Vec<f64>]) -> Extrapolated {
    let fallback = || Extrapolated {
        point: history.last().cloned().unwrap_or_default(),
        fell_back: true,
    };
    if history.len() < 3 {
        return fallback();
    }
    let dim = history[0].len();
    if history.iter().any(|x| x.len() != dim) || dim == 0 {
        return fallback();
    }
    let k = history.len() - 2;
    let diffs = DMatrix::from_fn(dim, k + 1, |r, c| history[c + 1][r] - history[c][r]);
    let lhs = diffs.columns(0, k).into_owned();
    let rhs = -diffs.column(k).into_owned();

    let svd = lhs.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || !(smin > RANK_CUTOFF * smax) {
        return fallback();
    }
    let coeffs: DVector<f64> = match svd.solve(&rhs, 0.0) {
        Ok(c) => c,
        Err(_) => return fallback(),
    };
    let mut c: Vec<f64> = coeffs.iter().copied().collect();
    c.push(1.0);
    let sum: f64 = c.iter().sum();
    let mag: f64 = c.iter().map(|v| v.abs()).sum();
    if !(sum.abs() > 1e-12 * mag) || !sum.is_finite() {
        return fallback();
    }
    let mut point = vec![0.0; dim];
    for (cj, xj) in c.iter().zip(history) {
        let w = cj / sum;
        for (p, x) in point.iter_mut().zip(xj) {
            *p += w * x;
        }
    }
    Extrapolated {
        point,
        fell_back: false,
    }
}
