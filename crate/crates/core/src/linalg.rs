//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Above this size the spectral norm switches from a dense SVD to power
/// iteration.
pub const DENSE_SVD_LIMIT: usize = 512;
const POWER_REL_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

/// Largest singular value of `a`.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    if a.nrows() <= DENSE_SVD_LIMIT && a.ncols() <= DENSE_SVD_LIMIT {
        a.singular_values().max()
    } else {
        power_spectral_norm(a)
    }
}

fn power_spectral_norm(a: &DMatrix<f64>) -> f64 {
    // Iterate on the smaller Gram matrix without forming it.
    let wide = a.ncols() > a.nrows();
    let dim = if wide { a.nrows() } else { a.ncols() };
    let mut v = DVector::from_fn(dim, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = if wide {
            a * (a.transpose() * &v)
        } else {
            a.transpose() * (a * &v)
        };
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / nw;
        if (next - est).abs() <= POWER_REL_TOL * next {
            return next;
        }
        est = next;
    }
    est
}

/// Columns of `a` selected by `cols`, in order.
pub fn select_columns(a: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Square of the smallest of the `k` singular values of an `m x k` matrix,
/// i.e. the smallest eigenvalue of `AᵀA`. Zero when `k > m`.
pub fn min_gram_eigenvalue(a_s: &DMatrix<f64>) -> f64 {
    let k = a_s.ncols();
    if k == 0 {
        return f64::INFINITY;
    }
    if k > a_s.nrows() {
        return 0.0;
    }
    let s = a_s.singular_values().min();
    s * s
}

/// Smallest singular value among the `k` columns (zero when `k > m`).
pub fn min_singular_value(a_s: &DMatrix<f64>) -> f64 {
    let g = min_gram_eigenvalue(a_s);
    if g.is_infinite() {
        g
    } else {
        g.sqrt()
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `max_i sum_j |M_ij|`.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest column 2-norm, the operator norm of `Aᵀ` from l2 to l-infinity.
pub fn max_column_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}
