//! Reference solver for `min_x ||Ax - y||_2^2 + lambda ||x||_1`.
//!
//! Cyclic coordinate descent with exact coordinate minimization, cold start at
//! zero. Each round is one sweep over all columns followed by sweeps over the
//! nonzero coordinates only, until their updates fall to rounding level. Every
//! sweep counts against the budget. After each round the duality gap is
//! evaluated at the dual point
//! obtained by scaling the residual `r = y - Ax` so that
//! `||Aᵀ r_scaled||_inf <= lambda / 2`; that gap is a certified bound on the
//! objective suboptimality of the returned `x`.
//!
//! Note there is no factor 1/2 on the quadratic term, so stationarity reads
//! `2Aᵀ(Ax - y) ∈ -lambda ∂||x||_1` and the equicorrelation level is `lambda/2`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LassoInstance, SupportSet};

pub const DEFAULT_MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoSolution {
    pub x: Vec<f64>,
    /// Certified upper bound on `objective(x) - min objective`.
    pub gap_bound: f64,
    /// Largest violation of the KKT conditions, see [`kkt_residuals`].
    pub kkt_inf: f64,
    /// Sweeps performed, counting full and active-set sweeps alike.
    pub iterations: usize,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquicorrelationSet {
    pub indices: SupportSet,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub max_sweeps: usize,
}

impl SolverOptions {
    pub fn new(gap_tol: f64) -> Self {
        Self {
            gap_tol,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }

    pub fn max_sweeps(mut self, sweeps: usize) -> Self {
        self.max_sweeps = sweeps;
        self
    }
}

pub fn objective(inst: &LassoInstance, x: &[f64]) -> Result<f64> {
    if x.len() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: x.len(),
        });
    }
    let xv = DVector::from_column_slice(x);
    let r = inst.a() * xv - inst.y();
    Ok(r.norm_squared() + inst.lambda() * x.iter().map(|v| v.abs()).sum::<f64>())
}

/// Solves with the default sweep budget.
pub fn solve(inst: &LassoInstance, gap_tol: f64) -> Result<LassoSolution> {
    solve_with(inst, &SolverOptions::new(gap_tol))
}

pub fn solve_with(inst: &LassoInstance, opts: &SolverOptions) -> Result<LassoSolution> {
    if !(opts.gap_tol > 0.0) {
        return Err(Error::Domain(format!(
            "gap_tol must be positive, got {}",
            opts.gap_tol
        )));
    }
    let a = inst.a();
    let y = inst.y();
    let n = inst.n();
    let half_lambda = 0.5 * inst.lambda();
    let col_sq: Vec<f64> = a.column_iter().map(|c| c.norm_squared()).collect();

    let mut x = vec![0.0; n];
    if col_sq.iter().all(|&c| c == 0.0) {
        return Ok(finish(inst, x, 0.0, 0));
    }

    let mut r = y.clone();
    let mut gap = duality_gap(inst, &x, &r);
    if gap <= opts.gap_tol {
        return Ok(finish(inst, x, gap, 0));
    }

    // Residual changes below this are rounding noise.
    let noise = f64::EPSILON * (1.0 + y.amax());
    let all: Vec<usize> = (0..n).filter(|&j| col_sq[j] > 0.0).collect();
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut changed = cd_pass(a, &col_sq, half_lambda, &all, &mut x, &mut r) > 0.0;

        // Cycle over the nonzero coordinates until they settle.
        let active: Vec<usize> = all.iter().copied().filter(|&j| x[j] != 0.0).collect();
        while sweeps < opts.max_sweeps && !active.is_empty() {
            sweeps += 1;
            let moved = cd_pass(a, &col_sq, half_lambda, &active, &mut x, &mut r);
            changed |= moved > 0.0;
            if moved <= noise {
                break;
            }
        }

        // Fresh residual so the gap is not polluted by accumulated drift.
        r = y - a * DVector::from_column_slice(&x);
        gap = duality_gap(inst, &x, &r);
        if gap <= opts.gap_tol {
            return Ok(finish(inst, x, gap, sweeps));
        }
        if !changed {
            // Fixed point of the sweep: rounding has the final word.
            return Err(Error::Budget {
                iterations: sweeps,
                gap,
                x,
            });
        }
    }
    Err(Error::Budget {
        iterations: sweeps,
        gap,
        x,
    })
}

/// One cyclic pass of exact coordinate minimization over `coords`. Returns the
/// largest change `|step| ||A_j||` of the residual.
fn cd_pass(
    a: &nalgebra::DMatrix<f64>,
    col_sq: &[f64],
    half_lambda: f64,
    coords: &[usize],
    x: &mut [f64],
    r: &mut DVector<f64>,
) -> f64 {
    let mut moved: f64 = 0.0;
    for &j in coords {
        let col = a.column(j);
        let rho = col.dot(r) + col_sq[j] * x[j];
        let next = soft_threshold(rho, half_lambda) / col_sq[j];
        let step = next - x[j];
        if step != 0.0 {
            r.axpy(-step, &col, 1.0);
            x[j] = next;
            moved = moved.max(step.abs() * col_sq[j].sqrt());
        }
    }
    moved
}

fn finish(inst: &LassoInstance, x: Vec<f64>, gap: f64, iterations: usize) -> LassoSolution {
    let (kkt_inf, _) = kkt_residuals(inst, &x);
    let objective = objective(inst, &x).expect("dimensions checked");
    LassoSolution {
        x,
        gap_bound: gap,
        kkt_inf,
        iterations,
        objective,
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Primal minus dual objective at the scaled-residual dual point.
///
/// With `u = -2 s r` and `s = min(1, lambda / (2 ||Aᵀ r||_inf))` the dual value is
/// `2 s <r, y> - s^2 ||r||^2`.
fn duality_gap(inst: &LassoInstance, x: &[f64], r: &DVector<f64>) -> f64 {
    let lambda = inst.lambda();
    let primal = r.norm_squared() + lambda * x.iter().map(|v| v.abs()).sum::<f64>();
    let corr = inst.a().tr_mul(r).amax();
    let s = if corr > 0.0 {
        (lambda / (2.0 * corr)).min(1.0)
    } else {
        1.0
    };
    let dual = 2.0 * s * r.dot(inst.y()) - s * s * r.norm_squared();
    (primal - dual).max(0.0)
}

/// Returns `(kkt_inf, corr)` with `corr_j = A_jᵀ(Ax - y)`.
///
/// Off the support the violation is `max(0, |corr_j| - lambda/2)`; on the
/// support it is `|corr_j + lambda sgn(x_j) / 2|`.
pub fn kkt_residuals(inst: &LassoInstance, x: &[f64]) -> (f64, Vec<f64>) {
    let xv = DVector::from_column_slice(x);
    let res = inst.a() * xv - inst.y();
    let corr: Vec<f64> = inst.a().tr_mul(&res).iter().copied().collect();
    let half = 0.5 * inst.lambda();
    let kkt = corr
        .iter()
        .zip(x)
        .map(|(&c, &xj)| {
            if xj == 0.0 {
                (c.abs() - half).max(0.0)
            } else {
                (c + half * xj.signum()).abs()
            }
        })
        .fold(0.0, f64::max);
    (kkt, corr)
}

/// `{j : |A_jᵀ(Ax - y)| >= lambda/2 - tol}`.
pub fn equicorrelation(inst: &LassoInstance, x: &[f64], tol: f64) -> EquicorrelationSet {
    let (_, corr) = kkt_residuals(inst, x);
    let level = 0.5 * inst.lambda() - tol;
    EquicorrelationSet {
        indices: SupportSet::from_zero_based(
            corr.iter()
                .enumerate()
                .filter(|(_, c)| c.abs() >= level)
                .map(|(j, _)| j),
        ),
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::support_from_threshold;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn inst(y: &[f64], rows: &[Vec<f64>], lambda: f64) -> LassoInstance {
        LassoInstance::from_rows(y, rows, lambda).unwrap()
    }

    #[test]
    fn objective_examples() {
        assert_eq!(
            objective(&inst(&[1.0], &[vec![1.0]], 2.0), &[0.0]).unwrap(),
            1.0
        );
        assert_eq!(
            objective(&inst(&[1.0], &[vec![1.0]], 2.0), &[1.0]).unwrap(),
            2.0
        );
        assert_relative_eq!(
            objective(&inst(&[2.0], &[vec![1.0]], 1.0), &[1.5]).unwrap(),
            1.75,
            epsilon = 1e-15
        );
        assert!(objective(&inst(&[1.0], &[vec![1.0]], 1.0), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn zero_solution_when_correlation_small() {
        let s = solve(&inst(&[1.0], &[vec![1.0]], 2.0), 1e-10).unwrap();
        assert_eq!(s.x, vec![0.0]);
        assert!(s.gap_bound <= 1e-10);
    }

    #[test]
    fn scalar_closed_form() {
        let s = solve(&inst(&[1.0], &[vec![1.0]], 1.0), 1e-12).unwrap();
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn one_row_two_columns() {
        let i = inst(&[1.0], &[vec![0.9, 0.3]], 0.01);
        let s = solve(&i, 1e-14).unwrap();
        assert_eq!(support_from_threshold(&s.x, 1e-6).one_based(), vec![1]);
        assert_relative_eq!(s.x[0], (0.9 - 0.005) / 0.81, epsilon = 1e-6);
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let s = solve(
            &inst(&[1.0, 2.0], &[vec![0.0, 0.0], vec![0.0, 0.0]], 1.0),
            1e-9,
        )
        .unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert_eq!(s.gap_bound, 0.0);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        assert!(solve(&inst(&[1.0], &[vec![1.0]], 1.0), 0.0).is_err());
    }

    #[test]
    fn budget_error_is_explicit() {
        let i = inst(&[1.0, 0.5], &[vec![1.0, 0.999], vec![0.2, 0.21]], 0.01);
        let opts = SolverOptions::new(1e-300).max_sweeps(3);
        match solve_with(&i, &opts) {
            Err(Error::Budget { iterations, x, .. }) => {
                assert!(iterations <= 3);
                assert_eq!(x.len(), 2);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn kkt_examples() {
        let (k, c) = kkt_residuals(&inst(&[1.0], &[vec![1.0]], 2.0), &[0.0]);
        assert_eq!(k, 0.0);
        assert_eq!(c, vec![-1.0]);
        let (k, _) = kkt_residuals(&inst(&[1.0], &[vec![1.0]], 1.0), &[0.0]);
        assert_relative_eq!(k, 0.5);
        let (k, _) = kkt_residuals(&inst(&[1.0], &[vec![1.0]], 1.0), &[0.5]);
        assert!(k <= 1e-12);
    }

    #[test]
    fn equicorrelation_examples() {
        let i = inst(&[1.0], &[vec![0.9, 0.3]], 0.01);
        let s = solve(&i, 1e-14).unwrap();
        let e = equicorrelation(&i, &s.x, 1e-8);
        assert!(e.indices.contains(0));

        let small = inst(&[1.0], &[vec![0.001, 0.002]], 0.01);
        assert!(equicorrelation(&small, &[0.0, 0.0], 1e-6)
            .indices
            .is_empty());

        let dup = inst(&[1.0], &[vec![1.0, 1.0]], 1.0);
        let s = solve(&dup, 1e-14).unwrap();
        assert_eq!(
            equicorrelation(&dup, &s.x, 1e-7).indices.one_based(),
            vec![1, 2]
        );
    }

    /// Brute-force grid minimizer for N = 2, refined around the best point.
    fn grid_min(i: &LassoInstance) -> f64 {
        let (mut cx, mut cy, mut half) = (0.0, 0.0, 4.0);
        let mut best = f64::INFINITY;
        for _ in 0..30 {
            let mut arg = (cx, cy);
            for p in 0..=40 {
                for q in 0..=40 {
                    let x0 = cx - half + 2.0 * half * p as f64 / 40.0;
                    let x1 = cy - half + 2.0 * half * q as f64 / 40.0;
                    let v = objective(i, &[x0, x1]).unwrap();
                    if v < best {
                        best = v;
                        arg = (x0, x1);
                    }
                }
            }
            (cx, cy) = arg;
            half *= 0.3;
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn gap_bound_dominates_suboptimality(
            vals in proptest::collection::vec(-2.0f64..2.0, 4),
            y in proptest::collection::vec(-2.0f64..2.0, 2),
            lambda in 0.05f64..2.0,
        ) {
            let i = LassoInstance::new(DVector::from_vec(y), DMatrix::from_row_slice(2, 2, &vals), lambda).unwrap();
            let s = solve(&i, 1e-10).unwrap();
            prop_assert!(s.objective <= grid_min(&i) + s.gap_bound + 1e-12);
            // Support sits inside the equicorrelation set.
            let e = equicorrelation(&i, &s.x, 10.0 * s.gap_bound.sqrt() * (1.0 + i.a().norm()) + 1e-9);
            prop_assert!(support_from_threshold(&s.x, 1e-9).is_subset(&e.indices));
        }

        #[test]
        fn column_permutation_is_equivariant(
            vals in proptest::collection::vec(-2.0f64..2.0, 9),
            y in proptest::collection::vec(-2.0f64..2.0, 3),
            lambda in 0.05f64..1.0,
            shift in 1usize..3,
        ) {
            let a = DMatrix::from_row_slice(3, 3, &vals);
            let perm: Vec<usize> = (0..3).map(|j| (j + shift) % 3).collect();
            let b = DMatrix::from_fn(3, 3, |r, c| a[(r, perm[c])]);
            let i1 = LassoInstance::new(DVector::from_vec(y.clone()), a, lambda).unwrap();
            let i2 = LassoInstance::new(DVector::from_vec(y), b, lambda).unwrap();
            let s1 = solve(&i1, 1e-13).unwrap();
            let s2 = solve(&i2, 1e-13).unwrap();
            for c in 0..3 {
                prop_assert!((s2.x[c] - s1.x[perm[c]]).abs() <= 1e-5 * (1.0 + s1.x[perm[c]].abs()));
            }
        }
    }
}
