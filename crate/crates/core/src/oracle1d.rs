//! Exact ground truth for one-row instances `A ∈ R^{1×N}`.
//!
//! With a single row the minimizer is supported on at most the column of
//! largest modulus `i*`: the support is `{i*}` iff `|a_{i*} y| > lambda/2`,
//! otherwise it is empty. Everything here follows from that rule.
//!
//! The stability support has a closed characterization. For a singleton
//! support it is `min{delta/2, eps_Z}`, where `delta` is the gap between the
//! two largest `|a_i|` (another column overtakes `i*` once it is bridged) and
//! `eps_Z` solves `(M - eps)(|y| - eps) = lambda/2` with `M = max |a_i|` (the
//! smallest product `|ã_{i*} ỹ|` reachable in the eps-ball hits the zero
//! threshold). For the empty support it is the `eps` solving
//! `(M + eps)(|y| + eps) = lambda/2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LassoInstance, SupportSet};

/// Absolute tolerance of the bisections for the Z-boundary.
pub const ROOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance1D {
    pub y: f64,
    pub a: Vec<f64>,
    pub lambda: f64,
}

impl Instance1D {
    pub fn new(y: f64, a: Vec<f64>, lambda: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::InvalidInstance(
                "a must have at least one entry".into(),
            ));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInstance(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if !y.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("entries must be finite".into()));
        }
        Ok(Self { y, a, lambda })
    }

    /// Views a one-row instance as an [`Instance1D`].
    pub fn from_instance(inst: &LassoInstance) -> Result<Self> {
        if inst.m() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: inst.m(),
            });
        }
        Ok(Self {
            y: inst.y()[0],
            a: inst.a().row(0).iter().copied().collect(),
            lambda: inst.lambda(),
        })
    }

    pub fn to_instance(&self) -> LassoInstance {
        LassoInstance::from_rows(&[self.y], std::slice::from_ref(&self.a), self.lambda)
            .expect("Instance1D invariants imply a valid instance")
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    /// `max_i |a_i|`.
    pub fn max_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Gap between the largest and second largest `|a_i|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapStat {
    pub delta: f64,
    /// 1-based index of the (first) largest `|a_i|`.
    pub argmax_index: usize,
}

/// Top two positions of `|a|`: `(i*, Some(j2))`, with `i*` the first maximizer.
fn top_two(a: &[f64]) -> (usize, Option<usize>) {
    let mut best = 0;
    for (i, v) in a.iter().enumerate().skip(1) {
        if v.abs() > a[best].abs() {
            best = i;
        }
    }
    let second = (0..a.len())
        .filter(|&i| i != best)
        .max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs()).then(j.cmp(&i)));
    (best, second)
}

pub fn delta_gap(a: &[f64]) -> Result<GapStat> {
    if a.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: a.len(),
        });
    }
    let (i, j) = top_two(a);
    let j = j.expect("len >= 2");
    Ok(GapStat {
        delta: a[i].abs() - a[j].abs(),
        argmax_index: i + 1,
    })
}

fn tie_partner(a: &[f64]) -> Option<(usize, usize)> {
    let (i, j) = top_two(a);
    j.filter(|&j| a[j].abs() == a[i].abs())
        .map(|j| (i.min(j), i.max(j)))
}

/// Support of the (unique) minimizer.
///
/// A tied maximum only matters when the support would be nonempty: with
/// `|a_max y| <= lambda/2` the minimizer is 0 regardless of ties.
pub fn support_1d(inst: &Instance1D) -> Result<SupportSet> {
    let (i, _) = top_two(&inst.a);
    if (inst.a[i] * inst.y).abs() <= 0.5 * inst.lambda {
        return Ok(SupportSet::empty());
    }
    if let Some((p, q)) = tie_partner(&inst.a) {
        return Err(Error::Tie {
            first: p + 1,
            second: q + 1,
        });
    }
    Ok(SupportSet::from_zero_based([i]))
}

/// Closed-form minimizer `x_{i*} = sgn(a_{i*} y)(|a_{i*} y| - lambda/2)/a_{i*}^2`.
pub fn solution_1d(inst: &Instance1D) -> Result<Vec<f64>> {
    let s = support_1d(inst)?;
    let mut x = vec![0.0; inst.n()];
    if let Some(&i) = s.indices().first() {
        let ay = inst.a[i] * inst.y;
        x[i] = ay.signum() * (ay.abs() - 0.5 * inst.lambda) / (inst.a[i] * inst.a[i]);
    }
    Ok(x)
}

/// Whether no perturbation of max-norm `eps` admits 0 as a minimizer.
pub fn z_event(inst: &Instance1D, eps: f64) -> bool {
    let m = (inst.max_abs() - eps).max(0.0);
    let y = (inst.y.abs() - eps).max(0.0);
    m * y > 0.5 * inst.lambda
}

/// Exact stability support (up to [`ROOT_TOL`]).
///
/// Returns 0 for ill-posed inputs: a tied maximum under a nonempty support,
/// or `|a_max y| = lambda/2` exactly.
pub fn stsp_1d(inst: &Instance1D) -> f64 {
    let half = 0.5 * inst.lambda;
    let m = inst.max_abs();
    let y = inst.y.abs();
    match support_1d(inst) {
        Err(_) => 0.0,
        Ok(s) if s.is_empty() => bisect(
            |e| (m + e) * (y + e) - half,
            0.0,
            upper_root_bracket(m, y, half),
        ),
        Ok(_) => {
            let delta = delta_gap(&inst.a).map_or(f64::INFINITY, |g| g.delta);
            let eps_z = bisect(|e| half - (m - e) * (y - e), 0.0, m.min(y));
            (0.5 * delta).min(eps_z)
        }
    }
}

fn upper_root_bracket(m: f64, y: f64, half: f64) -> f64 {
    let mut hi = half.sqrt().max(1e-300);
    while (m + hi) * (y + hi) < half {
        hi *= 2.0;
    }
    hi
}

/// Root of an increasing `f` with `f(lo) <= 0 <= f(hi)`.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    if f(lo) >= 0.0 {
        return lo;
    }
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
