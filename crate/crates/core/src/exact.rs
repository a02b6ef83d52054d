//! Exact rational arithmetic for instances read at finite precision.
//!
//! A support is proven by solving the KKT system of a candidate `(S, signs)`
//! in rationals: `A_SᵀA_S x_S = A_Sᵀy - (lambda/2) signs`, with every `x_i`
//! carrying its sign and `|A_jᵀ(Ax - y)| < lambda/2` strictly off `S`. With
//! `A_S` of full column rank that makes `x` the unique minimizer, and it also
//! yields `sigma1` and `sigma3` exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::condition::stsp_lower_bound_split;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{LassoInstance, SupportSet};

pub type Q = BigRational;

/// Exact value of a finite `f64`.
pub fn q(v: f64) -> Q {
    BigRational::from_float(v).expect("finite value")
}

pub fn pow2(n: u32) -> Q {
    Q::from_integer(BigInt::one() << n as usize)
}

/// Nearest `f64`.
pub fn to_f64(v: &Q) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Largest `f64` not above `v`.
pub fn to_f64_down(v: &Q) -> f64 {
    let f = to_f64(v);
    if f.is_finite() && q(f) > *v {
        f.next_down()
    } else {
        f
    }
}

/// Smallest `f64` not below `v`.
pub fn to_f64_up(v: &Q) -> f64 {
    let f = to_f64(v);
    if f.is_finite() && q(f) < *v {
        f.next_up()
    } else {
        f
    }
}

/// Rounds toward zero to `n` fractional bits.
pub fn dyadic_truncate(v: f64, n: u32) -> f64 {
    let scale = 2f64.powi(n.min(1100) as i32);
    let scaled = v * scale;
    if !scale.is_finite() || !scaled.is_finite() {
        // Already an integer multiple of 2^-n at this magnitude.
        return v;
    }
    scaled.trunc() / scale
}

/// Exact version of [`dyadic_truncate`].
pub fn dyadic_truncate_q(v: &Q, n: u32) -> Q {
    let p = pow2(n);
    (v * &p).trunc() / p
}

/// Instance with rational entries. `lambda` stays exact as given.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactInstance {
    y: Vec<Q>,
    /// Row-major, `m` rows of length `N`.
    a: Vec<Vec<Q>>,
    lambda: Q,
}

impl ExactInstance {
    pub fn new(y: Vec<Q>, a: Vec<Vec<Q>>, lambda: Q) -> Result<Self> {
        if y.is_empty()
            || a.len() != y.len()
            || a[0].is_empty()
            || a.iter().any(|r| r.len() != a[0].len())
        {
            return Err(Error::InvalidInstance(
                "need m, N >= 1 and consistent row lengths".into(),
            ));
        }
        if !lambda.is_positive() {
            return Err(Error::InvalidInstance("lambda must be positive".into()));
        }
        Ok(Self { y, a, lambda })
    }

    pub fn from_instance(inst: &LassoInstance) -> Self {
        Self {
            y: inst.y().iter().map(|&v| q(v)).collect(),
            a: inst
                .rows()
                .into_iter()
                .map(|r| r.into_iter().map(q).collect())
                .collect(),
            lambda: q(inst.lambda()),
        }
    }

    pub fn m(&self) -> usize {
        self.y.len()
    }

    pub fn n(&self) -> usize {
        self.a[0].len()
    }

    pub fn y(&self) -> &[Q] {
        &self.y
    }

    pub fn a(&self) -> &[Vec<Q>] {
        &self.a
    }

    pub fn lambda(&self) -> &Q {
        &self.lambda
    }

    /// Nearest floating-point instance.
    pub fn to_f64(&self) -> Result<LassoInstance> {
        let y: Vec<f64> = self.y.iter().map(to_f64).collect();
        let rows: Vec<Vec<f64>> = self
            .a
            .iter()
            .map(|r| r.iter().map(to_f64).collect())
            .collect();
        LassoInstance::from_rows(&y, &rows, to_f64(&self.lambda))
    }

    /// Every entry of `y` and `A` truncated to `n` fractional bits.
    pub fn truncate(&self, n: u32) -> Self {
        Self {
            y: self.y.iter().map(|v| dyadic_truncate_q(v, n)).collect(),
            a: self
                .a
                .iter()
                .map(|r| r.iter().map(|v| dyadic_truncate_q(v, n)).collect())
                .collect(),
            lambda: self.lambda.clone(),
        }
    }

    /// `max(‖y - y'‖∞, ‖A - A'‖max)`.
    pub fn max_distance(&self, other: &Self) -> Q {
        let mut d = Q::zero();
        for (u, v) in self.y.iter().zip(&other.y) {
            d = d.max((u - v).abs());
        }
        for (r, s) in self.a.iter().zip(&other.a) {
            for (u, v) in r.iter().zip(s) {
                d = d.max((u - v).abs());
            }
        }
        d
    }

    fn column_dot(&self, j: usize, v: &[Q]) -> Q {
        self.a.iter().zip(v).map(|(row, vi)| &row[j] * vi).sum()
    }
}

/// Exact optimality proof for a support.
#[derive(Debug, Clone, PartialEq)]
pub struct KktProof {
    pub support: SupportSet,
    /// The unique minimizer.
    pub x: Vec<Q>,
    /// `lambda/2 - max_{j ∉ S} |A_jᵀ(Ax - y)|` (`lambda/2` when `S^c = ∅`).
    pub sigma1: Q,
    /// `min_{i ∈ S} |x_i|`, `None` for `S = ∅`.
    pub sigma3: Option<Q>,
}

/// Solves `G z = b` by Gaussian elimination with nonzero pivoting; `None` if
/// `G` is singular.
fn solve_rational(mut g: Vec<Vec<Q>>, mut b: Vec<Q>) -> Option<Vec<Q>> {
    let k = b.len();
    for c in 0..k {
        let p = (c..k).find(|&r| !g[r][c].is_zero())?;
        g.swap(c, p);
        b.swap(c, p);
        for r in (c + 1)..k {
            if g[r][c].is_zero() {
                continue;
            }
            let f = &g[r][c] / &g[c][c];
            for cc in c..k {
                let t = &f * &g[c][cc];
                g[r][cc] -= t;
            }
            let t = &f * &b[c];
            b[r] -= t;
        }
    }
    let mut z = vec![Q::zero(); k];
    for c in (0..k).rev() {
        let mut acc = b[c].clone();
        for cc in (c + 1)..k {
            acc -= &g[c][cc] * &z[cc];
        }
        z[c] = acc / &g[c][c];
    }
    Some(z)
}

fn gram(inst: &ExactInstance, s: &[usize]) -> Vec<Vec<Q>> {
    s.iter()
        .map(|&i| {
            s.iter()
                .map(|&j| inst.a.iter().map(|row| &row[i] * &row[j]).sum())
                .collect()
        })
        .collect()
}

/// Exact KKT check of the candidate `(s, signs)`; `signs[k]` is the sign of
/// `x_{s[k]}` and must be ±1.
pub fn verify_support(inst: &ExactInstance, s: &SupportSet, signs: &[i8]) -> Option<KktProof> {
    let idx = s.indices();
    if signs.len() != idx.len() || !s.fits(inst.n()) || idx.len() > inst.m() {
        return None;
    }
    let half = &inst.lambda / Q::from_integer(BigInt::from(2));
    let xs = if idx.is_empty() {
        Vec::new()
    } else {
        let rhs: Vec<Q> = idx
            .iter()
            .zip(signs)
            .map(|(&i, &sg)| {
                inst.column_dot(i, &inst.y) - &half * Q::from_integer(BigInt::from(sg))
            })
            .collect();
        solve_rational(gram(inst, idx), rhs)?
    };
    for (v, &sg) in xs.iter().zip(signs) {
        let ok = if sg > 0 {
            v.is_positive()
        } else {
            v.is_negative()
        };
        if !ok {
            return None;
        }
    }
    let mut x = vec![Q::zero(); inst.n()];
    for (&i, v) in idx.iter().zip(&xs) {
        x[i] = v.clone();
    }
    // Residual Ax - y.
    let res: Vec<Q> = inst
        .a
        .iter()
        .zip(&inst.y)
        .map(|(row, yi)| idx.iter().map(|&i| &row[i] * &x[i]).sum::<Q>() - yi)
        .collect();
    let mut worst = Q::zero();
    for j in s.complement(inst.n()) {
        let c = inst.column_dot(j, &res).abs();
        if c >= half {
            return None;
        }
        worst = worst.max(c);
    }
    let sigma3 = xs.iter().map(|v| v.abs()).min();
    Some(KktProof {
        support: s.clone(),
        x,
        sigma1: half - worst,
        sigma3,
    })
}

/// Whether `G - mu I` is positive definite, by exact elimination.
fn shifted_is_pd(g: &[Vec<Q>], mu: &Q) -> bool {
    let k = g.len();
    let mut m: Vec<Vec<Q>> = g.to_vec();
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= mu;
    }
    for c in 0..k {
        if !m[c][c].is_positive() {
            return false;
        }
        for r in (c + 1)..k {
            let f = &m[r][c] / &m[c][c];
            for cc in c..k {
                let t = &f * &m[c][cc];
                m[r][cc] -= t;
            }
        }
    }
    true
}

/// Certified lower bound on `lambda_min(A_SᵀA_S)`; `None` for `S = ∅` (the
/// value is `+inf`).
pub fn gram_lower_bound(inst: &ExactInstance, s: &SupportSet) -> Option<Q> {
    let idx = s.indices();
    if idx.is_empty() {
        return None;
    }
    let g = gram(inst, idx);
    if idx.len() == 1 {
        return Some(g[0][0].clone());
    }
    let approx = inst.to_f64().map_or(0.0, |f| {
        linalg::min_gram_eigenvalue(&linalg::select_columns(f.a(), idx))
    });
    let mut mu = approx * (1.0 - 1e-9);
    for _ in 0..60 {
        if !(mu > 0.0) {
            break;
        }
        let cand = q(mu);
        if shifted_is_pd(&g, &cand) {
            return Some(cand);
        }
        mu *= 0.5;
    }
    Some(Q::zero())
}

fn sqrt_up(v: &Q) -> f64 {
    let mut s = to_f64_up(v).sqrt();
    while q(s) * q(s) < *v {
        s = s.next_up();
    }
    s
}

fn sqrt_down(v: &Q) -> f64 {
    if v.is_zero() {
        return 0.0;
    }
    let mut s = to_f64_down(v).sqrt();
    while s > 0.0 && q(s) * q(s) > *v {
        s = s.next_down();
    }
    s
}

/// Enclosure `(lo, hi)` of `alpha = max{‖A‖₂, ‖y‖₂, 1}`.
///
/// Upper: `‖A‖₂ <= min{‖A‖_F, sqrt(‖A‖₁‖A‖∞)}`. Lower: `‖A‖₂ >=` the largest
/// column norm.
pub fn alpha_bounds(inst: &ExactInstance) -> (f64, f64) {
    let y2: Q = inst.y.iter().map(|v| v * v).sum();
    let fro: Q = inst.a.iter().flat_map(|r| r.iter().map(|v| v * v)).sum();
    let row_sum = inst
        .a
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<Q>())
        .max()
        .unwrap_or_else(Q::zero);
    let col_sum = (0..inst.n())
        .map(|j| inst.a.iter().map(|r| r[j].abs()).sum::<Q>())
        .max()
        .unwrap_or_else(Q::zero);
    let col_sq = (0..inst.n())
        .map(|j| inst.a.iter().map(|r| &r[j] * &r[j]).sum::<Q>())
        .max()
        .unwrap_or_else(Q::zero);
    let hi = 1f64
        .max(sqrt_up(&y2))
        .max(sqrt_up(&fro).min(sqrt_up(&(row_sum * col_sum))));
    let lo = 1f64.max(sqrt_down(&y2)).max(sqrt_down(&col_sq));
    (lo, hi)
}

/// Relative safety factor absorbing the floating-point evaluation of `q`.
pub const BOUND_SAFETY: f64 = 1.0 - 1e-12;

/// Certified sigmas and stability-support lower bound for a proven support.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBound {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub sigma: f64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub stsp_lb: f64,
}

pub fn exact_bound(inst: &ExactInstance, proof: &KktProof) -> ExactBound {
    let s1 = to_f64_down(&proof.sigma1);
    let s2 = gram_lower_bound(inst, &proof.support).map_or(f64::INFINITY, |g| to_f64_down(&g));
    let s3 = proof.sigma3.as_ref().map_or(f64::INFINITY, to_f64_down);
    let s2_sq = if s2.is_infinite() {
        s2
    } else {
        (s2 * s2).next_down().max(0.0)
    };
    let sigma = s1.min(s2_sq).min(s3).max(0.0);
    let (alpha_lo, alpha_hi) = alpha_bounds(inst);
    let lam = to_f64_down(&inst.lambda);
    let l =
        stsp_lower_bound_split(alpha_hi, alpha_lo, sigma, inst.m(), inst.n(), lam) * BOUND_SAFETY;
    ExactBound {
        sigma1: s1,
        sigma2: s2,
        sigma3: s3,
        sigma,
        alpha_lo,
        alpha_hi,
        stsp_lb: l,
    }
}

/// Candidate `(S, signs)` pairs derived from an approximate minimizer: the
/// thresholded supports at a few levels, then each with one index removed,
/// then the singletons.
pub fn candidate_supports(x: &[f64]) -> Vec<(SupportSet, Vec<i8>)> {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<(SupportSet, Vec<i8>)> = Vec::new();
    let mut push = |idx: Vec<usize>| {
        let s = SupportSet::from_zero_based(idx);
        let signs: Vec<i8> = s
            .indices()
            .iter()
            .map(|&i| if x[i] > 0.0 { 1 } else { -1 })
            .collect();
        if !out.iter().any(|(t, _)| *t == s) {
            out.push((s, signs));
        }
    };
    let mut base = Vec::new();
    for tau in [1e-12, 1e-9, 1e-6, 1e-3] {
        let s: Vec<usize> = (0..x.len()).filter(|&i| x[i].abs() > tau * scale).collect();
        if base.is_empty() {
            base = s.clone();
        }
        push(s);
    }
    let mut by_size = base.clone();
    by_size.sort_by(|&i, &j| x[i].abs().total_cmp(&x[j].abs()));
    for &drop in &by_size {
        push(base.iter().copied().filter(|&i| i != drop).collect());
    }
    for &i in by_size.iter().rev() {
        push(vec![i]);
    }
    push(Vec::new());
    out
}
