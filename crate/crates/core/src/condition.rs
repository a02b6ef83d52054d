//! The sigma quantities, the `q` polynomial, the lower bound on the stability
//! support and the numerical sigma-certificate built on top of them.
//!
//! For a minimizer `x` with support `S`:
//!
//! * `sigma1 = lambda/2 - ||A_{S^c}ᵀ(Ax - y)||_inf` (slack of the off-support KKT bound),
//! * `sigma2 = lambda_min(A_Sᵀ A_S)` (`+inf` for `S = ∅`, `0` if singular),
//! * `sigma3 = min_{i in S} |x_i|` (`+inf` for `S = ∅`),
//! * `sigma = min{sigma1, sigma2^2, sigma3}`,
//!
//! and with `alpha = max{||A||_2, ||y||_2, 1}`
//!
//! ```text
//! stsp(y, A) >= (mN)^(-1/2) min{ sigma^2 / q(alpha, sigma), sqrt(sigma) / (6 alpha), alpha }.
//! ```

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ensembles::trial_rng;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{compute_norms, ext_real, support_from_threshold, LassoInstance, SupportSet};
use crate::solver::{self, LassoSolution};

/// Multiplier `c` in the solution-error margin `c sqrt(gap) / sigma_min(A_S)`.
pub const MARGIN_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaCertificate {
    #[serde(with = "ext_real")]
    pub sigma1: f64,
    #[serde(with = "ext_real")]
    pub sigma2: f64,
    #[serde(with = "ext_real")]
    pub sigma3: f64,
    #[serde(with = "ext_real")]
    pub sigma: f64,
    pub alpha: f64,
    pub stsp_lb: f64,
    #[serde(with = "ext_real")]
    pub cond_ub: f64,
    pub support_used: SupportSet,
    pub provenance: Provenance,
}

impl SigmaCertificate {
    /// True when the bound degenerated to zero.
    pub fn is_ill_posed(&self) -> bool {
        self.stsp_lb == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `"numerical"` for certificates computed in floating point from an
    /// approximate minimizer, `"exact"` for rational KKT verification.
    pub kind: String,
    pub tau: f64,
    pub gap_bound: f64,
    /// Bound on the distance from the thresholded `x` to the exact minimizer.
    pub solution_margin: f64,
    /// Extra amount added to the off-support correlation for sigma1.
    pub sigma1_margin: f64,
    pub note: String,
}

pub(crate) const SINGLE_SOLUTION_NOTE: &str =
    "sigmas are evaluated at a single minimizer; with non-unique minimizers each is only an upper bound on the infimum";

/// `lambda/2 - ||A_{S^c}ᵀ(Ax - y)||_inf`, with the norm over an empty index set
/// equal to zero.
pub fn sigma1(inst: &LassoInstance, x: &[f64], s: &SupportSet) -> f64 {
    let off = off_support_correlation(inst, x, s);
    0.5 * inst.lambda() - off
}

fn off_support_correlation(inst: &LassoInstance, x: &[f64], s: &SupportSet) -> f64 {
    let res = inst.a() * DVector::from_column_slice(x) - inst.y();
    s.complement(inst.n())
        .into_iter()
        .map(|j| inst.a().column(j).dot(&res).abs())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of `A_Sᵀ A_S`; `+inf` for the empty set.
pub fn sigma2(inst: &LassoInstance, s: &SupportSet) -> f64 {
    if s.is_empty() {
        return f64::INFINITY;
    }
    linalg::min_gram_eigenvalue(&linalg::select_columns(inst.a(), s.indices()))
}

/// `min_{i in S} |x_i|`; `+inf` for the empty set.
pub fn sigma3(x: &[f64], s: &SupportSet) -> f64 {
    s.indices()
        .iter()
        .map(|&i| x[i].abs())
        .fold(f64::INFINITY, f64::min)
}

/// `min{sigma1, sigma2^2, sigma3}`.
pub fn combine_sigmas(s1: f64, s2: f64, s3: f64) -> f64 {
    s1.min(s2 * s2).min(s3)
}

/// `q(nu, xi) = 96 nu^5 + 12 nu^3 (1 + lambda sqrt(N)) sqrt(xi) + xi (2 nu^3 / lambda + 3 nu)`.
pub fn q_poly(nu: f64, xi: f64, lambda: f64, n: usize) -> Result<f64> {
    if !(nu >= 1.0) || !(xi >= 0.0) || !(lambda > 0.0) {
        return Err(Error::Domain(format!(
            "q requires nu >= 1, xi >= 0, lambda > 0 (got nu={nu}, xi={xi}, lambda={lambda})"
        )));
    }
    let nu3 = nu * nu * nu;
    Ok(96.0 * nu3 * nu * nu
        + 12.0 * nu3 * (1.0 + lambda * (n as f64).sqrt()) * xi.sqrt()
        + xi * (2.0 * nu3 / lambda + 3.0 * nu))
}

/// Lower bound on the stability support from `(alpha, sigma)`.
///
/// Returns 0 for `sigma = 0`. An infinite `sigma` is not expected here since
/// `sigma1 <= lambda/2`.
pub fn stsp_lower_bound(alpha: f64, sigma: f64, m: usize, n: usize, lambda: f64) -> f64 {
    stsp_lower_bound_split(alpha, alpha, sigma, m, n, lambda)
}

/// Same as [`stsp_lower_bound`] but with separate upper (`alpha_hi`) and lower
/// (`alpha_lo`) bounds on alpha. The first two terms decrease in alpha and the
/// third increases, so using `alpha_hi` and `alpha_lo` respectively keeps the
/// result a valid lower bound when alpha is only enclosed.
pub fn stsp_lower_bound_split(
    alpha_hi: f64,
    alpha_lo: f64,
    sigma: f64,
    m: usize,
    n: usize,
    lambda: f64,
) -> f64 {
    if !(sigma > 0.0) {
        return 0.0;
    }
    let q = q_poly(alpha_hi.max(1.0), sigma, lambda, n).expect("arguments in domain");
    let t1 = sigma * sigma / q;
    let t2 = sigma.sqrt() / (6.0 * alpha_hi);
    let t3 = alpha_lo;
    t1.min(t2).min(t3) / ((m * n) as f64).sqrt()
}

/// Numerical sigma-certificate for `sol`.
///
/// The support is `support_from_threshold(sol.x, tau)`. The sigmas are
/// evaluated at the thresholded solution and then pessimized by the margin
/// `eps_x = 2 sqrt(gap) / sigma_min(A_S)`: `sigma3` drops by `eps_x`, and
/// `sigma1` by `max_j ||A_j||_2 ||A||_2 eps_x`. Fails with `UncertainSupport`
/// when some `|x_i|` lies within `eps_x` of `tau`.
pub fn certificate(
    inst: &LassoInstance,
    sol: &LassoSolution,
    tau: f64,
) -> Result<SigmaCertificate> {
    if sol.x.len() != inst.n() {
        return Err(Error::DimensionMismatch {
            expected: inst.n(),
            got: sol.x.len(),
        });
    }
    let s = support_from_threshold(&sol.x, tau);
    let a = inst.a();
    let gap = sol.gap_bound.max(0.0);

    let scale = if s.is_empty() {
        a.column_iter()
            .map(|c| c.norm())
            .filter(|&v| v > 0.0)
            .fold(f64::INFINITY, f64::min)
    } else {
        linalg::min_singular_value(&linalg::select_columns(a, s.indices()))
    };
    let eps_x = if gap == 0.0 {
        0.0
    } else if scale > 0.0 && scale.is_finite() {
        MARGIN_FACTOR * gap.sqrt() / scale
    } else {
        f64::INFINITY
    };

    if let Some((i, v)) = sol
        .x
        .iter()
        .enumerate()
        .find(|(_, v)| v.abs() >= tau - eps_x && v.abs() <= tau + eps_x)
    {
        return Err(Error::UncertainSupport {
            index: i + 1,
            value: *v,
            tau,
            margin: eps_x,
        });
    }

    let xt: Vec<f64> = sol
        .x
        .iter()
        .enumerate()
        .map(|(i, &v)| if s.contains(i) { v } else { 0.0 })
        .collect();

    let norms = compute_norms(inst);
    let s1_margin = linalg::max_column_norm(a) * linalg::spectral_norm(a) * eps_x;
    let raw_off = off_support_correlation(inst, &xt, &s);
    let s1 = 0.5 * inst.lambda() - raw_off - s1_margin;
    let s2 = sigma2(inst, &s);
    let s3 = sigma3(&xt, &s) - eps_x;
    let sigma = combine_sigmas(s1, s2, s3).max(0.0);
    let stsp_lb = stsp_lower_bound(norms.trunc2, sigma, inst.m(), inst.n(), inst.lambda());
    Ok(SigmaCertificate {
        sigma1: s1,
        sigma2: s2,
        sigma3: s3,
        sigma,
        alpha: norms.trunc2,
        stsp_lb,
        cond_ub: if stsp_lb > 0.0 {
            1.0 / stsp_lb
        } else {
            f64::INFINITY
        },
        support_used: s,
        provenance: Provenance {
            kind: "numerical".into(),
            tau,
            gap_bound: gap,
            solution_margin: eps_x,
            sigma1_margin: s1_margin,
            note: SINGLE_SOLUTION_NOTE.into(),
        },
    })
}

/// Result of randomly probing a box around an instance for a support change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub found_change: bool,
    /// `1/radius` when a change was found (so `stsp <= radius`), else 0.
    #[serde(with = "ext_real")]
    pub cond_lb: f64,
    pub samples_run: usize,
}

/// Gap tolerance and threshold used for every solve inside the probe.
pub const PROBE_GAP_TOL: f64 = 1e-14;
pub const PROBE_TAU: f64 = 1e-9;

/// Samples perturbations with `||y' - y||_inf, ||A' - A||_max <= radius` and
/// reports whether any of them changes the solved support.
///
/// Half of the samples are box corners (every entry moved by exactly
/// `±radius`), the rest are uniform in the box.
pub fn probe_condition_lb(
    inst: &LassoInstance,
    radius: f64,
    n_samples: usize,
    seed: u64,
) -> Result<ProbeResult> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!(
            "radius must be positive, got {radius}"
        )));
    }
    if n_samples == 0 {
        return Ok(ProbeResult {
            found_change: false,
            cond_lb: 0.0,
            samples_run: 0,
        });
    }
    let base = probe_support(inst)?;
    for k in 0..n_samples {
        let mut rng = trial_rng(seed, k as u64);
        let corner = k % 2 == 0;
        let mut draw = || {
            if corner {
                if rng.random::<bool>() {
                    radius
                } else {
                    -radius
                }
            } else {
                rng.random_range(-radius..=radius)
            }
        };
        let y = inst.y().map(|v| v + draw());
        let a = inst.a().map(|v| v + draw());
        let pert = LassoInstance::new(y, a, inst.lambda())?;
        if probe_support(&pert)? != base {
            return Ok(ProbeResult {
                found_change: true,
                cond_lb: 1.0 / radius,
                samples_run: k + 1,
            });
        }
    }
    Ok(ProbeResult {
        found_change: false,
        cond_lb: 0.0,
        samples_run: n_samples,
    })
}

fn probe_support(inst: &LassoInstance) -> Result<SupportSet> {
    let x = match solver::solve(inst, PROBE_GAP_TOL) {
        Ok(s) => s.x,
        Err(Error::Budget { x, .. }) => x,
        Err(e) => return Err(e),
    };
    Ok(support_from_threshold(&x, PROBE_TAU))
}
