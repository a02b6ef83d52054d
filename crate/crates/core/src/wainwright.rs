//! Gaussian-design parameters, hypothesis checks and the explicit
//! high-probability bound `K̂` on the condition number.
//!
//! Rows of `A` are i.i.d. `N(0, Σ)`, `y = Av + w` with `w ~ N(0, η² I_m)`,
//! `S = supp(v)` and `s = |S|`. The universal constants `c3` and `c̄` have no
//! known values; every verdict that depends on them carries
//! `constants_assumed = true`.

use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::condition::q_poly;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ext_real, SupportSet};

/// Number of grid points in the scan for the epsilon witness.
pub const EPS_GRID: usize = 512;
/// Eigenvalue floor, relative to the largest eigenvalue, for `Σ^{-1/2}`.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Leading constant of the explicit cap on `K̂` under the simple hypotheses.
pub const K_HAT_CAP_CONST: f64 = 542_062.0;

/// Covariance of the rows of `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovRepr", into = "CovRepr")]
pub enum Covariance {
    /// `I_N`, handled in closed form without allocating `N × N`.
    Identity(usize),
    Dense(DMatrix<f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum CovRepr {
    Identity(usize),
    Dense(Vec<Vec<f64>>),
}

impl TryFrom<CovRepr> for Covariance {
    type Error = String;

    fn try_from(r: CovRepr) -> std::result::Result<Self, String> {
        match r {
            CovRepr::Identity(0) => Err("identity dimension must be positive".into()),
            CovRepr::Identity(n) => Ok(Covariance::Identity(n)),
            CovRepr::Dense(rows) => {
                let n = rows.len();
                if n == 0 || rows.iter().any(|r| r.len() != n) {
                    return Err("dense covariance must be a non-empty square matrix".into());
                }
                let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
                Covariance::dense(m).map_err(|e| e.to_string())
            }
        }
    }
}

impl From<Covariance> for CovRepr {
    fn from(c: Covariance) -> Self {
        match c {
            Covariance::Identity(n) => CovRepr::Identity(n),
            Covariance::Dense(m) => CovRepr::Dense(
                (0..m.nrows())
                    .map(|i| m.row(i).iter().copied().collect())
                    .collect(),
            ),
        }
    }
}

impl Covariance {
    /// Validates symmetry, finiteness and positive definiteness.
    pub fn dense(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInstance(
                "covariance must be square and non-empty".into(),
            ));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance(
                "covariance entries must be finite".into(),
            ));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidInstance(format!(
                        "covariance is not symmetric at ({}, {})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if Cholesky::new(m.clone()).is_none() {
            return Err(Error::InvalidInstance(
                "covariance is not positive definite".into(),
            ));
        }
        Ok(Covariance::Dense(m))
    }

    pub fn n(&self) -> usize {
        match self {
            Covariance::Identity(n) => *n,
            Covariance::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Covariance::Identity(n) => DMatrix::identity(*n, *n),
            Covariance::Dense(m) => m.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Covariance::Identity(_))
    }

    /// `‖Σ‖₂`.
    pub fn spectral_norm(&self) -> f64 {
        match self {
            Covariance::Identity(_) => 1.0,
            Covariance::Dense(m) => *linalg::sym_eigenvalues(m).last().expect("non-empty"),
        }
    }

    /// Lower Cholesky factor, used to sample rows as `L z`.
    pub fn cholesky_factor(&self) -> Option<DMatrix<f64>> {
        match self {
            Covariance::Identity(_) => None,
            Covariance::Dense(m) => Some(Cholesky::new(m.clone()).expect("validated PD").l()),
        }
    }

    /// `‖Σ^{-1/2}‖∞` through the eigendecomposition.
    pub fn inv_sqrt_inf_norm(&self) -> Result<f64> {
        match self {
            Covariance::Identity(_) => Ok(1.0),
            Covariance::Dense(m) => {
                let eig = nalgebra::SymmetricEigen::new(m.clone());
                let max = eig.eigenvalues.max();
                let min = eig.eigenvalues.min();
                if !(min > EIGEN_FLOOR * max) {
                    return Err(Error::Domain(format!(
                        "covariance is numerically singular (eigenvalues {min:e} .. {max:e})"
                    )));
                }
                let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
                let r =
                    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
                Ok(linalg::inf_norm(&r))
            }
        }
    }
}

/// Rows `G`, columns `H` of `Σ` (0-based indices, in the given order).
pub fn submatrix(sigma: &Covariance, g: &[usize], h: &[usize]) -> Result<DMatrix<f64>> {
    let n = sigma.n();
    if let Some(&bad) = g.iter().chain(h).find(|&&i| i >= n) {
        return Err(Error::Domain(format!(
            "index {} out of range 1..={n}",
            bad + 1
        )));
    }
    Ok(match sigma {
        Covariance::Identity(_) => {
            DMatrix::from_fn(
                g.len(),
                h.len(),
                |i, j| if g[i] == h[j] { 1.0 } else { 0.0 },
            )
        }
        Covariance::Dense(m) => DMatrix::from_fn(g.len(), h.len(), |i, j| m[(g[i], h[j])]),
    })
}

fn default_c3() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub sigma: Covariance,
    pub v: Vec<f64>,
    pub eta: f64,
    pub m: usize,
    pub lambda: f64,
    #[serde(default = "default_c3")]
    pub c3: f64,
    /// Defaults to `max{c3, 1}`.
    #[serde(default)]
    pub c_bar: Option<f64>,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.sigma.n();
        if self.v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.v.len(),
            });
        }
        if self.m == 0 {
            return Err(Error::Domain("m must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Domain(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Domain(format!(
                "eta must be nonnegative, got {}",
                self.eta
            )));
        }
        if !(self.c3 > 0.0) || self.c_bar.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::Domain("c3 and c_bar must be positive".into()));
        }
        if self.v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("v must be finite".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.sigma.n()
    }

    pub fn support(&self) -> SupportSet {
        SupportSet::from_zero_based(
            self.v
                .iter()
                .enumerate()
                .filter(|(_, x)| **x != 0.0)
                .map(|(i, _)| i),
        )
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar.unwrap_or(self.c3.max(1.0))
    }

    fn min_abs_v_on_support(&self) -> f64 {
        self.v
            .iter()
            .filter(|x| **x != 0.0)
            .fold(f64::INFINITY, |m, x| m.min(x.abs()))
    }

    fn v_norm(&self) -> f64 {
        self.v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Which lower end of the epsilon window was applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `ε > max{8 C_min sqrt(s/m), sqrt(s/m)}`, general covariance.
    General,
    /// `ε > 8 sqrt(s/m)`, isotropic noiseless statement.
    Simple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WainwrightParams {
    pub s: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub gamma: f64,
    #[serde(with = "ext_real")]
    pub rho_l: f64,
    pub rho_u: f64,
    #[serde(with = "ext_real")]
    pub theta_l: f64,
    #[serde(with = "ext_real")]
    pub theta_u: f64,
    #[serde(with = "ext_real")]
    pub phi_n: f64,
    #[serde(with = "ext_real")]
    pub g_lambda: f64,
    /// `M̄_N` at `epsilon_used` (NaN when no witness was found).
    #[serde(with = "ext_real")]
    pub m_bar: f64,
    #[serde(with = "ext_real")]
    pub sigma_hat: f64,
    pub alpha_hat: f64,
    /// NaN when `sigma_hat <= 0`.
    #[serde(with = "ext_real")]
    pub k_hat: f64,
    pub a0_ok: bool,
    pub ai_ok: bool,
    pub aii_ok: bool,
    /// Smallest grid `ε` satisfying the sample-size inequality (NaN if none).
    #[serde(with = "ext_real")]
    pub epsilon_used: f64,
    pub epsilon_rule: EpsilonRule,
    pub epsilon_window_empty: bool,
    /// `|S^c| = 1`: `rho_l` is a minimum over an empty set.
    pub rho_l_undefined: bool,
    /// `η = 0`: `phi_n` is infinite.
    pub noiseless: bool,
    pub constants_assumed: bool,
    pub c3: f64,
}

/// Structural covariance parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Structural {
    pub c_min: f64,
    pub c_max: f64,
    pub gamma: f64,
    pub rho_l: f64,
    pub rho_u: f64,
    pub theta_l: f64,
    pub theta_u: f64,
}

/// `C_min, C_max, γ, ρ_l, ρ_u, θ_l, θ_u` for `Σ` and support `S`.
pub fn structural(sigma: &Covariance, s: &SupportSet) -> Result<Structural> {
    let n = sigma.n();
    if s.is_empty() {
        return Err(Error::Domain("v has empty support".into()));
    }
    if !s.fits(n) {
        return Err(Error::BadSupport(s.clone(), n));
    }
    if s.len() == n {
        return Err(Error::Domain(
            "support of v is the whole index set; S^c is empty".into(),
        ));
    }
    let sc = s.complement(n);
    if sigma.is_identity() {
        let rho_l = if sc.len() >= 2 { 1.0 } else { f64::INFINITY };
        return Ok(Structural {
            c_min: 1.0,
            c_max: 1.0,
            gamma: 1.0,
            rho_l,
            rho_u: 1.0,
            theta_l: rho_l,
            theta_u: 1.0,
        });
    }
    let sss = submatrix(sigma, s.indices(), s.indices())?;
    let ev = linalg::sym_eigenvalues(&sss);
    let (c_min, c_max) = (ev[0], ev[ev.len() - 1]);
    let chol = match Cholesky::new(sss) {
        Some(c) if c_min > 0.0 => c,
        _ => return Err(Error::SingularSigmaSS),
    };
    let scs = submatrix(sigma, &sc, s.indices())?;
    // Σ_{S^c S} Σ_SS^{-1} = (Σ_SS^{-1} Σ_{S S^c})ᵀ.
    let proj = chol.solve(&scs.transpose()).transpose();
    let gamma = 1.0 - linalg::inf_norm(&proj);
    let schur = submatrix(sigma, &sc, &sc)? - &proj * scs.transpose();
    let k = sc.len();
    let rho_u = (0..k)
        .map(|i| schur[(i, i)])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut rho_l = f64::INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            rho_l = rho_l.min(0.5 * (schur[(i, i)] + schur[(j, j)] - 2.0 * schur[(i, j)]));
        }
    }
    Ok(Structural {
        c_min,
        c_max,
        gamma,
        rho_l,
        rho_u,
        theta_l: rho_l / (c_max * (2.0 - gamma * gamma)),
        theta_u: rho_u / (c_min * gamma * gamma),
    })
}

/// `φ_N = λ² / (8 η² ln N · C_min θ_u m)`; infinite when `η = 0`.
pub fn phi_n_from(lambda: f64, eta: f64, n: usize, c_min: f64, theta_u: f64, m: usize) -> f64 {
    if eta == 0.0 {
        return f64::INFINITY;
    }
    lambda * lambda / (8.0 * eta * eta * (n as f64).ln() * c_min * theta_u * m as f64)
}

pub fn phi_n(spec: &EnsembleSpec) -> Result<f64> {
    spec.validate()?;
    if spec.n() < 2 {
        return Err(Error::Domain("phi_N needs N >= 2".into()));
    }
    let st = structural(&spec.sigma, &spec.support())?;
    Ok(phi_n_from(
        spec.lambda,
        spec.eta,
        spec.n(),
        st.c_min,
        st.theta_u,
        spec.m,
    ))
}

/// `M̄_N(ε) = (1+ε)/(C_min θ_u m) · (s θ_u + m/(2 ln N φ_N))`.
pub fn m_bar_from(
    eps: f64,
    c_min: f64,
    theta_u: f64,
    m: usize,
    s: usize,
    ln_n: f64,
    phi: f64,
) -> Result<f64> {
    if !(phi > 0.0) || ln_n <= 0.0 {
        return Err(Error::Domain(format!(
            "M̄ needs phi_N > 0 and ln N > 0 (phi_N = {phi})"
        )));
    }
    let m = m as f64;
    Ok((1.0 + eps) / (c_min * theta_u * m) * (s as f64 * theta_u + m / (2.0 * ln_n * phi)))
}

pub fn m_bar(spec: &EnsembleSpec, eps: f64) -> Result<f64> {
    let phi = phi_n(spec)?;
    if !phi.is_finite() {
        return Err(Error::Domain("M̄ needs a finite phi_N (eta > 0)".into()));
    }
    let st = structural(&spec.sigma, &spec.support())?;
    m_bar_from(
        eps,
        st.c_min,
        st.theta_u,
        spec.m,
        spec.support().len(),
        (spec.n() as f64).ln(),
        phi,
    )
}

/// `g(λ) = c3 λ ‖Σ^{-1/2}‖∞² / (2m) + 20 sqrt(η² ln s / (C_min m))`.
pub fn g_lambda(spec: &EnsembleSpec) -> Result<f64> {
    spec.validate()?;
    let s = spec.support();
    let st = structural(&spec.sigma, &s)?;
    let r = spec.sigma.inv_sqrt_inf_norm()?;
    Ok(g_from(
        spec.c3,
        spec.lambda,
        r,
        spec.m,
        spec.eta,
        s.len(),
        st.c_min,
    ))
}

fn g_from(
    c3: f64,
    lambda: f64,
    inv_sqrt_inf: f64,
    m: usize,
    eta: f64,
    s: usize,
    c_min: f64,
) -> f64 {
    let m = m as f64;
    c3 * lambda * inv_sqrt_inf * inv_sqrt_inf / (2.0 * m)
        + 20.0 * (eta * eta * (s as f64).ln() / (c_min * m)).sqrt()
}

/// Open interval `(lo, 1/2)` for the witness `ε`.
pub fn epsilon_window(rule: EpsilonRule, c_min: f64, s: usize, m: usize) -> (f64, f64) {
    let r = (s as f64 / m as f64).sqrt();
    let lo = match rule {
        EpsilonRule::General => (8.0 * c_min * r).max(r),
        EpsilonRule::Simple => 8.0 * r,
    };
    (lo, 0.5)
}

/// First point of the uniform interior grid of `(lo, hi)` where `pred` holds.
fn scan_window(lo: f64, hi: f64, pred: impl Fn(f64) -> bool) -> Option<f64> {
    if !(lo < hi) {
        return None;
    }
    (1..=EPS_GRID)
        .map(|k| lo + (hi - lo) * k as f64 / (EPS_GRID + 1) as f64)
        .find(|&e| pred(e))
}

/// `(σ̂, α̂, K̂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KHat {
    pub sigma_hat: f64,
    pub alpha_hat: f64,
    pub k_hat: f64,
}

pub fn sigma_hat_from(c_min: f64, s: usize, m: usize, lambda: f64, min_v: f64, g: f64) -> f64 {
    let root = (s as f64).sqrt() + (m as f64).sqrt();
    (c_min * c_min / (4.0 * root.powi(4)))
        .min(0.5 * lambda)
        .min(min_v - g)
}

pub fn alpha_hat_from(
    m: usize,
    n: usize,
    eta: f64,
    c_max: f64,
    v_norm: f64,
    sigma_norm: f64,
) -> f64 {
    let (m, n) = (m as f64, n as f64);
    1f64.max((2.0 * m).sqrt() * (eta + c_max * v_norm))
        .max(sigma_norm.sqrt() * (3.0 * m.sqrt() + 6.0 * n.sqrt()))
}

/// `K̂ = sqrt(mN) · max{q(α̂, σ̂)/σ̂², 6α̂/sqrt(σ̂), 1}`.
pub fn k_hat_from(sigma_hat: f64, alpha_hat: f64, m: usize, n: usize, lambda: f64) -> Result<f64> {
    if !(sigma_hat > 0.0) {
        return Err(Error::NonpositiveSigmaHat(sigma_hat));
    }
    let q = q_poly(alpha_hat, sigma_hat, lambda, n)?;
    let inner = (q / (sigma_hat * sigma_hat))
        .max(6.0 * alpha_hat / sigma_hat.sqrt())
        .max(1.0);
    Ok(((m * n) as f64).sqrt() * inner)
}

pub fn k_hat(spec: &EnsembleSpec) -> Result<KHat> {
    spec.validate()?;
    let s = spec.support();
    let st = structural(&spec.sigma, &s)?;
    let g = g_lambda(spec)?;
    let sigma_hat = sigma_hat_from(
        st.c_min,
        s.len(),
        spec.m,
        spec.lambda,
        spec.min_abs_v_on_support(),
        g,
    );
    let alpha_hat = alpha_hat_from(
        spec.m,
        spec.n(),
        spec.eta,
        st.c_max,
        spec.v_norm(),
        spec.sigma.spectral_norm(),
    );
    let k = k_hat_from(sigma_hat, alpha_hat, spec.m, spec.n(), spec.lambda)?;
    Ok(KHat {
        sigma_hat,
        alpha_hat,
        k_hat: k,
    })
}

/// All parameters together with the (a0)/(ai)/(aii) verdicts.
pub fn params(spec: &EnsembleSpec) -> Result<WainwrightParams> {
    check_assumptions(spec)
}

pub fn check_assumptions(spec: &EnsembleSpec) -> Result<WainwrightParams> {
    spec.validate()?;
    let n = spec.n();
    if n < 2 {
        return Err(Error::Domain("need N >= 2".into()));
    }
    let s_set = spec.support();
    let s = s_set.len();
    let st = structural(&spec.sigma, &s_set)?;
    let phi = phi_n_from(spec.lambda, spec.eta, n, st.c_min, st.theta_u, spec.m);
    let g = g_from(
        spec.c3,
        spec.lambda,
        spec.sigma.inv_sqrt_inf_norm()?,
        spec.m,
        spec.eta,
        s,
        st.c_min,
    );

    let m = spec.m as f64;
    let rhs = 12.0 * s as f64 * ((n - s) as f64).ln() * st.theta_u;
    let (lo, hi) = epsilon_window(EpsilonRule::General, st.c_min, s, spec.m);
    let witness = scan_window(lo, hi, |e| m * (1.0 / (1.0 + e) - 6.0 / phi) > rhs);
    let a0_ok = st.gamma > 0.0;
    let min_v = spec.min_abs_v_on_support();
    let m_bar = match witness {
        Some(e) if phi.is_finite() => {
            m_bar_from(e, st.c_min, st.theta_u, spec.m, s, (n as f64).ln(), phi)?
        }
        // With φ_N = ∞ the noise term vanishes.
        Some(e) => (1.0 + e) / (st.c_min * m) * s as f64,
        None => f64::NAN,
    };

    let sigma_hat = sigma_hat_from(st.c_min, s, spec.m, spec.lambda, min_v, g);
    let alpha_hat = alpha_hat_from(
        spec.m,
        n,
        spec.eta,
        st.c_max,
        spec.v_norm(),
        spec.sigma.spectral_norm(),
    );
    let k_hat = k_hat_from(sigma_hat, alpha_hat, spec.m, n, spec.lambda).unwrap_or(f64::NAN);

    Ok(WainwrightParams {
        s,
        c_min: st.c_min,
        c_max: st.c_max,
        gamma: st.gamma,
        rho_l: st.rho_l,
        rho_u: st.rho_u,
        theta_l: st.theta_l,
        theta_u: st.theta_u,
        phi_n: phi,
        g_lambda: g,
        m_bar,
        sigma_hat,
        alpha_hat,
        k_hat,
        a0_ok,
        ai_ok: witness.is_some(),
        aii_ok: g < min_v,
        epsilon_used: witness.unwrap_or(f64::NAN),
        epsilon_rule: EpsilonRule::General,
        epsilon_window_empty: !(lo < hi),
        rho_l_undefined: st.rho_l.is_infinite(),
        noiseless: spec.eta == 0.0,
        constants_assumed: true,
        c3: spec.c3,
    })
}

/// Verdicts for the isotropic noiseless hypotheses (i) to (iii) and the side
/// conditions `ln(N/2) <= s <= N/8`, `m <= N/9`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleVerdict {
    pub hyp_i: bool,
    pub hyp_ii: bool,
    pub hyp_iii: bool,
    pub side_conditions: bool,
    /// `Σ = I` and `η = 0`.
    pub setting_ok: bool,
    pub all_ok: bool,
    pub epsilon_window: (f64, f64),
    pub epsilon_window_empty: bool,
    #[serde(with = "ext_real")]
    pub epsilon_used: f64,
    pub epsilon_rule: EpsilonRule,
    pub c_bar: f64,
    pub constants_assumed: bool,
}

pub fn check_simple(spec: &EnsembleSpec) -> Result<SimpleVerdict> {
    spec.validate()?;
    let n = spec.n();
    let nf = n as f64;
    let s = spec.support().len();
    let (m, sf) = (spec.m as f64, s as f64);
    let c_bar = spec.c_bar();

    let window = epsilon_window(EpsilonRule::Simple, 1.0, s, spec.m);
    let witness = if s >= 1 && s < n {
        let rhs = 12.0 * sf * ((n - s) as f64).ln();
        scan_window(window.0, window.1, |e| m > (1.0 + e) * rhs)
    } else {
        None
    };
    let min_v = spec.min_abs_v_on_support();
    let hyp_ii = s >= 1 && c_bar * spec.lambda < 2.0 * m * min_v - 1.0 / (nf * nf);
    let hyp_iii = spec.lambda >= 2.0 / (nf * nf);
    let side = (nf / 2.0).ln() <= sf && sf <= nf / 8.0 && m <= nf / 9.0;
    let setting_ok = spec.sigma.is_identity() && spec.eta == 0.0;
    let hyp_i = witness.is_some();
    Ok(SimpleVerdict {
        hyp_i,
        hyp_ii,
        hyp_iii,
        side_conditions: side,
        setting_ok,
        all_ok: hyp_i && hyp_ii && hyp_iii && side && setting_ok,
        epsilon_window: window,
        epsilon_window_empty: !(window.0 < window.1),
        epsilon_used: witness.unwrap_or(f64::NAN),
        epsilon_rule: EpsilonRule::Simple,
        c_bar,
        constants_assumed: true,
    })
}

/// `542062 N^{7.5} max{1, ‖v‖₂}^5`.
pub fn k_hat_cap(n: usize, v: &[f64]) -> f64 {
    let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    K_HAT_CAP_CONST * (n as f64).powf(7.5) * vn.powi(5)
}

/// `‖Σ‖₂^{1/2}(3 sqrt(m) + 6 sqrt(N))`, the level that `‖A‖₂` exceeds with
/// probability at most `e^{-m}`.
pub fn spectral_tail_level(sigma: &Covariance, m: usize) -> f64 {
    sigma.spectral_norm().sqrt() * (3.0 * (m as f64).sqrt() + 6.0 * (sigma.n() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(sigma: Covariance, v: Vec<f64>, eta: f64, m: usize, lambda: f64) -> EnsembleSpec {
        EnsembleSpec {
            sigma,
            v,
            eta,
            m,
            lambda,
            c3: 1.0,
            c_bar: None,
        }
    }

    fn dense(n: usize, f: impl Fn(usize, usize) -> f64) -> Covariance {
        Covariance::dense(DMatrix::from_fn(n, n, f)).unwrap()
    }

    #[test]
    fn submatrix_examples() {
        let i3 = Covariance::Identity(3);
        assert_eq!(
            submatrix(&i3, &[0, 1], &[0, 1]).unwrap(),
            DMatrix::identity(2, 2)
        );
        let s = dense(3, |i, j| match (i, j) {
            (1, 2) | (2, 1) => 0.4,
            (i, j) if i == j => 1.0,
            _ => 0.0,
        });
        assert_eq!(submatrix(&s, &[1], &[2]).unwrap()[(0, 0)], 0.4);
        let e = submatrix(&s, &[], &[0, 1]).unwrap();
        assert_eq!((e.nrows(), e.ncols()), (0, 2));
        assert!(submatrix(&s, &[3], &[0]).is_err());
    }

    #[test]
    fn identity_collapses() {
        for cov in [
            Covariance::Identity(6),
            Covariance::Dense(DMatrix::identity(6, 6)),
        ] {
            let p = params(&spec(cov, vec![1.0, -2.0, 0.0, 0.0, 0.0, 0.0], 0.5, 3, 0.7)).unwrap();
            for v in [
                p.c_min, p.c_max, p.gamma, p.rho_l, p.rho_u, p.theta_l, p.theta_u,
            ] {
                assert_eq!(v, 1.0);
            }
            let expected = 0.49 / (8.0 * 0.25 * 6f64.ln() * 3.0);
            assert_relative_eq!(p.phi_n, expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn scaled_diagonal() {
        let p = params(&spec(
            dense(4, |i, j| if i == j { 2.0 } else { 0.0 }),
            vec![1.0, 0.0, 0.0, 0.0],
            1.0,
            2,
            1.0,
        ))
        .unwrap();
        assert_relative_eq!(p.c_min, 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.c_max, 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.gamma, 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.rho_u, 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.rho_l, 2.0, epsilon = 1e-14);
        assert_relative_eq!(p.theta_u, 1.0, epsilon = 1e-14);
        assert_relative_eq!(p.theta_l, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn single_complement_index_flags_rho_l() {
        let p = params(&spec(
            Covariance::Identity(3),
            vec![1.0, 1.0, 0.0],
            1.0,
            2,
            1.0,
        ))
        .unwrap();
        assert!(p.rho_l.is_infinite() && p.theta_l.is_infinite());
        assert!(p.rho_l_undefined);
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"rho_l\":\"inf\""));
    }

    #[test]
    fn singular_block_is_an_error() {
        let sigma = Covariance::Dense(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ));
        assert!(matches!(
            structural(&sigma, &SupportSet::from_zero_based([0, 1])),
            Err(Error::SingularSigmaSS)
        ));
    }

    #[test]
    fn phi_examples() {
        assert_relative_eq!(
            phi_n_from(2.0, 1.0, 3, 1.0, 1.0, 1),
            4.0 / (8.0 * 3f64.ln()),
            epsilon = 1e-15
        );
        assert_relative_eq!(phi_n_from(2.0, 1.0, 3, 1.0, 1.0, 1), 0.4551, epsilon = 1e-4);
        assert!(phi_n_from(2.0, 0.0, 3, 1.0, 1.0, 1).is_infinite());
        let p = params(&spec(
            Covariance::Identity(5),
            vec![1.0, 0.0, 0.0, 0.0, 0.0],
            0.0,
            2,
            1.0,
        ))
        .unwrap();
        assert!(p.noiseless && p.phi_n.is_infinite());
    }

    #[test]
    fn m_bar_examples() {
        let ln_n = 1.0;
        assert_relative_eq!(
            m_bar_from(0.0, 1.0, 1.0, 1, 1, ln_n, 0.5).unwrap(),
            2.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            m_bar_from(1.0, 1.0, 1.0, 1, 1, ln_n, 0.5).unwrap(),
            4.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            m_bar_from(0.3, 2.0, 1.5, 7, 0, 2.0, 0.25).unwrap(),
            1.3 / (2.0 * 1.5) / (2.0 * 2.0 * 0.25),
            epsilon = 1e-15
        );
        assert!(m_bar_from(0.0, 1.0, 1.0, 1, 1, 1.0, 0.0).is_err());
    }

    #[test]
    fn g_examples() {
        let sp = spec(
            Covariance::Identity(6),
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            0.0,
            4,
            2.0,
        );
        assert_relative_eq!(g_lambda(&sp).unwrap(), 0.25, epsilon = 1e-15);
        let mut noisy = sp.clone();
        noisy.eta = 3.0;
        // s = 1: ln s = 0 removes the noise term.
        assert_relative_eq!(g_lambda(&noisy).unwrap(), 0.25, epsilon = 1e-15);
        noisy.v[1] = 1.0;
        let expected = 0.25 + 20.0 * (9.0 * 2f64.ln() / 4.0).sqrt();
        assert_relative_eq!(g_lambda(&noisy).unwrap(), expected, epsilon = 1e-12);

        let diag = dense(3, |i, j| if i == j { 4.0 } else { 0.0 });
        let sp = spec(diag, vec![1.0, 0.0, 0.0], 0.0, 1, 1.0);
        // ‖Σ^{-1/2}‖∞ = 1/2.
        assert_relative_eq!(g_lambda(&sp).unwrap(), 0.125, epsilon = 1e-14);
    }

    #[test]
    fn assumption_examples() {
        // φ_N = 100 with Σ = I, s = 1, m = 400, N = 10^4, η = 1.
        let n = 10_000;
        let m = 400;
        let lambda = (100.0 * 8.0 * (n as f64).ln() * m as f64).sqrt();
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        let p = params(&spec(Covariance::Identity(n), v, 1.0, m, lambda)).unwrap();
        assert_relative_eq!(p.phi_n, 100.0, max_relative = 1e-12);
        assert!(p.ai_ok && p.epsilon_used > 0.4 && p.epsilon_used < 0.5);

        // γ = 0: the projection row sums reach 1.
        let rho = 0.5;
        let sigma = dense(3, |i, j| match (i, j) {
            (i, j) if i == j => 1.0,
            (2, _) | (_, 2) => rho,
            _ => 0.0,
        });
        let p = params(&spec(sigma, vec![1.0, 1.0, 0.0], 1.0, 50, 1.0)).unwrap();
        assert_relative_eq!(p.gamma, 0.0, epsilon = 1e-14);
        assert!(!p.a0_ok);

        // (aii) flips as min |v_j| crosses g(λ) = 1/8.
        let base = spec(
            Covariance::Identity(4),
            vec![0.125 * (1.0 + 1e-9), 0.0, 0.0, 0.0],
            0.0,
            4,
            1.0,
        );
        assert!(params(&base).unwrap().aii_ok);
        let mut below = base.clone();
        below.v[0] = 0.125 * (1.0 - 1e-9);
        assert!(!params(&below).unwrap().aii_ok);
    }

    #[test]
    fn k_hat_example() {
        let sp = spec(Covariance::Identity(2), vec![10.0, 0.0], 0.0, 1, 1.0);
        let k = k_hat(&sp).unwrap();
        assert_relative_eq!(k.sigma_hat, 1.0 / 64.0, epsilon = 1e-15);
        let a = (2f64.sqrt() * 10.0).max(3.0 + 6.0 * 2f64.sqrt());
        assert_relative_eq!(k.alpha_hat, a, epsilon = 1e-12);
        let q = q_poly(a, 1.0 / 64.0, 1.0, 2).unwrap();
        assert_relative_eq!(k.k_hat, 2f64.sqrt() * (q * 4096.0), max_relative = 1e-12);

        let mut bad = sp.clone();
        bad.v[0] = 0.4;
        assert!(matches!(k_hat(&bad), Err(Error::NonpositiveSigmaHat(_))));
    }

    #[test]
    fn k_hat_monotone() {
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let s = 1e-8 * 1.3f64.powi(k);
            let v = k_hat_from(s, 5.0, 3, 10, 0.5).unwrap();
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = 0.0;
        for k in 0..60 {
            let v = k_hat_from(1e-3, 1.0 + k as f64, 3, 10, 0.5).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn scaling_covariance() {
        let base = dense(5, |i, j| 0.3f64.powi((i as i32 - j as i32).abs()));
        let s = SupportSet::from_zero_based([0, 2]);
        let p = structural(&base, &s).unwrap();
        for c in [0.5, 2.0, 10.0] {
            let scaled = Covariance::dense(base.to_dense() * c).unwrap();
            let q = structural(&scaled, &s).unwrap();
            assert_relative_eq!(q.c_min, c * p.c_min, max_relative = 1e-12);
            assert_relative_eq!(q.c_max, c * p.c_max, max_relative = 1e-12);
            assert_relative_eq!(q.rho_l, c * p.rho_l, max_relative = 1e-12);
            assert_relative_eq!(q.rho_u, c * p.rho_u, max_relative = 1e-12);
            assert_relative_eq!(q.gamma, p.gamma, max_relative = 1e-12);
            assert_relative_eq!(q.theta_l, p.theta_l, max_relative = 1e-12);
            assert_relative_eq!(q.theta_u, p.theta_u, max_relative = 1e-12);
        }
    }

    fn simple_spec(n: usize, s: usize, m: usize, lambda: f64) -> EnsembleSpec {
        let mut v = vec![0.0; n];
        for x in v.iter_mut().take(s) {
            *x = 1.0;
        }
        spec(Covariance::Identity(n), v, 0.0, m, lambda)
    }

    #[test]
    fn simple_hypothesis_examples() {
        let n = 30_000;
        let ok = simple_spec(n, 10, 3000, 1.0);
        let v = check_simple(&ok).unwrap();
        assert!(v.all_ok, "{v:?}");

        let bad_iii = simple_spec(n, 10, 3000, 1.0 / (n * n) as f64);
        let v = check_simple(&bad_iii).unwrap();
        assert!(!v.hyp_iii && !v.all_ok);

        let few = simple_spec(n, 3, 3000, 1.0);
        assert!(!check_simple(&few).unwrap().side_conditions);

        let narrow = simple_spec(1024, 10, 840, 1.0);
        let v = check_simple(&narrow).unwrap();
        assert!(v.epsilon_window_empty && !v.hyp_i);
    }

    #[test]
    fn cap_holds_away_from_the_edge_of_hypothesis_ii() {
        let n = 30_000;
        let sp = simple_spec(n, 10, 3000, 1.0);
        assert!(check_simple(&sp).unwrap().all_ok);
        assert!(k_hat(&sp).unwrap().k_hat <= k_hat_cap(n, &sp.v));
    }

    #[test]
    fn cap_can_fail_at_the_edge_of_hypothesis_ii() {
        // Hypothesis (ii) only forces min|v_j| - g > 1/(2mN²), not 1/N²,
        // so σ̂ can be small enough to push K̂ over the cap.
        let n = 30_000;
        let (m, nf) = (3000.0, n as f64);
        let lambda = (2.0 * m - 1.0 / (nf * nf)) * (1.0 - 1e-16);
        let sp = simple_spec(n, 10, 3000, lambda);
        assert!(check_simple(&sp).unwrap().all_ok);
        let k = k_hat(&sp).unwrap();
        assert!(k.sigma_hat < 1.0 / (nf * nf));
        assert!(k.k_hat > k_hat_cap(n, &sp.v));
    }

    #[test]
    fn spec_json_roundtrip() {
        let sp = EnsembleSpec {
            sigma: Covariance::Dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0])),
            v: vec![1.0, 0.0],
            eta: 0.1,
            m: 3,
            lambda: 0.5,
            c3: 2.0,
            c_bar: None,
        };
        let j = serde_json::to_string(&sp).unwrap();
        assert!(j.contains("\"dense\":[[1.0,0.2],[0.2,1.0]]"));
        assert_eq!(serde_json::from_str::<EnsembleSpec>(&j).unwrap(), sp);
        let id: EnsembleSpec = serde_json::from_str(
            r#"{"sigma":{"identity":3},"v":[1,0,0],"eta":0,"m":2,"lambda":1}"#,
        )
        .unwrap();
        assert_eq!(id.c3, 1.0);
        assert_eq!(id.c_bar(), 1.0);
        assert!(serde_json::from_str::<EnsembleSpec>(
            r#"{"sigma":{"dense":[[1,2],[2,1]]},"v":[1,0],"eta":0,"m":2,"lambda":1}"#
        )
        .is_err());
    }
}
