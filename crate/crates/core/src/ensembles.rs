//! Random instances and Monte Carlo experiments.
//!
//! Every trial owns its RNG: a ChaCha8 generator keyed by the master seed,
//! with the stream number derived from (distribution, N, trial index). Trials
//! therefore produce the same numbers whatever the worker count or the order
//! in which they run, and results are collected in trial order.

use nalgebra::{DMatrix, DVector};
use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ext_real, support_from_threshold, LassoInstance, SupportSet};
use crate::oracle1d::{stsp_1d, support_1d, Instance1D};
use crate::solver::{solve_with, SolverOptions};
use crate::wainwright::{spectral_tail_level, Covariance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dist {
    Exp1,
    Normal { mu: f64, sigma2: f64 },
    Uniform01,
    GaussianRows { sigma: Covariance },
}

impl Dist {
    pub fn label(&self) -> String {
        match self {
            Dist::Exp1 => "exp1".into(),
            Dist::Normal { mu, sigma2 } => format!("normal(mu={mu},sigma2={sigma2})"),
            Dist::Uniform01 => "uniform01".into(),
            Dist::GaussianRows { .. } => "gaussian_rows".into(),
        }
    }

    fn code(&self) -> u64 {
        match self {
            Dist::Exp1 => 1,
            Dist::Normal { mu, sigma2 } => 2 ^ mix(mu.to_bits() ^ mix(sigma2.to_bits())),
            Dist::Uniform01 => 3,
            Dist::GaussianRows { .. } => 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Dist::Normal { mu, sigma2 }
                if !(mu.is_finite() && *sigma2 > 0.0 && sigma2.is_finite()) =>
            {
                Err(Error::Domain(format!(
                    "normal needs finite mu and sigma2 > 0, got ({mu}, {sigma2})"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds several keys into one stream number.
pub fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5eed, |acc, &p| mix(acc ^ mix(p)))
}

/// Generator for one trial: master seed plus an independent stream.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream of trial `trial` of `dist` at size `n`.
pub fn trial_stream(dist: &Dist, n: usize, trial: usize) -> u64 {
    stream_key(&[dist.code(), n as u64, trial as u64])
}

/// An `m × n` matrix drawn from `dist`.
pub fn draw_matrix<R: Rng>(dist: &Dist, m: usize, n: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    dist.validate()?;
    Ok(match dist {
        Dist::Exp1 => DMatrix::from_fn(m, n, |_, _| Exp1.sample(rng)),
        Dist::Normal { mu, sigma2 } => {
            let d = Normal::new(*mu, sigma2.sqrt()).expect("validated");
            DMatrix::from_fn(m, n, |_, _| d.sample(rng))
        }
        Dist::Uniform01 => DMatrix::from_fn(m, n, |_, _| rng.sample(Open01)),
        Dist::GaussianRows { sigma } => {
            if sigma.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: sigma.n(),
                    got: n,
                });
            }
            // Filled row by row so the stream layout does not depend on storage order.
            let mut z = DMatrix::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    z[(i, j)] = StandardNormal.sample(rng);
                }
            }
            match sigma.cholesky_factor() {
                None => z,
                Some(l) => z * l.transpose(),
            }
        }
    })
}

/// Reproducible `m × n` design for `(dist, seed)` alone.
pub fn draw_instance(dist: &Dist, n: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    draw_matrix(dist, m, n, &mut trial_rng(seed, trial_stream(dist, n, 0)))
}

/// Sorted sample with `F̂(t) = #{x_i <= t} / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCDF {
    sorted: Vec<f64>,
}

impl EmpiricalCDF {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.iter().any(|v| v.is_nan()) {
            return Err(Error::Domain("sample contains NaN".into()));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    pub fn eval(&self, t: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v <= t) as f64 / self.sorted.len() as f64
    }

    /// `F̂(t-)`.
    pub fn eval_left(&self, t: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&v| v < t) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    pub fn median(&self) -> f64 {
        median_sorted(&self.sorted)
    }
}

fn median_sorted(v: &[f64]) -> f64 {
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

/// `sup_t |F̂(t) - F(t)|` over the sample points, using both one-sided
/// limits of `F̂`.
pub fn ks_distance(cdf: &EmpiricalCDF, target: impl Fn(f64) -> f64) -> Result<f64> {
    ks_distance_within(cdf, target, f64::NEG_INFINITY, f64::INFINITY)
}

/// KS distance with `t` restricted to the open interval `(lo, hi)`. A
/// continuous target is assumed, so the supremum is attained at sample points
/// inside the interval or in the limits at its ends.
pub fn ks_distance_within(
    cdf: &EmpiricalCDF,
    target: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if cdf.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut d: f64 = 0.0;
    for &x in cdf.values().iter().filter(|&&x| x > lo && x < hi) {
        let f = target(x);
        d = d
            .max((cdf.eval(x) - f).abs())
            .max((cdf.eval_left(x) - f).abs());
    }
    if lo.is_finite() {
        d = d.max((cdf.eval(lo) - target(lo)).abs());
    }
    if hi.is_finite() {
        d = d.max((cdf.eval_left(hi) - target(hi)).abs());
    }
    Ok(d)
}

/// Scaling applied to the stability support before comparing with the limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `stsp` itself.
    Raw,
    /// `2 sqrt(2 ln N) stsp`.
    SqrtLog,
    /// `2N stsp`.
    Linear,
}

impl Scaling {
    pub fn for_dist(dist: &Dist) -> Result<Self> {
        match dist {
            Dist::Exp1 => Ok(Scaling::Raw),
            Dist::Normal { .. } => Ok(Scaling::SqrtLog),
            Dist::Uniform01 => Ok(Scaling::Linear),
            Dist::GaussianRows { .. } => Err(Error::Domain(
                "no one-row limit law for gaussian_rows".into(),
            )),
        }
    }

    pub fn factor(self, n: usize) -> f64 {
        let nf = n as f64;
        match self {
            Scaling::Raw => 1.0,
            Scaling::SqrtLog => 2.0 * (2.0 * nf.ln()).sqrt(),
            Scaling::Linear => 2.0 * nf,
        }
    }
}

/// Limit law of the scaled stability support and the range of `t` on which
/// it is claimed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitLaw {
    /// CDF `1 - exp(-rate t)`.
    pub rate: f64,
    pub lo: f64,
    #[serde(with = "ext_real")]
    pub hi: f64,
}

impl LimitLaw {
    pub fn for_dist(dist: &Dist, y: f64) -> Result<Self> {
        match dist {
            Dist::Exp1 => Ok(LimitLaw {
                rate: 2.0,
                lo: 0.0,
                hi: y.abs(),
            }),
            Dist::Normal { sigma2, .. } => Ok(LimitLaw {
                rate: 1.0 / sigma2.sqrt(),
                lo: 0.0,
                hi: f64::INFINITY,
            }),
            Dist::Uniform01 => Ok(LimitLaw {
                rate: 1.0,
                lo: 0.0,
                hi: f64::INFINITY,
            }),
            Dist::GaussianRows { .. } => Err(Error::Domain(
                "no one-row limit law for gaussian_rows".into(),
            )),
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            0.0
        } else {
            1.0 - (-self.rate * t).exp()
        }
    }
}

/// One-row trial of the limit-law experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StspTrial {
    pub n: usize,
    pub trial: usize,
    pub stream: u64,
    /// `None` when the draw had a tied maximum and was discarded.
    pub stsp: Option<f64>,
    pub scaled: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawResult {
    pub n: usize,
    pub dist: String,
    pub scaling: Scaling,
    pub law: LimitLaw,
    pub cdf: EmpiricalCDF,
    pub ks: f64,
    pub discarded_ties: usize,
    pub zero_stsp: usize,
    pub trials: Vec<StspTrial>,
}

/// Exact stability supports of `trials` one-row draws per `N`, scaled and
/// compared with the limit law. Ties are discarded and counted.
pub fn run_limit_laws(
    dist: &Dist,
    n_grid: &[usize],
    trials: usize,
    y: f64,
    lambda: f64,
    seed: u64,
) -> Result<Vec<LimitLawResult>> {
    dist.validate()?;
    let scaling = Scaling::for_dist(dist)?;
    let law = LimitLaw::for_dist(dist, y)?;
    let mut out = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        if n == 0 {
            return Err(Error::Domain("N must be positive".into()));
        }
        let factor = scaling.factor(n);
        let rows: Vec<StspTrial> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let stream = trial_stream(dist, n, t);
                let mut rng = trial_rng(seed, stream);
                let a = draw_matrix(dist, 1, n, &mut rng)?;
                let inst = Instance1D::new(y, a.row(0).iter().copied().collect(), lambda)?;
                let stsp = match support_1d(&inst) {
                    Err(Error::Tie { .. }) => None,
                    Err(e) => return Err(e),
                    Ok(_) => Some(stsp_1d(&inst)),
                };
                Ok(StspTrial {
                    n,
                    trial: t,
                    stream,
                    stsp,
                    scaled: stsp.map(|s| s * factor),
                })
            })
            .collect::<Result<_>>()?;
        let scaled: Vec<f64> = rows.iter().filter_map(|r| r.scaled).collect();
        let discarded_ties = rows.len() - scaled.len();
        let zero_stsp = rows.iter().filter(|r| r.stsp == Some(0.0)).count();
        let cdf = EmpiricalCDF::new(scaled)?;
        let ks = if cdf.is_empty() {
            f64::NAN
        } else {
            ks_distance_within(&cdf, |t| law.cdf(t), law.lo, law.hi)?
        };
        out.push(LimitLawResult {
            n,
            dist: dist.label(),
            scaling,
            law,
            cdf,
            ks,
            discarded_ties,
            zero_stsp,
            trials: rows,
        });
    }
    Ok(out)
}

/// Outcome of the reference solver on a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Converged,
    BudgetExhausted,
}

/// One Monte Carlo draw of the support-recovery experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub stream: u64,
    pub trial: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    pub dist: String,
    #[serde(with = "ext_real")]
    pub cond: f64,
    pub oracle_support: SupportSet,
    pub solver_support: SupportSet,
    pub success: bool,
    pub threshold: f64,
    pub solver_status: SolverStatus,
    pub gap_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Figure1Config {
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<usize>,
    pub trials: usize,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    #[serde(default = "default_fig_lambda")]
    pub lambda: f64,
    #[serde(default = "default_b")]
    pub y: f64,
    #[serde(default = "default_dists")]
    pub dists: Vec<Dist>,
    #[serde(default = "default_fig_gap_tol")]
    pub gap_tol: f64,
    #[serde(default = "default_fig_sweeps")]
    pub max_sweeps: usize,
}

fn default_thresholds() -> Vec<f64> {
    vec![1e-3, 1e-12]
}
fn default_fig_lambda() -> f64 {
    1e-2
}
fn default_b() -> f64 {
    1.0
}
pub fn default_dists() -> Vec<Dist> {
    vec![
        Dist::Exp1,
        Dist::Normal {
            mu: 1.0,
            sigma2: 1e-4,
        },
        Dist::Uniform01,
    ]
}
/// Gap tolerance of the reference solver in the recovery experiment.
pub const FIGURE1_GAP_TOL: f64 = 1e-12;
/// Sweep budget of the reference solver in the recovery experiment.
pub const FIGURE1_MAX_SWEEPS: usize = crate::solver::DEFAULT_MAX_SWEEPS;
fn default_fig_gap_tol() -> f64 {
    FIGURE1_GAP_TOL
}
fn default_fig_sweeps() -> usize {
    FIGURE1_MAX_SWEEPS
}

impl Figure1Config {
    pub fn new(n_grid: Vec<usize>, trials: usize) -> Self {
        Self {
            n_grid,
            trials,
            thresholds: default_thresholds(),
            lambda: default_fig_lambda(),
            y: default_b(),
            dists: default_dists(),
            gap_tol: FIGURE1_GAP_TOL,
            max_sweeps: FIGURE1_MAX_SWEEPS,
        }
    }
}

/// Aggregate of one `(N, dist, threshold)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Row {
    #[serde(rename = "N")]
    pub n: usize,
    pub dist: String,
    pub threshold: f64,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub prop_cond_gt_1000: f64,
    #[serde(with = "ext_real")]
    pub median_cond_correct: f64,
    #[serde(with = "ext_real")]
    pub median_cond_incorrect: f64,
    pub budget_exhausted: usize,
    pub discarded_ties: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Figure1Output {
    pub records: Vec<TrialRecord>,
    pub summary: Vec<Figure1Row>,
}

/// Support recovery by the reference solver on one-row random instances,
/// against the exact oracle. One solve per trial is shared by all thresholds.
pub fn run_figure1(cfg: &Figure1Config, seed: u64) -> Result<Figure1Output> {
    if !(cfg.lambda > 0.0) || !(cfg.gap_tol > 0.0) {
        return Err(Error::Domain("lambda and gap_tol must be positive".into()));
    }
    if cfg.thresholds.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::Domain("thresholds must be nonnegative".into()));
    }
    let opts = SolverOptions::new(cfg.gap_tol).max_sweeps(cfg.max_sweeps);
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for &n in &cfg.n_grid {
        for dist in &cfg.dists {
            dist.validate()?;
            let per_trial: Vec<Option<Vec<TrialRecord>>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| figure1_trial(cfg, &opts, dist, n, t, seed))
                .collect::<Result<_>>()?;
            let ties = per_trial.iter().filter(|r| r.is_none()).count();
            let kept: Vec<TrialRecord> = per_trial.into_iter().flatten().flatten().collect();
            for &thr in &cfg.thresholds {
                let cell: Vec<&TrialRecord> = kept.iter().filter(|r| r.threshold == thr).collect();
                summary.push(aggregate(n, dist, thr, &cell, ties));
            }
            records.extend(kept);
        }
    }
    Ok(Figure1Output { records, summary })
}

fn figure1_trial(
    cfg: &Figure1Config,
    opts: &SolverOptions,
    dist: &Dist,
    n: usize,
    t: usize,
    seed: u64,
) -> Result<Option<Vec<TrialRecord>>> {
    let stream = trial_stream(dist, n, t);
    let mut rng = trial_rng(seed, stream);
    let a = draw_matrix(dist, 1, n, &mut rng)?;
    let one = Instance1D::new(cfg.y, a.row(0).iter().copied().collect(), cfg.lambda)?;
    let oracle = match support_1d(&one) {
        Err(Error::Tie { .. }) => return Ok(None),
        r => r?,
    };
    let stsp = stsp_1d(&one);
    let cond = if stsp > 0.0 {
        1.0 / stsp
    } else {
        f64::INFINITY
    };
    let inst = LassoInstance::new(DVector::from_element(1, cfg.y), a, cfg.lambda)?;
    let (x, status, gap) = match solve_with(&inst, opts) {
        Ok(s) => (s.x, SolverStatus::Converged, s.gap_bound),
        Err(Error::Budget { x, gap, .. }) => (x, SolverStatus::BudgetExhausted, gap),
        Err(e) => return Err(e),
    };
    Ok(Some(
        cfg.thresholds
            .iter()
            .map(|&thr| {
                let solver_support = support_from_threshold(&x, thr);
                TrialRecord {
                    seed,
                    stream,
                    trial: t,
                    n,
                    m: 1,
                    dist: dist.label(),
                    cond,
                    success: solver_support == oracle,
                    oracle_support: oracle.clone(),
                    solver_support,
                    threshold: thr,
                    solver_status: status,
                    gap_bound: gap,
                }
            })
            .collect(),
    ))
}

fn aggregate(
    n: usize,
    dist: &Dist,
    threshold: f64,
    cell: &[&TrialRecord],
    ties: usize,
) -> Figure1Row {
    let trials = cell.len();
    let successes = cell.iter().filter(|r| r.success).count();
    let frac = |k: usize| {
        if trials == 0 {
            f64::NAN
        } else {
            k as f64 / trials as f64
        }
    };
    let med = |ok: bool| {
        let mut v: Vec<f64> = cell
            .iter()
            .filter(|r| r.success == ok)
            .map(|r| r.cond)
            .collect();
        v.sort_by(f64::total_cmp);
        median_sorted(&v)
    };
    Figure1Row {
        n,
        dist: dist.label(),
        threshold,
        trials,
        successes,
        success_rate: frac(successes),
        prop_cond_gt_1000: frac(cell.iter().filter(|r| r.cond > 1000.0).count()),
        median_cond_correct: med(true),
        median_cond_incorrect: med(false),
        budget_exhausted: cell
            .iter()
            .filter(|r| r.solver_status == SolverStatus::BudgetExhausted)
            .count(),
        discarded_ties: ties,
    }
}

/// Frequency of `‖A‖₂ >= ‖Σ‖₂^{1/2}(3 sqrt(m) + 6 sqrt(N))` over Gaussian designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub draws: usize,
    pub level: f64,
    pub exceed: usize,
    pub fraction: f64,
    /// `e^{-m}`.
    pub bound: f64,
    /// `sqrt(bound / draws)`, the standard error of a frequency at the bound.
    pub std_error: f64,
    pub max_norm_seen: f64,
}

pub fn norm_tail_experiment(
    sigma: &Covariance,
    m: usize,
    draws: usize,
    seed: u64,
) -> Result<TailResult> {
    if draws == 0 {
        return Err(Error::EmptySample);
    }
    let n = sigma.n();
    let dist = Dist::GaussianRows {
        sigma: sigma.clone(),
    };
    let level = spectral_tail_level(sigma, m);
    let norms: Vec<f64> = (0..draws)
        .into_par_iter()
        .map(|t| {
            let a = draw_matrix(&dist, m, n, &mut trial_rng(seed, trial_stream(&dist, n, t)))?;
            Ok(crate::linalg::spectral_norm(&a))
        })
        .collect::<Result<_>>()?;
    let exceed = norms.iter().filter(|&&v| v >= level).count();
    let bound = (-(m as f64)).exp();
    Ok(TailResult {
        m,
        n,
        draws,
        level,
        exceed,
        fraction: exceed as f64 / draws as f64,
        bound,
        std_error: (bound / draws as f64).sqrt(),
        max_norm_seen: norms.iter().copied().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_entries_in_open_unit_interval() {
        let a = draw_instance(&Dist::Uniform01, 5000, 2, 1).unwrap();
        assert!(a.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn exponential_mean() {
        let a = draw_instance(&Dist::Exp1, 100_000, 1, 2).unwrap();
        assert!((a.mean() - 1.0).abs() < 0.02);
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn gaussian_rows_covariance() {
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.2, 0.5, 2.0, -0.3, 0.2, -0.3, 0.5]);
        let cov = Covariance::dense(s.clone()).unwrap();
        let a = draw_instance(&Dist::GaussianRows { sigma: cov }, 3, 100_000, 3).unwrap();
        let emp = a.transpose() * &a / a.nrows() as f64;
        for i in 0..3 {
            for j in 0..3 {
                assert!(
                    (emp[(i, j)] - s[(i, j)]).abs() < 0.03,
                    "({i},{j}): {}",
                    emp[(i, j)]
                );
            }
        }
    }

    #[test]
    fn draws_are_reproducible() {
        let d = Dist::Normal {
            mu: 1.0,
            sigma2: 1e-4,
        };
        assert_eq!(
            draw_instance(&d, 50, 2, 9).unwrap(),
            draw_instance(&d, 50, 2, 9).unwrap()
        );
        assert_ne!(
            draw_instance(&d, 50, 2, 9).unwrap(),
            draw_instance(&d, 50, 2, 10).unwrap()
        );
    }

    #[test]
    fn ks_examples() {
        let law = |t: f64| if t <= 0.0 { 0.0 } else { 1.0 - (-t).exp() };
        let median = 2f64.ln();
        let c = EmpiricalCDF::new(vec![median; 10]).unwrap();
        assert_relative_eq!(ks_distance(&c, law).unwrap(), 0.5, epsilon = 1e-12);
        let one = EmpiricalCDF::new(vec![0.0]).unwrap();
        assert_relative_eq!(ks_distance(&one, law).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(
            ks_distance(&EmpiricalCDF::new(vec![]).unwrap(), law),
            Err(Error::EmptySample)
        ));

        let mut rng = trial_rng(4, 0);
        let sample: Vec<f64> = (0..10_000).map(|_| Exp1.sample(&mut rng)).collect();
        let c = EmpiricalCDF::new(sample).unwrap();
        assert!(ks_distance(&c, law).unwrap() <= 0.02);
    }

    #[test]
    fn ecdf_basics() {
        let c = EmpiricalCDF::new(vec![3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(c.eval(0.5), 0.0);
        assert_eq!(c.eval(2.0), 0.75);
        assert_eq!(c.eval_left(2.0), 0.25);
        assert_eq!(c.eval(10.0), 1.0);
        assert_eq!(c.median(), 2.0);
        assert!(EmpiricalCDF::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn limit_law_small_run() {
        let r = run_limit_laws(&Dist::Exp1, &[50, 100], 200, 1.0, 0.01, 5).unwrap();
        assert_eq!(r.len(), 2);
        for res in &r {
            assert_eq!(res.discarded_ties, 0);
            assert_eq!(res.zero_stsp, 0);
            assert_eq!(res.cdf.len(), 200);
            assert!(res.ks.is_finite());
        }
        assert!(run_limit_laws(
            &Dist::GaussianRows {
                sigma: Covariance::Identity(3)
            },
            &[3],
            1,
            1.0,
            0.1,
            0
        )
        .is_err());
    }

    #[test]
    fn figure1_shapes() {
        let cfg = Figure1Config::new(vec![10, 100], 20);
        let out = run_figure1(&cfg, 7).unwrap();
        assert_eq!(out.summary.len(), 2 * 3 * 2);
        assert_eq!(out.records.len(), 2 * 3 * 20 * 2);
        for r in &out.records {
            assert_eq!(r.success, r.oracle_support == r.solver_support);
            assert!(r.cond >= 1.0);
        }
        let empty = run_figure1(&Figure1Config::new(vec![10, 100], 0), 7).unwrap();
        assert!(empty.records.is_empty());
        assert!(empty.summary.iter().all(|r| r.trials == 0));
    }

    #[test]
    fn figure1_exponential_small_n() {
        let mut cfg = Figure1Config::new(vec![10], 100);
        cfg.dists = vec![Dist::Exp1];
        cfg.thresholds = vec![1e-3];
        let out = run_figure1(&cfg, 8).unwrap();
        assert!(out.summary[0].success_rate >= 0.95, "{:?}", out.summary[0]);
    }

    #[test]
    fn determinism_across_pools() {
        let cfg = Figure1Config::new(vec![30], 12);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let three = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let a = one.install(|| run_figure1(&cfg, 99).unwrap());
        let b = three.install(|| run_figure1(&cfg, 99).unwrap());
        // Empty cells carry NaN medians, so compare serialized forms.
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        let ta = one.install(|| run_limit_laws(&Dist::Uniform01, &[40], 30, 1.0, 0.01, 3).unwrap());
        let tb =
            three.install(|| run_limit_laws(&Dist::Uniform01, &[40], 30, 1.0, 0.01, 3).unwrap());
        assert_eq!(ta, tb);
    }

    #[test]
    fn tail_experiment_runs() {
        let r = norm_tail_experiment(&Covariance::Identity(10), 5, 50, 1).unwrap();
        assert_eq!(r.draws, 50);
        assert!(r.max_norm_seen < r.level);
    }
}
