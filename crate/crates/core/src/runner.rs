//! Config-driven experiment runner behind the `lasso-cond` binary.
//!
//! A config names one command, its parameters, a seed and an output
//! directory. Every artifact is written through a temporary file and renamed
//! into place, and every run ends with `manifest.json`. Only the manifest
//! carries wall time and timestamp, so rerunning a config reproduces all other
//! files byte for byte.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::certify::{
    self, build_adversary, certified_select, default_gap_rule, demo_failure,
    CappedCertifiedSelector, DyadicReader, FailureReport, SelectionOutcome, TruncateSolveVictim,
    Victim, VictimOutput,
};
use crate::condition::{certificate, probe_condition_lb};
use crate::ensembles::{self, run_figure1, run_limit_laws, Dist, Figure1Config};
use crate::error::Error;
use crate::model::{support_from_threshold, LassoInstance};
use crate::oracle1d::{stsp_1d, Instance1D};
use crate::solver::{solve_with, SolverOptions, DEFAULT_MAX_SWEEPS};
use crate::wainwright::{self, EnsembleSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Condition,
    Certify,
    #[serde(rename = "ensemble-t24")]
    EnsembleT24,
    Figure1,
    Wainwright,
    Adversary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default = "empty_object")]
    pub params: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
}

fn empty_object() -> Value {
    json!({})
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl RunError {
    fn config(field: &str, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Self::Config { field, message } => json!({
                "status": "error",
                "kind": "config",
                "field": field,
                "message": message,
            }),
            Self::Runtime(e) => json!({
                "status": "error",
                "kind": "runtime",
                "message": e.to_string(),
            }),
        }
    }
}

fn path_string(path: &serde_path_to_error::Path) -> String {
    let p = path.to_string();
    if p == "." {
        String::new()
    } else {
        p
    }
}

/// Parses a config, reporting the path of the first offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, RunError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = path_string(e.path());
        RunError::config(
            if field.is_empty() { "<root>" } else { &field },
            e.inner().to_string(),
        )
    })
}

fn parse_params<T: DeserializeOwned>(params: &Value) -> Result<T, RunError> {
    serde_path_to_error::deserialize(params.clone()).map_err(|e| {
        let inner = path_string(e.path());
        let field = if inner.is_empty() {
            "params".to_string()
        } else {
            format!("params.{inner}")
        };
        RunError::config(&field, e.inner().to_string())
    })
}

/// `{:.16e}`: 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Status of one command and its parameters with defaults filled in.
struct Produced {
    status: &'static str,
    resolved: Value,
}

struct Out<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Out<'_> {
    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<(), Error> {
        write_json(&self.dir.join(name), v)?;
        self.names.push(name.into());
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
        write_csv(&self.dir.join(name), header, rows)?;
        self.names.push(name.into());
        Ok(())
    }
}

/// Instance used by `certify` and `adversary` when none is given.
pub fn demo_instance() -> LassoInstance {
    LassoInstance::from_rows(&[1.0], &[vec![0.9, 0.3]], 0.01).expect("valid demo")
}

/// One-row center with stability support about `6.7e-5`, below `2^-13`.
pub fn demo_adversary_center() -> LassoInstance {
    LassoInstance::from_rows(&[1.0], &[vec![0.5, 0.2]], 0.9998).expect("valid center")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolveParams {
    instance: LassoInstance,
    #[serde(default = "d_gap")]
    gap_tol: f64,
    #[serde(default = "d_sweeps")]
    max_sweeps: usize,
    #[serde(default = "d_tau")]
    tau: f64,
}

fn d_gap() -> f64 {
    1e-12
}
fn d_sweeps() -> usize {
    DEFAULT_MAX_SWEEPS
}
fn d_tau() -> f64 {
    1e-9
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionParams {
    instance: LassoInstance,
    #[serde(default = "d_gap")]
    gap_tol: f64,
    #[serde(default = "d_tau")]
    tau: f64,
    /// Random perturbations at `probe_radius`; 0 disables the probe.
    #[serde(default)]
    probe_samples: usize,
    #[serde(default)]
    probe_radius: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifyParams {
    #[serde(default = "demo_instance")]
    instance: LassoInstance,
    #[serde(default = "d_nmax")]
    n_max: u32,
}

fn d_nmax() -> u32 {
    certify::DEFAULT_N_MAX
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct T24Params {
    dist: Dist,
    #[serde(rename = "N_grid")]
    n_grid: Vec<usize>,
    trials: usize,
    #[serde(default = "d_one")]
    y: f64,
    #[serde(default = "d_lambda")]
    lambda: f64,
}

fn d_one() -> f64 {
    1.0
}
fn d_lambda() -> f64 {
    1e-2
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WainwrightRunParams {
    spec: EnsembleSpec,
    /// Draws for the `‖A‖₂` tail check; 0 skips it.
    #[serde(default)]
    tail_draws: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdversaryParams {
    #[serde(default = "demo_adversary_center")]
    center: LassoInstance,
    #[serde(default = "d_k")]
    k: u32,
    /// Defaults to the midpoint of `(stsp, 2^-k-1)` for one-row centers.
    #[serde(default)]
    r: Option<f64>,
    #[serde(default = "d_samples")]
    samples: usize,
}

fn d_k() -> u32 {
    12
}
fn d_samples() -> usize {
    100
}

fn positive(field: &str, v: f64) -> Result<(), RunError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(RunError::config(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn nonzero(field: &str, v: usize) -> Result<(), RunError> {
    if v > 0 {
        Ok(())
    } else {
        Err(RunError::config(field, "must be at least 1"))
    }
}

fn resolved<T: Serialize>(p: &T) -> Result<Value, RunError> {
    serde_json::to_value(p).map_err(|e| RunError::Runtime(e.into()))
}

fn support_cell(s: &Option<crate::model::SupportSet>) -> String {
    s.as_ref()
        .map_or_else(|| "undecided".into(), |s| s.to_string())
}

fn output_cell(o: &VictimOutput) -> String {
    match o {
        VictimOutput::Support(s) => s.to_string(),
        VictimOutput::Abstain => "abstain".into(),
    }
}

fn run_solve(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let p: SolveParams = parse_params(&cfg.params)?;
    positive("params.gap_tol", p.gap_tol)?;
    nonzero("params.max_sweeps", p.max_sweeps)?;
    let sol = solve_with(
        &p.instance,
        &SolverOptions::new(p.gap_tol).max_sweeps(p.max_sweeps),
    )?;
    let support = support_from_threshold(&sol.x, p.tau);
    out.json(
        "solution.json",
        &json!({ "solution": sol, "support": support, "tau": p.tau }),
    )?;
    Ok(Produced {
        status: "ok",
        resolved: resolved(&p)?,
    })
}

fn run_condition(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let p: ConditionParams = parse_params(&cfg.params)?;
    positive("params.gap_tol", p.gap_tol)?;
    let sol = solve_with(&p.instance, &SolverOptions::new(p.gap_tol))?;
    let cert = certificate(&p.instance, &sol, p.tau)?;
    let probe = if p.probe_samples > 0 {
        let radius = p.probe_radius.unwrap_or(0.99 * cert.stsp_lb);
        positive("params.probe_radius", radius)?;
        Some(probe_condition_lb(
            &p.instance,
            radius,
            p.probe_samples,
            cfg.seed,
        )?)
    } else {
        None
    };
    out.json(
        "certificate.json",
        &json!({ "certificate": cert, "probe": probe }),
    )?;
    Ok(Produced {
        status: "ok",
        resolved: resolved(&p)?,
    })
}

fn run_certify(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let p: CertifyParams = parse_params(&cfg.params)?;
    let outcome = certified_select(
        &DyadicReader::from_instance(&p.instance),
        p.n_max,
        &default_gap_rule,
    );
    let status = match outcome {
        SelectionOutcome::Certified { .. } => "certified",
        SelectionOutcome::NoCertificate { .. } => "abstained",
    };
    out.json(
        "outcome.json",
        &json!({ "status": status, "outcome": outcome }),
    )?;
    Ok(Produced {
        status: if status == "certified" {
            "ok"
        } else {
            "abstained"
        },
        resolved: resolved(&p)?,
    })
}

fn run_t24(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let p: T24Params = parse_params(&cfg.params)?;
    p.dist
        .validate()
        .map_err(|e| RunError::config("params.dist", e.to_string()))?;
    nonzero("params.trials", p.trials)?;
    positive("params.lambda", p.lambda)?;
    if p.n_grid.iter().any(|&n| n < 2) {
        return Err(RunError::config(
            "params.N_grid",
            "every N must be at least 2",
        ));
    }
    let results = run_limit_laws(&p.dist, &p.n_grid, p.trials, p.y, p.lambda, cfg.seed)?;
    let summary: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.dist.clone(),
                format!("{:?}", r.scaling).to_lowercase(),
                fmt_float(r.ks),
                r.cdf.len().to_string(),
                r.discarded_ties.to_string(),
                r.zero_stsp.to_string(),
                fmt_float(r.cdf.median()),
            ]
        })
        .collect();
    out.csv(
        "t24_summary.csv",
        &[
            "N",
            "dist",
            "scaling",
            "ks",
            "kept",
            "discarded_ties",
            "zero_stsp",
            "median_scaled",
        ],
        &summary,
    )?;
    let samples: Vec<Vec<String>> = results
        .iter()
        .flat_map(|r| {
            r.trials.iter().map(move |t| {
                vec![
                    t.n.to_string(),
                    r.dist.clone(),
                    t.trial.to_string(),
                    t.stream.to_string(),
                    t.stsp.map_or_else(|| "tie".into(), fmt_float),
                    t.scaled.map_or_else(|| "tie".into(), fmt_float),
                ]
            })
        })
        .collect();
    out.csv(
        "t24_samples.csv",
        &["N", "dist", "trial", "stream", "stsp", "scaled"],
        &samples,
    )?;
    Ok(Produced {
        status: "ok",
        resolved: resolved(&p)?,
    })
}

fn run_fig1(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let p: Figure1Config = parse_params(&cfg.params)?;
    nonzero("params.trials", p.trials)?;
    positive("params.lambda", p.lambda)?;
    positive("params.gap_tol", p.gap_tol)?;
    if p.n_grid.iter().any(|&n| n < 2) {
        return Err(RunError::config(
            "params.N_grid",
            "every N must be at least 2",
        ));
    }
    for (i, d) in p.dists.iter().enumerate() {
        d.validate()
            .map_err(|e| RunError::config(&format!("params.dists[{i}]"), e.to_string()))?;
    }
    let res = run_figure1(&p, cfg.seed)?;
    let trials: Vec<Vec<String>> = res
        .records
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                r.stream.to_string(),
                r.trial.to_string(),
                r.n.to_string(),
                r.m.to_string(),
                r.dist.clone(),
                fmt_float(r.cond),
                r.oracle_support.to_string(),
                r.solver_support.to_string(),
                r.success.to_string(),
                fmt_float(r.threshold),
                match r.solver_status {
                    ensembles::SolverStatus::Converged => "converged".into(),
                    ensembles::SolverStatus::BudgetExhausted => "budget_exhausted".into(),
                },
                fmt_float(r.gap_bound),
            ]
        })
        .collect();
    out.csv(
        "trials.csv",
        &[
            "seed",
            "stream",
            "trial",
            "N",
            "m",
            "dist",
            "cond",
            "oracle_support",
            "solver_support",
            "success",
            "threshold",
            "solver_status",
            "gap_bound",
        ],
        &trials,
    )?;
    let summary: Vec<Vec<String>> = res
        .summary
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.dist.clone(),
                fmt_float(r.threshold),
                r.trials.to_string(),
                r.successes.to_string(),
                fmt_float(r.success_rate),
                fmt_float(r.prop_cond_gt_1000),
                fmt_float(r.median_cond_correct),
                fmt_float(r.median_cond_incorrect),
                r.budget_exhausted.to_string(),
                r.discarded_ties.to_string(),
            ]
        })
        .collect();
    out.csv(
        "summary.csv",
        &[
            "N",
            "dist",
            "threshold",
            "trials",
            "successes",
            "success_rate",
            "prop_cond_gt_1000",
            "median_cond_correct",
            "median_cond_incorrect",
            "budget_exhausted",
            "discarded_ties",
        ],
        &summary,
    )?;
    Ok(Produced {
        status: "ok",
        resolved: resolved(&p)?,
    })
}

fn run_wainwright(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let p: WainwrightRunParams = parse_params(&cfg.params)?;
    p.spec
        .validate()
        .map_err(|e| RunError::config("params.spec", e.to_string()))?;
    let params = wainwright::params(&p.spec)?;
    let simple = if p.spec.sigma.is_identity() && p.spec.eta == 0.0 {
        Some(wainwright::check_simple(&p.spec)?)
    } else {
        None
    };
    let cap = wainwright::k_hat_cap(p.spec.n(), &p.spec.v);
    out.json(
        "wainwright.json",
        &json!({ "params": params, "simple": simple, "k_hat_cap": cap }),
    )?;
    if p.tail_draws > 0 {
        let t = ensembles::norm_tail_experiment(&p.spec.sigma, p.spec.m, p.tail_draws, cfg.seed)?;
        out.json("norm_tail.json", &t)?;
    }
    Ok(Produced {
        status: "ok",
        resolved: resolved(&p)?,
    })
}

fn run_adversary(cfg: &ExperimentConfig, out: &mut Out) -> Result<Produced, RunError> {
    let mut p: AdversaryParams = parse_params(&cfg.params)?;
    let half_k = 0.5f64.powi(p.k as i32 + 1);
    let r = match p.r {
        Some(r) => r,
        None if p.center.m() == 1 => {
            let st = stsp_1d(&Instance1D::from_instance(&p.center)?);
            0.5 * (st + half_k)
        }
        None => {
            return Err(RunError::config(
                "params.r",
                "required when the center has more than one row",
            ))
        }
    };
    p.r = Some(r);
    let kit = match build_adversary(&p.center, r, p.k) {
        Err(Error::Precondition(msg)) => return Err(RunError::config("params.k", msg)),
        other => other?,
    };
    out.json("kit.json", &kit)?;
    let victims: [&dyn Victim; 2] = [
        &TruncateSolveVictim::new(p.k),
        &CappedCertifiedSelector { k: p.k },
    ];
    let mut reports: Vec<FailureReport> = Vec::new();
    for v in victims {
        reports.push(demo_failure(&kit, v, p.samples, cfg.seed)?);
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .flat_map(|rep| {
            rep.samples.iter().map(move |s| {
                vec![
                    rep.victim.clone(),
                    s.index.to_string(),
                    fmt_float(s.distance),
                    support_cell(&s.true_support),
                    s.served_d2.to_string(),
                    output_cell(&s.output),
                    s.wrong.to_string(),
                    s.abstained.to_string(),
                ]
            })
        })
        .collect();
    out.csv(
        "failures.csv",
        &[
            "victim",
            "index",
            "distance",
            "true_support",
            "served_d2",
            "output",
            "wrong",
            "abstained",
        ],
        &rows,
    )?;
    let summary: Vec<Value> = reports
        .iter()
        .map(|r| {
            json!({
                "victim": r.victim,
                "samples": r.samples.len(),
                "wrong": r.wrong,
                "abstained": r.abstained,
                "correct": r.correct,
                "radius": r.radius,
                "output_on_d1": r.output_on_d1,
                "output_on_d2": r.output_on_d2,
            })
        })
        .collect();
    out.json("failures.json", &summary)?;
    Ok(Produced {
        status: "ok",
        resolved: resolved(&p)?,
    })
}

/// Summary of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub command: Command,
    pub status: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub config: Value,
    pub artifacts: Vec<String>,
    pub wall_time_s: f64,
    pub timestamp_unix: f64,
}

/// Runs a parsed config and writes its artifacts and manifest.
pub fn run(cfg: &ExperimentConfig) -> Result<Manifest, RunError> {
    let start = Instant::now();
    let mut out = Out {
        dir: &cfg.out_dir,
        names: Vec::new(),
    };
    let produced = match cfg.command {
        Command::Solve => run_solve(cfg, &mut out),
        Command::Condition => run_condition(cfg, &mut out),
        Command::Certify => run_certify(cfg, &mut out),
        Command::EnsembleT24 => run_t24(cfg, &mut out),
        Command::Figure1 => run_fig1(cfg, &mut out),
        Command::Wainwright => run_wainwright(cfg, &mut out),
        Command::Adversary => run_adversary(cfg, &mut out),
    }?;
    let mut artifacts = out.names;
    artifacts.push("manifest.json".into());
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command,
        status: produced.status.into(),
        seed: cfg.seed,
        out_dir: cfg.out_dir.clone(),
        config: json!({
            "command": cfg.command,
            "params": produced.resolved,
            "seed": cfg.seed,
            "out_dir": cfg.out_dir,
        }),
        artifacts,
        wall_time_s: start.elapsed().as_secs_f64(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0.0, |d| d.as_secs_f64()),
    };
    write_json(&cfg.out_dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Loads, overrides and runs a config file. Prints the manifest (or error
/// JSON) on stdout and returns the process exit code.
pub fn run_from_path(config: &Path, ov: &Overrides) -> i32 {
    match load_and_run(config, ov) {
        Ok(m) => {
            println!(
                "{}",
                serde_json::to_string(&json!({ "status": m.status, "out_dir": m.out_dir }))
                    .unwrap_or_default()
            );
            EXIT_OK
        }
        Err(e) => {
            println!("{}", e.to_json());
            e.exit_code()
        }
    }
}

fn load_and_run(config: &Path, ov: &Overrides) -> Result<Manifest, RunError> {
    let text = fs::read_to_string(config).map_err(|e| {
        RunError::config("--config", format!("cannot read {}: {e}", config.display()))
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if let Some(o) = &ov.out {
        cfg.out_dir = o.clone();
    }
    if let Some(w) = ov.workers {
        if w == 0 {
            return Err(RunError::config("--workers", "must be at least 1"));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global();
    }
    run(&cfg)
}
