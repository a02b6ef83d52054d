//! Design parameters, hypotheses and the condition-number quantile bound for
//! Gaussian designs, plus an empirical check of the spectral-norm tail.

use lasso_condition::ensembles::norm_tail_experiment;
use lasso_condition::wainwright::{check_simple, k_hat_cap, params, Covariance, EnsembleSpec};
use nalgebra::DMatrix;

fn main() -> lasso_condition::Result<()> {
    let n = 30_000;
    let mut v = vec![0.0; n];
    v[..10].fill(1.0);
    let iso = EnsembleSpec {
        sigma: Covariance::Identity(n),
        v,
        eta: 0.0,
        m: 3000,
        lambda: 1.0,
        c3: 1.0,
        c_bar: None,
    };
    let p = params(&iso)?;
    let verdict = check_simple(&iso)?;
    println!(
        "isotropic: gamma={} theta_u={} sigma_hat={:.3e} K_hat={:.3e}",
        p.gamma, p.theta_u, p.sigma_hat, p.k_hat
    );
    println!(
        "hypotheses all hold: {}; explicit cap {:.3e}",
        verdict.all_ok,
        k_hat_cap(n, &iso.v)
    );

    // Equicorrelated design on a small problem.
    let (n, rho) = (40, 0.3);
    let sigma = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
    let mut v = vec![0.0; n];
    v[..3].copy_from_slice(&[2.0, -1.5, 1.0]);
    let corr = EnsembleSpec {
        sigma: Covariance::dense(sigma)?,
        v,
        eta: 0.1,
        m: 400,
        lambda: 5.0,
        c3: 1.0,
        c_bar: None,
    };
    let p = params(&corr)?;
    println!(
        "equicorrelated: C_min={:.3} C_max={:.3} gamma={:.3} phi_N={:.3e} (ai, aii) = ({}, {})",
        p.c_min, p.c_max, p.gamma, p.phi_n, p.ai_ok, p.aii_ok
    );

    let t = norm_tail_experiment(&Covariance::Identity(50), 6, 2000, 3)?;
    println!(
        "P(|A|_2 >= {:.2}) ~ {} (bound {:.4}), largest seen {:.2}",
        t.level, t.fraction, t.bound, t.max_norm_seen
    );
    Ok(())
}
