//! Solve a small LASSO instance, certify its support numerically, and probe
//! the certified radius with random perturbations.

use lasso_condition::condition::{certificate, probe_condition_lb};
use lasso_condition::solver::kkt_residuals;
use lasso_condition::{solve, LassoInstance};

fn main() -> lasso_condition::Result<()> {
    let inst = LassoInstance::from_rows(
        &[1.0, -0.5, 0.25],
        &[
            vec![1.0, 0.2, -0.3, 0.0],
            vec![0.1, 0.9, 0.4, -0.2],
            vec![0.0, -0.1, 0.8, 1.1],
        ],
        0.3,
    )?;
    let sol = solve(&inst, 1e-14)?;
    let (kkt, _) = kkt_residuals(&inst, &sol.x);
    println!("x = {:?}", sol.x);
    println!(
        "gap <= {:.2e}, kkt_inf = {kkt:.2e}, sweeps = {}",
        sol.gap_bound, sol.iterations
    );

    // The threshold must exceed the solution-error margin 2 sqrt(gap) / sigma_min,
    // otherwise an exact zero is indistinguishable from tau and the
    // certificate refuses.
    let cert = certificate(&inst, &sol, 1e-6)?;
    println!("support {} sigma = {:.4e}", cert.support_used, cert.sigma);
    println!(
        "stsp >= {:.4e}  (condition <= {:.4e})",
        cert.stsp_lb, cert.cond_ub
    );

    // Nothing below the certified radius should move the support.
    let probe = probe_condition_lb(&inst, 0.99 * cert.stsp_lb, 500, 1)?;
    println!(
        "probe at 0.99 * bound: change found = {}",
        probe.found_change
    );
    let far = probe_condition_lb(&inst, 0.5, 500, 1)?;
    println!(
        "probe at radius 0.5: change found = {}, condition >= {}",
        far.found_change, far.cond_lb
    );
    Ok(())
}
