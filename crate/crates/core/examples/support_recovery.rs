//! Support recovery of the floating-point solver against the exact oracle on
//! random one-row instances, by column law and dimension.

use lasso_condition::ensembles::{run_figure1, Figure1Config};

fn main() -> lasso_condition::Result<()> {
    let mut cfg = Figure1Config::new(vec![10, 100, 1000], 100);
    cfg.thresholds = vec![1e-12];
    let out = run_figure1(&cfg, 2024)?;
    println!(
        "{:>6} {:<18} {:>8} {:>10} {:>14}",
        "N", "dist", "success", "cond>1e3", "median cond ok"
    );
    for r in &out.summary {
        println!(
            "{:>6} {:<18} {:>8.3} {:>10.3} {:>14.4e}",
            r.n, r.dist, r.success_rate, r.prop_cond_gt_1000, r.median_cond_correct
        );
    }
    Ok(())
}
