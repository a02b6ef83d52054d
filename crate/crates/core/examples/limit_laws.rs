//! Distribution of the one-row stability support under three column laws,
//! compared with the exponential limits by Kolmogorov-Smirnov distance.

use lasso_condition::ensembles::{run_limit_laws, Dist};

fn main() -> lasso_condition::Result<()> {
    let seed = 7;
    for (dist, n) in [
        (Dist::Exp1, 2000),
        (Dist::Uniform01, 2000),
        (
            Dist::Normal {
                mu: 1.0,
                sigma2: 1.0,
            },
            10_000,
        ),
    ] {
        let r = &run_limit_laws(&dist, &[n], 2000, 1.0, 0.01, seed)?[0];
        println!(
            "{:<16} N={n:<6} scaling={:?} rate={} ks={:.4} median={:.4} ties={}",
            r.dist,
            r.scaling,
            r.law.rate,
            r.ks,
            r.cdf.median(),
            r.discarded_ties
        );
    }
    Ok(())
}
