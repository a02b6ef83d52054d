//! Any algorithm that reads at most k digit levels can be fooled on a whole
//! ball around an input whose stability support is below 2^-(k+1). A trustworthy
//! selector abstains there instead.

use lasso_condition::certify::{
    build_adversary, demo_failure, CappedCertifiedSelector, TruncateSolveVictim,
};
use lasso_condition::oracle1d::{stsp_1d, Instance1D};
use lasso_condition::runner::demo_adversary_center;

fn main() -> lasso_condition::Result<()> {
    let k = 12;
    let center = demo_adversary_center();
    let st = stsp_1d(&Instance1D::from_instance(&center)?);
    let kit = build_adversary(&center, 0.5 * (st + 0.5f64.powi(k as i32 + 1)), k)?;
    println!(
        "stsp(center) = {st:.3e}; d1 support {}, d2 support {}",
        kit.s1, kit.s2
    );

    for report in [
        demo_failure(&kit, &TruncateSolveVictim::new(k), 100, 5)?,
        demo_failure(&kit, &CappedCertifiedSelector { k }, 100, 5)?,
    ] {
        println!(
            "{:<24} wrong {:>3}  abstained {:>3}  correct {:>3}",
            report.victim, report.wrong, report.abstained, report.correct
        );
    }
    Ok(())
}
