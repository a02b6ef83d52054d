//! Closed-form support and stability support for single-measurement
//! instances.

use lasso_condition::oracle1d::{delta_gap, solution_1d, stsp_1d, support_1d, z_event, Instance1D};

fn main() -> lasso_condition::Result<()> {
    for (y, a, lambda) in [
        (1.0, vec![0.9, 0.3], 0.01),
        (1.0, vec![0.9, 0.9 - 1e-4, 0.3], 0.01),
        (0.1, vec![0.2, -0.1], 0.5),
    ] {
        let inst = Instance1D::new(y, a.clone(), lambda)?;
        let gap = delta_gap(&a)?;
        let st = stsp_1d(&inst);
        println!(
            "a = {a:?}: support {}, x = {:?}, gap_delta = {:.1e}, stsp = {st:.6e}, Z(stsp/2) = {}",
            support_1d(&inst)?,
            solution_1d(&inst)?,
            gap.delta,
            z_event(&inst, 0.5 * st),
        );
    }
    Ok(())
}
