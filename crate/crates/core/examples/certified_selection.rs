//! Variable-precision support selection: read more digits until the exact
//! support of the read instance comes with a stability radius larger than
//! the read error, or give up.

use lasso_condition::certify::{
    certified_select, default_gap_rule, DyadicReader, SelectionOutcome,
};
use lasso_condition::LassoInstance;

fn report(name: &str, inst: &LassoInstance) {
    match certified_select(&DyadicReader::from_instance(inst), 64, &default_gap_rule) {
        SelectionOutcome::Certified {
            support,
            precision_used,
            certificate,
        } => println!(
            "{name}: support {support} after {precision_used} bits (stsp >= {:.3e})",
            certificate.stsp_lb
        ),
        SelectionOutcome::NoCertificate {
            max_precision_tried,
        } => {
            println!("{name}: abstained after {max_precision_tried} bits")
        }
    }
}

fn main() -> lasso_condition::Result<()> {
    report(
        "well separated",
        &LassoInstance::from_rows(&[1.0], &[vec![0.9, 0.3]], 0.01)?,
    );
    report(
        "near tie",
        &LassoInstance::from_rows(&[1.0], &[vec![0.9, 0.9 - 2f64.powi(-19)]], 0.01)?,
    );
    report(
        "duplicate columns",
        &LassoInstance::from_rows(&[1.0], &[vec![1.0, 1.0]], 0.01)?,
    );
    report(
        "two rows",
        &LassoInstance::from_rows(
            &[1.0, 0.5],
            &[vec![1.0, 0.3, 0.1], vec![0.2, 0.8, -0.4]],
            0.2,
        )?,
    );
    Ok(())
}
