//! Cross-module properties: the numerical, exact and closed-form routes to
//! the support and its stability radius must agree where they overlap.

use lasso_condition::certify::{
    certified_select, default_gap_rule, DyadicReader, SelectionOutcome,
};
use lasso_condition::condition::certificate;
use lasso_condition::ensembles::trial_rng;
use lasso_condition::oracle1d::{stsp_1d, support_1d, Instance1D};
use lasso_condition::{solve, LassoInstance};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

fn random_instance(rng: &mut impl Rng, m: usize, n: usize) -> LassoInstance {
    let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let lambda = 2.0 * (a.transpose() * &y).amax() * rng.random_range(0.1..0.9);
    LassoInstance::new(y, a, lambda).unwrap()
}

#[test]
fn lower_bound_never_exceeds_one_row_stsp() {
    let mut rng = trial_rng(1, 1);
    for _ in 0..300 {
        let n = rng.random_range(1..7);
        let inst = random_instance(&mut rng, 1, n);
        let Ok(sol) = solve(&inst, 1e-14) else {
            continue;
        };
        let Ok(cert) = certificate(&inst, &sol, 1e-6) else {
            continue;
        };
        let exact = stsp_1d(&Instance1D::from_instance(&inst).unwrap());
        assert!(cert.stsp_lb <= exact, "{} > {exact}", cert.stsp_lb);
    }
}

#[test]
fn exact_and_numerical_supports_agree() {
    let mut rng = trial_rng(1, 2);
    let mut agreed = 0;
    for _ in 0..100 {
        let (m, n) = (rng.random_range(1..5), rng.random_range(1..7));
        let inst = random_instance(&mut rng, m, n);
        let Ok(sol) = solve(&inst, 1e-14) else {
            continue;
        };
        let Ok(cert) = certificate(&inst, &sol, 1e-6) else {
            continue;
        };
        if let SelectionOutcome::Certified {
            support,
            certificate: exact,
            ..
        } = certified_select(&DyadicReader::from_instance(&inst), 64, &default_gap_rule)
        {
            assert_eq!(support, cert.support_used);
            assert_eq!(exact.provenance.kind, "exact");
            agreed += 1;
        }
    }
    assert!(agreed > 50, "only {agreed} certified");
}

#[test]
fn certified_one_row_matches_oracle() {
    let mut rng = trial_rng(1, 3);
    for _ in 0..100 {
        let n = rng.random_range(1..6);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let o =
            Instance1D::new(rng.random_range(-2.0..2.0), a, rng.random_range(0.01..1.0)).unwrap();
        let out = certified_select(
            &DyadicReader::from_instance(&o.to_instance()),
            48,
            &default_gap_rule,
        );
        if let Some(s) = out.support() {
            assert_eq!(s, &support_1d(&o).unwrap());
        }
    }
}

#[test]
fn outcome_json_round_trip() {
    let inst = LassoInstance::from_rows(&[1.0], &[vec![0.9, 0.3]], 0.01).unwrap();
    let out = certified_select(&DyadicReader::from_instance(&inst), 64, &default_gap_rule);
    let s = serde_json::to_string(&out).unwrap();
    assert!(s.contains(r#""status":"certified""#));
    assert_eq!(serde_json::from_str::<SelectionOutcome>(&s).unwrap(), out);
}
