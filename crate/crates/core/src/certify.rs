//! Variable-precision support selection that is never wrong when it halts,
//! and the finite-precision adversary that defeats any algorithm reading at
//! most `k` digit levels.
//!
//! Inputs are only accessible through a [`DigitReader`]: level `n` yields an
//! instance within `2^-n` of the true one in every entry of `y` and `A`.
//! `lambda` is read exactly.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::condition::{Provenance, SigmaCertificate};
use crate::ensembles::{stream_key, trial_rng};
use crate::error::{Error, Result};
use crate::exact::{self, candidate_supports, exact_bound, pow2, verify_support, ExactInstance, Q};
use crate::model::{LassoInstance, SupportSet};
use crate::oracle1d::{self, Instance1D};
use crate::solver::{solve_with, SolverOptions};

/// Access to the digit levels of an input.
pub trait DigitReader: Sync {
    fn read(&self, n: u32) -> Result<ExactInstance>;
}

/// Truncation of an exact instance toward zero at `n` fractional bits.
#[derive(Debug, Clone)]
pub struct DyadicReader {
    exact: ExactInstance,
}

impl DyadicReader {
    pub fn new(exact: ExactInstance) -> Self {
        Self { exact }
    }

    pub fn from_instance(inst: &LassoInstance) -> Self {
        Self::new(ExactInstance::from_instance(inst))
    }

    pub fn exact(&self) -> &ExactInstance {
        &self.exact
    }
}

fn assert_delta1(served: &ExactInstance, truth: &ExactInstance, n: u32) {
    assert!(
        served.max_distance(truth) <= Q::from_integer(1.into()) / pow2(n),
        "served level {n} is farther than 2^-{n} from the input"
    );
}

impl DigitReader for DyadicReader {
    fn read(&self, n: u32) -> Result<ExactInstance> {
        let t = self.exact.truncate(n);
        assert_delta1(&t, &self.exact, n);
        Ok(t)
    }
}

/// Serves the same value at every level; valid exactly when the input is
/// that value.
#[derive(Debug, Clone)]
pub struct ConstantReader {
    value: ExactInstance,
}

impl ConstantReader {
    pub fn new(value: ExactInstance) -> Self {
        Self { value }
    }
}

impl DigitReader for ConstantReader {
    fn read(&self, _n: u32) -> Result<ExactInstance> {
        Ok(self.value.clone())
    }
}

/// Hides every level above `cap`.
pub struct CappedReader<'a> {
    inner: &'a dyn DigitReader,
    cap: u32,
}

impl<'a> CappedReader<'a> {
    pub fn new(inner: &'a dyn DigitReader, cap: u32) -> Self {
        Self { inner, cap }
    }
}

impl DigitReader for CappedReader<'_> {
    fn read(&self, n: u32) -> Result<ExactInstance> {
        if n > self.cap {
            return Err(Error::PrecisionExceeded {
                requested: n,
                cap: self.cap,
            });
        }
        self.inner.read(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SelectionOutcome {
    Certified {
        support: SupportSet,
        precision_used: u32,
        certificate: SigmaCertificate,
    },
    NoCertificate {
        max_precision_tried: u32,
    },
}

impl SelectionOutcome {
    pub fn support(&self) -> Option<&SupportSet> {
        match self {
            Self::Certified { support, .. } => Some(support),
            Self::NoCertificate { .. } => None,
        }
    }
}

/// Smallest gap tolerance requested from the floating-point solver; below it
/// the duality gap is roundoff.
pub const GAP_FLOOR: f64 = 1e-13;

/// `max(4^-n, GAP_FLOOR)`, nonincreasing in `n`.
pub fn default_gap_rule(n: u32) -> f64 {
    0.25f64.powi(n as i32).max(GAP_FLOOR)
}

pub const DEFAULT_N_MAX: u32 = 64;

/// [`certified_select_from`] starting at level 0.
pub fn certified_select(
    reader: &dyn DigitReader,
    n_max: u32,
    gap_rule: &dyn Fn(u32) -> f64,
) -> SelectionOutcome {
    certified_select_from(reader, 0, n_max, gap_rule)
}

/// Reads levels `n_min..=n_max` until the read instance has an exactly
/// proven support `S` and a certified stability-support lower bound
/// `L > 2^-n`. The true input is within `2^-n < L` of the read one, so its
/// support is `S` as well.
///
/// The floating-point solve only proposes candidates; the rational KKT check
/// decides. A reader refusing a level ends the search.
pub fn certified_select_from(
    reader: &dyn DigitReader,
    n_min: u32,
    n_max: u32,
    gap_rule: &dyn Fn(u32) -> f64,
) -> SelectionOutcome {
    let mut tried = n_min.saturating_sub(1);
    for n in n_min..=n_max {
        let read = match reader.read(n) {
            Ok(r) => r,
            Err(_) => break,
        };
        tried = n;
        if let Some(cert) = certify_level(&read, n, gap_rule(n)) {
            return SelectionOutcome::Certified {
                support: cert.support_used.clone(),
                precision_used: n,
                certificate: cert,
            };
        }
    }
    SelectionOutcome::NoCertificate {
        max_precision_tried: tried,
    }
}

/// Exact support of `read` together with its certificate, when the
/// certification inequality holds at level `n`.
fn certify_level(read: &ExactInstance, n: u32, gap_tol: f64) -> Option<SigmaCertificate> {
    let (proof, bound) = prove_support(read, gap_tol)?;
    let err = 0.5f64.powi(n as i32);
    if !(err < bound.stsp_lb) {
        return None;
    }
    Some(SigmaCertificate {
        sigma1: bound.sigma1,
        sigma2: bound.sigma2,
        sigma3: bound.sigma3,
        sigma: bound.sigma,
        alpha: bound.alpha_hi,
        stsp_lb: bound.stsp_lb,
        cond_ub: 1.0 / bound.stsp_lb,
        support_used: proof.support,
        provenance: Provenance {
            kind: "exact".into(),
            tau: 0.0,
            gap_bound: 0.0,
            solution_margin: 0.0,
            sigma1_margin: 0.0,
            note: format!("support proven by rational KKT check at read precision 2^-{n}"),
        },
    })
}

/// Unique support of an exact instance, if some candidate from a
/// floating-point solve passes the rational KKT check.
pub fn prove_support(
    inst: &ExactInstance,
    gap_tol: f64,
) -> Option<(exact::KktProof, exact::ExactBound)> {
    let approx = inst.to_f64().ok()?;
    let x = match solve_with(&approx, &SolverOptions::new(gap_tol)) {
        Ok(sol) => sol.x,
        Err(Error::Budget { x, .. }) => x,
        Err(_) => return None,
    };
    candidate_supports(&x).into_iter().find_map(|(s, signs)| {
        let proof = verify_support(inst, &s, &signs)?;
        let bound = exact_bound(inst, &proof);
        Some((proof, bound))
    })
}

/// Scales the columns outside `w` by `1 - shrink_delta`; `y` is unchanged.
pub fn shrink_offsupport(
    inst: &LassoInstance,
    w: &SupportSet,
    shrink_delta: f64,
) -> Result<LassoInstance> {
    if !(shrink_delta > 0.0 && shrink_delta < 1.0) {
        return Err(Error::Domain(format!(
            "shrink_delta must lie in (0, 1), got {shrink_delta}"
        )));
    }
    if !w.fits(inst.n()) {
        return Err(Error::BadSupport(w.clone(), inst.n()));
    }
    let mut a = inst.a().clone();
    for j in w.complement(inst.n()) {
        a.column_mut(j).scale_mut(1.0 - shrink_delta);
    }
    LassoInstance::new(inst.y().clone(), a, inst.lambda())
}

/// Ground-truth support: the closed form for one row, otherwise a certified
/// selection at [`DEFAULT_N_MAX`] bits. `None` when neither decides.
pub fn reference_support(inst: &LassoInstance) -> Option<SupportSet> {
    if inst.m() == 1 {
        return Instance1D::from_instance(inst)
            .ok()
            .and_then(|o| oracle1d::support_1d(&o).ok());
    }
    certified_select(
        &DyadicReader::from_instance(inst),
        DEFAULT_N_MAX,
        &default_gap_rule,
    )
    .support()
    .cloned()
}

/// Two dyadic instances with different supports, both within `2^-k - r` of
/// the center, and the digit-swapping rule built on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryKit {
    pub k: u32,
    pub r: f64,
    pub center: LassoInstance,
    pub center_support: SupportSet,
    /// Upper bound on the center's stability support.
    pub stsp_upper: f64,
    /// Radius of a ball around the center on which the support is constant.
    pub inner_radius: f64,
    pub d1: LassoInstance,
    pub s1: SupportSet,
    pub d1_bits: u32,
    pub d2: LassoInstance,
    pub s2: SupportSet,
    pub d2_bits: u32,
    pub shrink_w: SupportSet,
    pub shrink_delta: f64,
}

/// Bits kept when rounding a witness to a dyadic point.
pub const WITNESS_EXTRA_BITS: u32 = 8;

fn truncate_instance(inst: &LassoInstance, bits: u32) -> Result<LassoInstance> {
    let y: Vec<f64> = inst
        .y()
        .iter()
        .map(|&v| exact::dyadic_truncate(v, bits))
        .collect();
    let rows: Vec<Vec<f64>> = inst
        .rows()
        .into_iter()
        .map(|r| {
            r.into_iter()
                .map(|v| exact::dyadic_truncate(v, bits))
                .collect()
        })
        .collect();
    LassoInstance::from_rows(&y, &rows, inst.lambda())
}

fn proven_support(inst: &LassoInstance) -> Option<SupportSet> {
    prove_support(&ExactInstance::from_instance(inst), 1e-14).map(|(p, _)| p.support)
}

/// Builds the adversary around `center` for algorithms reading at most `k`
/// levels.
///
/// Requires `stsp(center) < r < 2^-k-1`. For one row the stability support
/// is exact; otherwise the upper bound comes from a support change found by
/// random probing and the inner radius from a certified selection.
pub fn build_adversary(center: &LassoInstance, r: f64, k: u32) -> Result<AdversaryKit> {
    let half_k = 0.5f64.powi(k as i32 + 1);
    let (center_support, stsp_upper, inner_radius) = if center.m() == 1 {
        let o = Instance1D::from_instance(center)?;
        let s = oracle1d::support_1d(&o)
            .map_err(|_| Error::Precondition("center has a tied maximal column".into()))?;
        let st = oracle1d::stsp_1d(&o);
        (s, st, st)
    } else {
        let sel = certified_select(
            &DyadicReader::from_instance(center),
            DEFAULT_N_MAX,
            &default_gap_rule,
        );
        let SelectionOutcome::Certified {
            support,
            certificate,
            ..
        } = sel
        else {
            return Err(Error::Precondition(
                "support of the center could not be certified".into(),
            ));
        };
        let probe = crate::condition::probe_condition_lb(center, half_k * (1.0 - 1e-9), 4000, 0)?;
        if !probe.found_change {
            return Err(Error::Precondition(format!(
                "no support change found within 2^-{}; cannot establish 1/C < 2^-{}",
                k + 1,
                k + 1
            )));
        }
        (support, 1.0 / probe.cond_lb, certificate.stsp_lb)
    };
    if !(stsp_upper < half_k) {
        return Err(Error::Precondition(format!(
            "need 1/C < 2^-{} = {half_k:e}, got stability support {stsp_upper:e}",
            k + 1
        )));
    }
    if !(r > stsp_upper && r < half_k) {
        return Err(Error::Precondition(format!(
            "r must lie in ({stsp_upper:e}, {half_k:e}), got {r:e}"
        )));
    }
    let budget = 0.5f64.powi(k as i32) - r;
    let within = |p: &LassoInstance| p.max_distance(center) <= budget;

    // d1: a dyadic point sharing the center's support.
    let mut d1 = None;
    for bits in (k + WITNESS_EXTRA_BITS)..=(k + 60) {
        let cand = truncate_instance(center, bits)?;
        if within(&cand) && proven_support(&cand).as_ref() == Some(&center_support) {
            d1 = Some((cand, bits));
            break;
        }
    }
    let (d1, d1_bits) =
        d1.ok_or_else(|| Error::SearchFailed("no dyadic point with the center's support".into()))?;

    // d2: shrink the columns outside W, scanning shrink_delta upward.
    let n = center.n();
    let s1 = center_support.clone();
    let mut ws: Vec<SupportSet> = vec![SupportSet::empty()];
    for j in 0..n {
        ws.push(SupportSet::from_zero_based([j]));
        let mut with = s1.indices().to_vec();
        with.push(j);
        ws.push(SupportSet::from_zero_based(with));
        ws.push(SupportSet::from_zero_based(
            s1.indices().iter().copied().filter(|&i| i != j),
        ));
    }
    ws.dedup();
    let d2_bits = k + WITNESS_EXTRA_BITS;
    for w in &ws {
        if w.len() == n {
            continue;
        }
        let mut delta = 2f64.powi(-40);
        while delta < 1.0 {
            let shrunk = shrink_offsupport(center, w, delta)?;
            let cand = truncate_instance(&shrunk, d2_bits)?;
            if !within(&cand) {
                break;
            }
            if let Some(s2) = proven_support(&cand) {
                if s2 != s1 {
                    return Ok(AdversaryKit {
                        k,
                        r,
                        center: center.clone(),
                        center_support,
                        stsp_upper,
                        inner_radius,
                        d1,
                        s1,
                        d1_bits,
                        d2: cand,
                        s2,
                        d2_bits,
                        shrink_w: w.clone(),
                        shrink_delta: delta,
                    });
                }
            }
            delta *= 2.0;
        }
    }
    Err(Error::SearchFailed(format!(
        "no dyadic witness with a different support at precision 2^-{d2_bits}"
    )))
}

/// Digit levels served to the input `iota` by the adversary: `d2` for
/// `n <= k` when `iota` has the support `S1`, `d1` for other inputs, and the
/// truncation of `iota` above `k`.
pub struct ServedReader {
    k: u32,
    low: ExactInstance,
    truth: ExactInstance,
    serves_d2: bool,
}

impl ServedReader {
    pub fn new(kit: &AdversaryKit, iota: &LassoInstance) -> Self {
        let serves_d2 = reference_support(iota).as_ref() == Some(&kit.s1);
        let low = if serves_d2 { &kit.d2 } else { &kit.d1 };
        Self {
            k: kit.k,
            low: ExactInstance::from_instance(low),
            truth: ExactInstance::from_instance(iota),
            serves_d2,
        }
    }

    pub fn serves_d2(&self) -> bool {
        self.serves_d2
    }
}

impl DigitReader for ServedReader {
    fn read(&self, n: u32) -> Result<ExactInstance> {
        let served = if n <= self.k {
            self.low.clone()
        } else {
            self.truth.truncate(n)
        };
        assert_delta1(&served, &self.truth, n);
        Ok(served)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "support", rename_all = "snake_case")]
pub enum VictimOutput {
    Support(SupportSet),
    Abstain,
}

/// An algorithm given read access to the digit levels of one input.
pub trait Victim: Sync {
    fn name(&self) -> String;
    fn run(&self, reader: &dyn DigitReader) -> VictimOutput;
}

/// Reads level `k`, solves in floating point and thresholds at `tau`.
#[derive(Debug, Clone)]
pub struct TruncateSolveVictim {
    pub k: u32,
    pub gap_tol: f64,
    pub tau: f64,
}

impl TruncateSolveVictim {
    pub fn new(k: u32) -> Self {
        Self {
            k,
            gap_tol: 1e-14,
            tau: 1e-9,
        }
    }
}

impl Victim for TruncateSolveVictim {
    fn name(&self) -> String {
        format!("truncate-solve(k={})", self.k)
    }

    fn run(&self, reader: &dyn DigitReader) -> VictimOutput {
        let Ok(inst) = reader.read(self.k).and_then(|e| e.to_f64()) else {
            return VictimOutput::Abstain;
        };
        let x = match solve_with(&inst, &SolverOptions::new(self.gap_tol)) {
            Ok(sol) => sol.x,
            Err(Error::Budget { x, .. }) => x,
            Err(_) => return VictimOutput::Abstain,
        };
        VictimOutput::Support(crate::model::support_from_threshold(&x, self.tau))
    }
}

/// [`certified_select`] restricted to levels `n <= k`.
#[derive(Debug, Clone)]
pub struct CappedCertifiedSelector {
    pub k: u32,
}

impl Victim for CappedCertifiedSelector {
    fn name(&self) -> String {
        format!("certified-select(n<={})", self.k)
    }

    fn run(&self, reader: &dyn DigitReader) -> VictimOutput {
        match certified_select(reader, self.k, &default_gap_rule) {
            SelectionOutcome::Certified { support, .. } => VictimOutput::Support(support),
            SelectionOutcome::NoCertificate { .. } => VictimOutput::Abstain,
        }
    }
}

/// Runs `victim` on `reader` with every level above `k` hidden.
pub fn run_capped(victim: &dyn Victim, reader: &dyn DigitReader, k: u32) -> VictimOutput {
    victim.run(&CappedReader::new(reader, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    /// `‖iota - center‖` in the max norm.
    pub distance: f64,
    pub true_support: Option<SupportSet>,
    pub served_d2: bool,
    pub output: VictimOutput,
    pub wrong: bool,
    pub abstained: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub victim: String,
    pub k: u32,
    pub radius: f64,
    pub seed: u64,
    /// Victim output on `d1` and `d2` served exactly.
    pub output_on_d1: VictimOutput,
    pub output_on_d2: VictimOutput,
    pub samples: Vec<SampleRecord>,
    pub wrong: usize,
    pub abstained: usize,
    pub correct: usize,
}

/// Fraction of the inner radius used for sampling, keeping samples off the
/// boundary where the support may change.
pub const INNER_SAMPLE_FRACTION: f64 = 0.999;

/// Samples `n_samples` inputs uniformly from the inner ball and reports the
/// victim's output on each, with levels above `k` hidden.
pub fn demo_failure(
    kit: &AdversaryKit,
    victim: &dyn Victim,
    n_samples: usize,
    seed: u64,
) -> Result<FailureReport> {
    let radius = kit.inner_radius * INNER_SAMPLE_FRACTION;
    let exact_out = |d: &LassoInstance| {
        run_capped(
            victim,
            &ConstantReader::new(ExactInstance::from_instance(d)),
            kit.k,
        )
    };
    let samples: Vec<SampleRecord> = (0..n_samples)
        .into_par_iter()
        .map(|i| -> Result<SampleRecord> {
            let iota = sample_ball(&kit.center, radius, seed, i as u64)?;
            let reader = ServedReader::new(kit, &iota);
            let output = run_capped(victim, &reader, kit.k);
            let true_support = reference_support(&iota);
            let abstained = output == VictimOutput::Abstain;
            let wrong = match (&output, &true_support) {
                (VictimOutput::Support(s), Some(t)) => s != t,
                _ => false,
            };
            Ok(SampleRecord {
                index: i,
                distance: iota.max_distance(&kit.center),
                true_support,
                served_d2: reader.serves_d2(),
                output,
                wrong,
                abstained,
            })
        })
        .collect::<Result<_>>()?;
    let wrong = samples.iter().filter(|s| s.wrong).count();
    let abstained = samples.iter().filter(|s| s.abstained).count();
    Ok(FailureReport {
        victim: victim.name(),
        k: kit.k,
        radius,
        seed,
        output_on_d1: exact_out(&kit.d1),
        output_on_d2: exact_out(&kit.d2),
        correct: samples.len() - wrong - abstained,
        samples,
        wrong,
        abstained,
    })
}

/// Uniform draw from the open max-norm ball of `radius` around `center`
/// (perturbing `y` and `A`).
pub fn sample_ball(
    center: &LassoInstance,
    radius: f64,
    seed: u64,
    index: u64,
) -> Result<LassoInstance> {
    let mut rng = trial_rng(seed, stream_key(&[0xad, index]));
    let mut u = || radius * (2.0 * rng.random::<f64>() - 1.0);
    let y: Vec<f64> = center.y().iter().map(|&v| v + u()).collect();
    let rows: Vec<Vec<f64>> = center
        .rows()
        .into_iter()
        .map(|r| r.into_iter().map(|v| v + u()).collect())
        .collect();
    LassoInstance::from_rows(&y, &rows, center.lambda())
}
