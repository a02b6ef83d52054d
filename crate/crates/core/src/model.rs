//! Problem data shared by every other module: the LASSO input triple, support
//! sets, and the norms that feed the condition bounds.
//!
//! Support sets store 0-based indices internally. Everything that leaves the
//! crate (JSON, CSV, `Display`) uses 1-based indices.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg;

/// Input `(y, A, lambda)` of the unconstrained LASSO
/// `min_x ||Ax - y||_2^2 + lambda ||x||_1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoInstance {
    y: DVector<f64>,
    a: DMatrix<f64>,
    lambda: f64,
}

impl LassoInstance {
    pub fn new(y: DVector<f64>, a: DMatrix<f64>, lambda: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::InvalidInstance(format!(
                "A must be at least 1x1, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if y.len() != a.nrows() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: y.len(),
            });
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInstance(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        if y.iter().chain(a.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInstance("non-finite entry".into()));
        }
        Ok(Self { y, a, lambda })
    }

    /// Builds an instance from row-major nested vectors.
    pub fn from_rows(y: &[f64], rows: &[Vec<f64>], lambda: f64) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInstance("ragged rows in A".into()));
        }
        let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
        Self::new(DVector::from_column_slice(y), a, lambda)
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of rows (measurements).
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of columns (features).
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.m())
            .map(|i| self.a.row(i).iter().copied().collect())
            .collect()
    }

    /// Entrywise max-distance to another instance of the same shape.
    pub fn max_distance(&self, other: &LassoInstance) -> f64 {
        let dy = (&self.y - &other.y).amax();
        let da = (&self.a - &other.a).amax();
        dy.max(da)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRepr {
    y: Vec<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    lambda: f64,
}

impl Serialize for LassoInstance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstanceRepr {
            y: self.y.iter().copied().collect(),
            a: self.rows(),
            lambda: self.lambda,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LassoInstance {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = InstanceRepr::deserialize(d)?;
        LassoInstance::from_rows(&r.y, &r.a, r.lambda).map_err(serde::de::Error::custom)
    }
}

/// Sorted set of feature indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SupportSet {
    idx: Vec<usize>,
}

impl SupportSet {
    pub fn empty() -> Self {
        Self::default()
    }

    /// From 0-based indices in any order; duplicates are merged.
    pub fn from_zero_based<I: IntoIterator<Item = usize>>(it: I) -> Self {
        let mut idx: Vec<usize> = it.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        Self { idx }
    }

    /// From 1-based indices; rejects 0.
    pub fn from_one_based<I: IntoIterator<Item = usize>>(it: I) -> Result<Self> {
        let mut z = Vec::new();
        for i in it {
            if i == 0 {
                return Err(Error::InvalidInstance("support indices are 1-based".into()));
            }
            z.push(i - 1);
        }
        Ok(Self::from_zero_based(z))
    }

    pub fn indices(&self) -> &[usize] {
        &self.idx
    }

    pub fn one_based(&self) -> Vec<usize> {
        self.idx.iter().map(|i| i + 1).collect()
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.idx.binary_search(&j).is_ok()
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.idx.iter().all(|&j| other.contains(j))
    }

    /// Indices in `0..n` not in the set.
    pub fn complement(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&j| !self.contains(j)).collect()
    }

    pub fn fits(&self, n: usize) -> bool {
        self.idx.last().is_none_or(|&j| j < n)
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.idx.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", i + 1)?;
        }
        write!(f, "}}")
    }
}

impl Serialize for SupportSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.one_based().serialize(s)
    }
}

impl<'de> Deserialize<'de> for SupportSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<usize>::deserialize(d)?;
        SupportSet::from_one_based(v).map_err(serde::de::Error::custom)
    }
}

/// Norms of `(y, A)` used by the stability-support bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    /// Entrywise max over `y` and `A`.
    pub max_norm: f64,
    /// `max{||A||_2, ||y||_2, 1}`.
    pub trunc2: f64,
    /// `max{sum |A_ij|, sum |y_i|, 1}`.
    pub tr1star: f64,
}

pub fn compute_norms(inst: &LassoInstance) -> NormBundle {
    let max_norm = inst.y.amax().max(inst.a.amax());
    let spec = linalg::spectral_norm(&inst.a);
    let trunc2 = spec.max(inst.y.norm()).max(1.0);
    let sum_a: f64 = inst.a.iter().map(|v| v.abs()).sum();
    let sum_y: f64 = inst.y.iter().map(|v| v.abs()).sum();
    let tr1star = sum_a.max(sum_y).max(1.0);
    NormBundle {
        max_norm,
        trunc2,
        tr1star,
    }
}

/// `{i : |x_i| > tau}`. The inequality is strict, so `tau = 0` returns the
/// exact nonzero pattern.
pub fn support_from_threshold(x: &[f64], tau: f64) -> SupportSet {
    debug_assert!(tau >= 0.0);
    SupportSet::from_zero_based(
        x.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tau)
            .map(|(i, _)| i),
    )
}

/// Serde helpers for extended reals: finite values are numbers, infinities are
/// the strings `"inf"` / `"-inf"`, NaN is `null`.
pub mod ext_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_none()
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
        Null(()),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Null(()) => Ok(f64::NAN),
            Repr::Str(s) => match s.as_str() {
                "inf" | "Infinity" => Ok(f64::INFINITY),
                "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!(
                    "bad extended real {other:?}"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inst(y: &[f64], rows: &[Vec<f64>], lambda: f64) -> LassoInstance {
        LassoInstance::from_rows(y, rows, lambda).unwrap()
    }

    #[test]
    fn norms_of_zero_instance_clamp_to_one() {
        let n = compute_norms(&inst(&[0.0], &[vec![0.0]], 1.0));
        assert_eq!(n.trunc2, 1.0);
        assert_eq!(n.tr1star, 1.0);
        assert_eq!(n.max_norm, 0.0);
    }

    #[test]
    fn norms_of_singletons() {
        let n = compute_norms(&inst(&[3.0], &[vec![4.0]], 1.0));
        assert_eq!(n.max_norm, 4.0);
        assert_relative_eq!(n.trunc2, 4.0, epsilon = 1e-14);
        assert_eq!(n.tr1star, 4.0);
    }

    #[test]
    fn norms_of_all_ones() {
        let n = compute_norms(&inst(&[1.0, 1.0], &[vec![1.0, 1.0], vec![1.0, 1.0]], 1.0));
        assert_relative_eq!(n.trunc2, 2.0, epsilon = 1e-13);
        assert_eq!(n.tr1star, 4.0);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(
            support_from_threshold(&[0.5, 1e-13], 1e-12).one_based(),
            vec![1]
        );
        assert!(support_from_threshold(&[0.0, 0.0], 0.0).is_empty());
        assert!(support_from_threshold(&[0.0, 0.0], 3.0).is_empty());
        assert_eq!(
            support_from_threshold(&[1e-3, -2e-3], 1e-3).one_based(),
            vec![2]
        );
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(LassoInstance::from_rows(&[1.0], &[vec![1.0]], 0.0).is_err());
        assert!(LassoInstance::from_rows(&[1.0, 2.0], &[vec![1.0]], 1.0).is_err());
        assert!(LassoInstance::from_rows(&[f64::NAN], &[vec![1.0]], 1.0).is_err());
        assert!(LassoInstance::from_rows(&[], &[], 1.0).is_err());
    }

    #[test]
    fn support_serializes_one_based() {
        let s = SupportSet::from_zero_based([2, 0]);
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,3]");
        assert_eq!(s.to_string(), "{1,3}");
        let back: SupportSet = serde_json::from_str("[3,1]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<SupportSet>("[0]").is_err());
    }

    #[test]
    fn instance_json_uses_listed_field_names() {
        let i = inst(&[1.0], &[vec![0.9, 0.3]], 0.01);
        let j = serde_json::to_value(&i).unwrap();
        assert!(j.get("A").is_some() && j.get("y").is_some() && j.get("lambda").is_some());
        let back: LassoInstance = serde_json::from_value(j).unwrap();
        assert_eq!(back, i);
    }

    proptest::proptest! {
        #[test]
        fn threshold_is_monotone(x in proptest::collection::vec(-1.0f64..1.0, 1..12),
                                 t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let big = support_from_threshold(&x, lo);
            let small = support_from_threshold(&x, hi);
            proptest::prop_assert!(small.is_subset(&big));
        }

        #[test]
        fn norms_are_column_permutation_invariant(
            vals in proptest::collection::vec(-3.0f64..3.0, 12),
            y in proptest::collection::vec(-3.0f64..3.0, 3),
            shift in 0usize..4,
        ) {
            let a = DMatrix::from_row_slice(3, 4, &vals);
            let perm: Vec<usize> = (0..4).map(|j| (j + shift) % 4).collect();
            let b = DMatrix::from_fn(3, 4, |i, j| a[(i, perm[j])]);
            let i1 = LassoInstance::new(DVector::from_vec(y.clone()), a, 1.0).unwrap();
            let i2 = LassoInstance::new(DVector::from_vec(y), b, 1.0).unwrap();
            let (n1, n2) = (compute_norms(&i1), compute_norms(&i2));
            proptest::prop_assert!((n1.trunc2 - n2.trunc2).abs() <= 1e-12 * n1.trunc2);
            proptest::prop_assert!((n1.tr1star - n2.tr1star).abs() <= 1e-12 * n1.tr1star);
            proptest::prop_assert_eq!(n1.max_norm, n2.max_norm);
            proptest::prop_assert!(n1.trunc2 >= 1.0 && n1.tr1star >= 1.0 && n1.tr1star >= n1.max_norm);
        }
    }
}
