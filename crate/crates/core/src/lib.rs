//! Condition numbers and certified support selection for the unconstrained
//! LASSO
//!
//! ```text
//! minimize ||Ax - y||_2^2 + lambda ||x||_1     (no factor 1/2)
//! ```
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: instances, support sets, norms.
//! * [`solver`]: coordinate descent with a duality-gap certificate.
//! * [`condition`]: the sigma quantities and the lower bound on the distance
//!   to a support change (the stability support), plus a random probe.
//! * [`oracle1d`]: exact supports and stability supports for one-row inputs.
//! * [`wainwright`]: Gaussian-design parameters, hypothesis checks and the
//!   high-probability condition bound.
//! * [`ensembles`]: random instances, Monte Carlo experiments, KS distances.
//! * [`exact`] and [`certify`]: rational arithmetic, inexact-input readers,
//!   the never-wrong selector and the finite-precision adversary.
//! * [`runner`]: the config-driven experiment runner behind the `lasso-cond`
//!   binary.
//!
//! Support indices are stored 0-based and reported 1-based.

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod certify;
pub mod condition;
pub mod ensembles;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod model;
pub mod oracle1d;
pub mod runner;
pub mod solver;
pub mod wainwright;

pub use condition::{certificate, SigmaCertificate};
pub use error::{Error, Result};
pub use model::{compute_norms, support_from_threshold, LassoInstance, NormBundle, SupportSet};
pub use solver::{solve, LassoSolution};
