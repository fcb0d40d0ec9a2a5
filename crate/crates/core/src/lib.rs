// SPDX-License-Identifier: Apache-2.0

//! Canonical noise distributions for f-differential privacy.
//!
//! - [`tradeoff`]: tradeoff functions, composition, tensor products and
//!   divisibility.
//! - [`cnd`]: one-dimensional canonical noise distributions, including the
//!   Tulap distribution and the log-concave limit construction.
//! - [`multivariate`]: multivariate canonical noise distributions with
//!   their sensitivity norms and worst-case shifts.
//! - [`verify`]: Monte-Carlo tradeoff estimation and statistical checks.
//! - [`suites`]: the end-to-end verification suites behind the CLI.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cnd;
pub mod error;
pub mod multivariate;
pub mod rng;
pub mod special;
pub mod suites;
pub mod tradeoff;
pub mod verify;

pub use cnd::{
    construct_cnd, gaussian_cnd, laplace_cnd, logconcave_limit, scale_group, tulap, uniform_cnd,
    verify_cnd, Cnd, CndKind, LimitDiagnostics,
};
pub use error::{CndError, Result};
pub use multivariate::{
    approx_dp_cnd, gaussian_mv_cnd, iid_l1_cnd, linf_mechanism, product_cnd, uniform_cube_cnd,
    verify_mv_cnd, MvCnd, MvKind, NormSpec, WorstShiftResult,
};
pub use suites::Suite;
pub use tradeoff::{
    compose, fixed_point_c, from_cnd_cdf, identity, make_eps_delta, make_gdp, make_laplace_tf,
    self_compose, tensor_closed_form, tensor_via_pld, DivisibleFamily, FamilyTag,
    PiecewiseLinearTf, TradeoffFunction,
};
pub use verify::{EmpiricalTradeoff, McConfig, TestEntry, TestReport};

/// Crate version embedded in every exported artifact.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
