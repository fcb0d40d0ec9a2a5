// SPDX-License-Identifier: Apache-2.0

//! Monte-Carlo estimation of tradeoff curves and the statistical checks
//! built on it.

mod checks;
mod empirical;
mod report;

pub use checks::{
    check_otimes_circ, delta_compose, delta_tensor, dominance_check, group_scale_check,
    ks_critical_value, ks_test, Curve, EXACT_TOL,
};
pub(crate) use empirical::lower_hull;
pub use empirical::{
    dkw_band, empirical_tradeoff, parallel_draws, tradeoff_from_losses, EmpiricalTradeoff,
    EstimateMethod, McConfig, MIN_MC_SAMPLES,
};
pub use report::{TestEntry, TestReport};
