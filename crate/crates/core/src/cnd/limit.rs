// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use super::{construct_cnd, Cnd, CndKind};
use crate::error::{domain, CndError, Result};
use crate::tradeoff::DivisibleFamily;

/// Largest exponent `n` of the dyadic scale `2^{-n}`.
pub const MAX_SCALE_EXPONENT: u32 = 40;
/// Consecutive scales without a decrease in sup gap before giving up.
pub const STAGNATION_LIMIT: usize = 5;

/// Convergence record of [`logconcave_limit`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitDiagnostics {
    pub scales_used: Vec<f64>,
    /// `sup_α |α - f_s(α)|` for each scale.
    pub sup_gap: Vec<f64>,
    pub converged: bool,
    /// Bound on `sup_t |F*(t) - F_s(t/s)|` at the final scale.
    pub error_bound: f64,
    /// Largest second difference of the log cell-averaged density.
    pub log_concavity_defect: f64,
}

impl LimitDiagnostics {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostics serialize")
    }
}

/// Approximates the log-concave CND of `family.at(1)` by `F_s(t/s)`, where
/// `F_s` is the recursion CND of `family.at(s)` and `s = 2^{-n}`.
///
/// `F_s(·/s)` is exactly a CND for `f_1` because `1/s` is an integer, and it
/// differs from the log-concave limit by at most `sup_α |α - f_s(α)|`
/// uniformly. The scale is refined until that gap is at most `target_gap`.
pub fn logconcave_limit(
    family: &DivisibleFamily,
    target_gap: f64,
) -> Result<(Cnd, LimitDiagnostics)> {
    if !(target_gap > 0.0 && target_gap <= 0.1) {
        return Err(domain(format!(
            "target_gap must lie in (0, 0.1], got {target_gap}"
        )));
    }
    let mut scales = Vec::new();
    let mut gaps: Vec<f64> = Vec::new();
    let mut best = f64::INFINITY;
    let mut stagnant = 0;
    for n in 0..=MAX_SCALE_EXPONENT {
        let s = (-(n as f64)).exp2();
        let fs = family.at(s);
        let gap = fs.sup_gap();
        scales.push(s);
        gaps.push(gap);
        if gap <= target_gap {
            let base = construct_cnd(&fs)?;
            let defect = log_concavity_defect(&base);
            let cnd = Cnd::rescaled(
                base,
                1.0 / s,
                CndKind::LimitCnd {
                    scale: s,
                    log_concave: defect <= 10.0 * target_gap,
                },
                family.at(1.0),
            );
            let diag = LimitDiagnostics {
                scales_used: scales,
                sup_gap: gaps,
                converged: true,
                error_bound: gap,
                log_concavity_defect: defect,
            };
            return Ok((cnd, diag));
        }
        if gap < best {
            best = gap;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= STAGNATION_LIMIT {
                return Err(CndError::Convergence(format!(
                    "sup gap stuck at {best:.4} for {STAGNATION_LIMIT} scales; \
                     the family does not approach the identity"
                )));
            }
        }
    }
    Err(CndError::Convergence(format!(
        "sup gap {best:.3e} above target after scale 2^-{MAX_SCALE_EXPONENT}"
    )))
}

/// Largest second difference of `ln p_k`, where `p_k` is the mass `F_s`
/// puts on the unit cell centred at `k`, over cells carrying the central
/// 99.8% of the mass. Cell masses are the cell-averaged density of the
/// candidate on a grid of spacing `s`; a log-concave limit gives values
/// `≤ 0` up to discretization error.
pub fn log_concavity_defect(base: &Cnd) -> f64 {
    let (Ok(lo), Ok(hi)) = (base.quantile(1e-3), base.quantile(1.0 - 1e-3)) else {
        return f64::INFINITY;
    };
    let (k_lo, k_hi) = (lo.floor() as i64, hi.ceil() as i64);
    let logs: Vec<f64> = (k_lo..=k_hi)
        .map(|k| {
            let k = k as f64;
            (base.cdf(k + 0.5) - base.cdf(k - 0.5)).ln()
        })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for w in logs.windows(3) {
        if w.iter().all(|v| v.is_finite()) {
            worst = worst.max(w[0] - 2.0 * w[1] + w[2]);
        }
    }
    worst.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::phi;
    use crate::tradeoff::{laplace_unit_cdf, TradeoffFunction};

    fn sup_err(cnd: &Cnd, oracle: impl Fn(f64) -> f64) -> f64 {
        (0..=2000)
            .map(|i| -5.0 + i as f64 * 0.005)
            .map(|t| (cnd.cdf(t) - oracle(t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn gdp_limit_is_standard_normal() {
        let (cnd, diag) = logconcave_limit(&DivisibleFamily::gdp(1.0).unwrap(), 0.01).unwrap();
        assert_eq!(diag.scales_used.last(), Some(&(1.0 / 64.0)));
        assert!(diag.converged);
        assert_eq!(diag.error_bound, *diag.sup_gap.last().unwrap());
        assert!(diag.sup_gap.windows(2).all(|w| w[1] <= w[0]));
        assert!(sup_err(&cnd, phi) <= 0.01);
        assert!(
            cnd.kind().is_log_concave(),
            "defect {}",
            diag.log_concavity_defect
        );
    }

    #[test]
    fn laplace_and_zero_delta_limits() {
        let (cnd, diag) = logconcave_limit(&DivisibleFamily::laplace(1.0).unwrap(), 0.01).unwrap();
        assert!(sup_err(&cnd, laplace_unit_cdf) <= diag.error_bound);
        assert!(cnd.kind().is_log_concave());

        let (cnd, diag) =
            logconcave_limit(&DivisibleFamily::zero_delta(0.2).unwrap(), 0.01).unwrap();
        assert_eq!(diag.scales_used.last(), Some(&(1.0 / 32.0)));
        let uniform = |t: f64| ((t + 2.5) / 5.0).clamp(0.0, 1.0);
        assert!(sup_err(&cnd, uniform) <= diag.error_bound);
        assert!(cnd.kind().is_log_concave());
    }

    #[test]
    fn point_mass_family_is_rejected() {
        let fam = DivisibleFamily::custom("point mass", |_| {
            TradeoffFunction::custom("I(α=1)", true, |a| if a >= 1.0 { 1.0 } else { 0.0 })
                .expect("valid")
        });
        assert!(matches!(
            logconcave_limit(&fam, 0.01),
            Err(CndError::Convergence(_))
        ));
    }

    #[test]
    fn target_gap_domain() {
        let fam = DivisibleFamily::gdp(1.0).unwrap();
        assert!(logconcave_limit(&fam, 0.0).is_err());
        assert!(logconcave_limit(&fam, 0.2).is_err());
    }
}
