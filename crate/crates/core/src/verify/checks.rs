// SPDX-License-Identifier: Apache-2.0

use super::{EmpiricalTradeoff, McConfig, TestEntry};
use crate::cnd::{scale_group, verify_cnd, Cnd};
use crate::error::{precondition, CndError, Result};
use crate::tradeoff::{alpha_grid, self_compose, TradeoffFunction};

/// Slack for comparisons between exactly evaluated curves.
pub const EXACT_TOL: f64 = 1e-12;

/// Upper curve of a dominance check.
#[derive(Clone, Copy, Debug)]
pub enum Curve<'a> {
    /// Monte-Carlo or PLD estimate; its band is applied in both coordinates.
    Estimated(&'a EmpiricalTradeoff),
    /// Exactly evaluated function, compared on a 1001-point grid.
    Exact(&'a TradeoffFunction),
}

/// Checks `upper ≥ lower` (one-sided) or `upper = lower` (two-sided) up to
/// the estimate's band.
///
/// For an estimate with band `b`, every grid point `(α, β̂)` must lie in
/// the box allowed by uniform errors of `b` in both the type-I and type-II
/// error: `lower(α-b) - b ≤ β̂` and, two-sided, `β̂ ≤ lower(α+b) + b`. The
/// statistic is the largest violation; the entry passes iff it is at most
/// [`EXACT_TOL`].
pub fn dominance_check(
    name: impl Into<String>,
    lower: &TradeoffFunction,
    upper: Curve<'_>,
    one_sided: bool,
) -> TestEntry {
    let (alphas, betas, band) = match upper {
        Curve::Estimated(e) => (e.alphas.clone(), e.betas.clone(), e.band),
        Curve::Exact(g) => {
            let a = alpha_grid(1001);
            let b = g.tabulate(&a);
            (a, b, 0.0)
        }
    };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = 0.0;
    for (&a, &b) in alphas.iter().zip(&betas) {
        let below = lower.eval(a - band) - band - b;
        let above = if one_sided {
            f64::NEG_INFINITY
        } else {
            b - lower.eval(a + band) - band
        };
        let v = below.max(above);
        if v > worst {
            worst = v;
            worst_at = a;
        }
    }
    let mode = if one_sided { "one-sided" } else { "two-sided" };
    TestEntry::new(
        name,
        worst <= EXACT_TOL,
        worst,
        band,
        format!("{mode}; largest violation {worst:.3e} at alpha={worst_at:.4}; band {band:.3e}"),
    )
}

/// `δ` of `f_{0,δ1} ⊗ f_{0,δ2}`.
pub fn delta_tensor(d1: f64, d2: f64) -> f64 {
    d1 + d2 - d1 * d2
}

/// `δ` of `f_{0,δ1} ∘ f_{0,δ2}`.
pub fn delta_compose(d1: f64, d2: f64) -> f64 {
    (d1 + d2).min(1.0)
}

/// Compares `(f⊗g)^{∘k}` with `f^{∘k} ⊗ g^{∘k}` for `f = f_{0,δ1}`,
/// `g = f_{0,δ2}` through their `δ` parameters:
/// `δ_L = min{1, k·(1-(1-δ1)(1-δ2))}` and
/// `δ_R = 1-(1-min{1,kδ1})(1-min{1,kδ2})`. Passes iff `δ_L ≥ δ_R`, i.e.
/// the left side is the smaller tradeoff function.
pub fn check_otimes_circ(d1: f64, d2: f64, k: u32) -> Result<TestEntry> {
    for d in [d1, d2] {
        if !(d > 0.0 && d <= 1.0) {
            return Err(CndError::Domain(format!(
                "delta must lie in (0,1], got {d}"
            )));
        }
    }
    if k == 0 {
        return Err(CndError::Domain("k must be >= 1".into()));
    }
    let kf = k as f64;
    let left = (kf * delta_tensor(d1, d2)).min(1.0);
    let right = delta_tensor((kf * d1).min(1.0), (kf * d2).min(1.0));
    Ok(TestEntry::new(
        format!("otimes_circ(d1={d1}, d2={d2}, k={k})"),
        left >= right,
        left - right,
        0.0,
        format!("delta_L={left:.12}, delta_R={right:.12}"),
    ))
}

/// Two-sided Kolmogorov–Smirnov critical value `√(-ln(level/2)/2) / √n`.
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Two-sided Kolmogorov–Smirnov test of `samples` against `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(
    name: impl Into<String>,
    samples: &[f64],
    cdf: F,
    level: f64,
) -> Result<TestEntry> {
    if samples.len() < 1000 {
        return Err(precondition(format!(
            "KS test needs at least 1000 samples, got {}",
            samples.len()
        )));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(CndError::Domain(format!(
            "level must lie in (0,1), got {level}"
        )));
    }
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(CndError::NonFinite(i));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let crit = ks_critical_value(xs.len(), level);
    Ok(TestEntry::new(
        name,
        d <= crit,
        d,
        crit,
        format!(
            "D={d:.5}, critical={crit:.5} at level {level}, n={}",
            xs.len()
        ),
    ))
}

/// Runs the CND checks on `scale_group(F, k)` against `f^{∘k}`.
pub fn group_scale_check(cnd: &Cnd, k: u32, cfg: &McConfig) -> Result<TestEntry> {
    let name = format!("group_scale(k={k})");
    if k == 1 {
        return Ok(TestEntry::new(
            name,
            true,
            0.0,
            0.0,
            "k = 1 leaves F unchanged",
        ));
    }
    let scaled = scale_group(cnd, k)?;
    let target = self_compose(cnd.source_f(), k)?;
    let report = verify_cnd(&scaled, &target, &[0.5, 1.0], cfg)?;
    let failed: Vec<&str> = report.failures().map(|e| e.name.as_str()).collect();
    Ok(TestEntry::new(
        name,
        failed.is_empty(),
        failed.len() as f64,
        0.0,
        if failed.is_empty() {
            format!("{} checks passed", report.entries.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    ))
}
