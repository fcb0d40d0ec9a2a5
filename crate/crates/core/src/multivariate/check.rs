// SPDX-License-Identifier: Apache-2.0

use rand::Rng;
use rand_distr::StandardNormal;

use super::norm::{NormKind, NormSpec};
use super::MvCnd;
use crate::error::{domain, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::verify::{
    dominance_check, empirical_tradeoff, parallel_draws, Curve, McConfig, TestEntry, TestReport,
};

/// Relative tolerance of the density symmetry check.
pub const SYMMETRY_REL_TOL: f64 = 1e-9;
/// Slack of the monotone likelihood ratio check, in log units.
pub const MLR_TOL: f64 = 1e-9;

const PROBE_POINTS: usize = 2000;
const MLR_BASES: usize = 200;
const MLR_STEPS: usize = 81;
const SHIFT_NORM_TOL: f64 = 1e-12;

/// `count` shifts in the unit ball of `norm`: uniform in the cube for ℓ∞,
/// otherwise a uniform direction scaled to the boundary and then by
/// `U^{1/d}`.
pub fn random_ball_shifts(norm: &NormSpec, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = norm.dim();
    let mut rng = stream_rng(seed, 0);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        if matches!(norm.kind(), NormKind::Linf) {
            out.push((0..d).map(|_| rng.random_range(-1.0..=1.0)).collect());
            continue;
        }
        let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(u) = norm.to_boundary(&x) {
            let r = rng.random::<f64>().powf(1.0 / d as f64);
            out.push(u.into_iter().map(|v| v * r).collect());
        }
    }
    out
}

/// Checks the four properties of a multivariate CND.
///
/// Entries, in order:
/// - `symmetry`: `g(x) = g(-x)` at sampled points, relative tolerance 1e-9;
/// - `mlr_along_v_star`: `t ↦ g(w + t v* - v*) / g(w + t v*)` is
///   non-decreasing on a grid for sampled `w`;
/// - `worst_shift_norm`: `‖v*‖ ≤ 1`;
/// - `unit_shift_equality`: Monte-Carlo `T(N, N + v*)` equals the target
///   within the band (widened by the target's own error bound);
/// - `dominance[i]`: Monte-Carlo `T(N, N + v_i) ≥ f` for each grid shift.
pub fn verify_mv_cnd(m: &MvCnd, shifts: &[Vec<f64>], cfg: &McConfig) -> Result<TestReport> {
    let d = m.dim();
    for (i, v) in shifts.iter().enumerate() {
        if v.len() != d {
            return Err(domain(format!(
                "shift {i} has dimension {}, expected {d}",
                v.len()
            )));
        }
        if m.norm().eval(v) > 1.0 + SHIFT_NORM_TOL {
            return Err(domain(format!("shift {i} lies outside the unit ball")));
        }
    }
    let mut report = TestReport::new(
        cfg.seed,
        serde_json::json!({
            "mv_cnd": m.metadata(),
            "shifts": shifts,
            "mc": cfg.to_json(),
        }),
    );

    let probes = parallel_draws(PROBE_POINTS, derive_seed(cfg.seed, 2000), 0, |rng| {
        Ok(m.sample(rng))
    })?;
    let mut sym: f64 = 0.0;
    for x in &probes {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let (a, b) = (m.log_density(x), m.log_density(&neg));
        let gap = if a == b {
            0.0
        } else if a.is_finite() && b.is_finite() {
            // |g(x) - g(-x)| / max(g) = 1 - e^{-|ln g(x) - ln g(-x)|}
            -(-(a - b).abs()).exp_m1()
        } else {
            f64::INFINITY
        };
        sym = sym.max(gap);
    }
    report.push(TestEntry::at_most("symmetry", sym, SYMMETRY_REL_TOL));

    let v = m.worst_shift();
    let reach = 1.0
        + 3.0
            * probes
                .iter()
                .flat_map(|x| x.iter())
                .fold(0.0_f64, |a, b| a.max(b.abs()));
    let mut mlr: f64 = 0.0;
    for w in probes.iter().take(MLR_BASES) {
        let mut prev = f64::NEG_INFINITY;
        for j in 0..MLR_STEPS {
            let t = -reach + 2.0 * reach * j as f64 / (MLR_STEPS - 1) as f64;
            let at: Vec<f64> = w.iter().zip(v).map(|(a, b)| a + t * b).collect();
            let back: Vec<f64> = at.iter().zip(v).map(|(a, b)| a - b).collect();
            let (num, den) = (m.log_density(&back), m.log_density(&at));
            if !(num.is_finite() && den.is_finite()) {
                continue;
            }
            let r = num - den;
            mlr = mlr.max(prev - r);
            prev = r;
        }
    }
    report.push(TestEntry::at_most("mlr_along_v_star", mlr, MLR_TOL));

    let norm_v = m.norm().eval(v);
    report.push(TestEntry::new(
        "worst_shift_norm",
        norm_v <= 1.0 + SHIFT_NORM_TOL,
        norm_v,
        1.0 + SHIFT_NORM_TOL,
        format!("||v*|| = {norm_v}"),
    ));

    let mut runs = vec![(String::from("unit_shift_equality"), v.to_vec(), false)];
    runs.extend(
        shifts
            .iter()
            .enumerate()
            .map(|(i, s)| (format!("dominance[{i}]"), s.clone(), true)),
    );
    for (tag, (name, shift, one_sided)) in runs.into_iter().enumerate() {
        let run = cfg.with_seed(derive_seed(cfg.seed, tag as u64));
        let est = empirical_tradeoff(|rng| m.sample(rng), |x| m.log_density(x), &shift, &run);
        report.push(match est {
            Ok(mut est) => {
                est.band += m.target_error();
                dominance_check(name, m.target_f(), Curve::Estimated(&est), one_sided)
            }
            Err(e) => TestEntry::new(name, false, f64::NAN, 0.0, e.to_string()),
        });
    }
    Ok(report)
}
