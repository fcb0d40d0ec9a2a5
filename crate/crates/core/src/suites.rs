// SPDX-License-Identifier: Apache-2.0

//! End-to-end verification suites.
//!
//! Every check draws its randomness from `derive_seed(seed, index)`, so a
//! criterion run alone produces the same entries as inside its suite, and a
//! suite's JSON report is a pure function of the seed.

use std::time::Duration;

use serde_json::json;

use crate::cnd::{
    construct_cnd, gaussian_cnd, laplace_cnd, logconcave_limit, recurrence_residual, scale_group,
    tulap, uniform_cnd, verify_cnd, Cnd, RECURRENCE_TOL,
};
use crate::error::{CndError, Result};
use crate::multivariate::{
    gaussian_mv_cnd, iid_l1_cnd, linf_mechanism, random_ball_shifts, uniform_cube_cnd,
    verify_mv_cnd, MvCnd, NormSpec,
};
use crate::rng::derive_seed;
use crate::special::phi;
use crate::tradeoff::{
    make_eps_delta, make_gdp, make_laplace_tf, self_compose, tensor_via_pld, DivisibleFamily,
    FamilyTag, TradeoffFunction,
};
use crate::verify::{
    check_otimes_circ, delta_compose, delta_tensor, dominance_check, ks_test, Curve, McConfig,
    TestEntry, TestReport, EXACT_TOL,
};
use nalgebra::DMatrix;

/// Monte-Carlo draws per hypothesis in every suite.
pub const SUITE_MC_SAMPLES: usize = 100_000;
/// Significance level of bands and KS tests in every suite.
pub const SUITE_LEVEL: f64 = 0.01;
/// Loss bins per component for the tensor-product checks.
pub const SUITE_PLD_GRID: usize = 10_000;
/// Random unit-ball shifts per dominance sweep.
pub const SUITE_SHIFTS: usize = 20;

/// The suites exposed through `cnd report`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Acceptance,
    Inequalities,
    Limits,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Self::Acceptance => "acceptance",
            Self::Inequalities => "inequalities",
            Self::Limits => "limits",
        }
    }

    pub fn run(self, seed: u64) -> Result<TestReport> {
        match self {
            Self::Acceptance => acceptance(seed),
            Self::Inequalities => inequalities(seed),
            Self::Limits => limits(seed),
        }
    }
}

/// One acceptance criterion: a named check with a runtime budget.
#[derive(Clone, Copy, Debug)]
pub struct Criterion {
    pub id: &'static str,
    pub summary: &'static str,
    pub budget: Duration,
    run: fn(u64) -> Result<TestReport>,
}

impl Criterion {
    /// Runs the check; an error becomes a single failing entry.
    pub fn run(&self, seed: u64) -> TestReport {
        match (self.run)(seed) {
            Ok(r) => r,
            Err(e) => {
                let mut r = TestReport::new(seed, json!({ "criterion": self.id }));
                r.push(TestEntry::new("error", false, f64::NAN, 0.0, e.to_string()));
                r
            }
        }
    }
}

/// The acceptance criteria in run order. Determinism of the CLI report is
/// checked by the integration tests, not here.
pub fn acceptance_criteria() -> Vec<Criterion> {
    let secs = Duration::from_secs;
    vec![
        Criterion {
            id: "tulap_uniqueness",
            summary: "recursion CND of f_{eps,0} equals Tulap(eps)",
            budget: secs(1),
            run: tulap_uniqueness,
        },
        Criterion {
            id: "cnd_recurrence",
            summary: "F(x) = f(F(x+1)) and F(x) = 1 - f(1 - F(x-1)) for shipped CNDs",
            budget: secs(1),
            run: cnd_recurrence,
        },
        Criterion {
            id: "logconcave_limit",
            summary: "limit CNDs of GDP, Laplace and zero-delta families",
            budget: secs(30),
            run: logconcave_limits,
        },
        Criterion {
            id: "otimes_circ_example",
            summary: "(f_{0,.1} (x) f_{0,.1})^{o2} has delta .38, f^{o2} (x) f^{o2} has .36",
            budget: secs(1),
            run: otimes_circ_example,
        },
        Criterion {
            id: "linf_mechanism",
            summary: "l-infinity mechanism identities and dominance for d in {2,3,5}",
            budget: secs(60),
            run: linf_identities,
        },
        Criterion {
            id: "gaussian_mv",
            summary: "N(0, I_3) under l-infinity is a CND for G_sqrt3",
            budget: secs(30),
            run: gaussian_mv,
        },
        Criterion {
            id: "uniform_cube",
            summary: "uniform cube under l-infinity is a CND for f_{0,1-(1-delta)^d}",
            budget: secs(30),
            run: uniform_cube,
        },
        Criterion {
            id: "pld_tensor",
            summary: "PLD tensor products reproduce f_{eps,delta} and G_sqrt2",
            budget: secs(60),
            run: pld_tensor,
        },
        Criterion {
            id: "inequalities",
            summary: "tensor-compose delta grid and i.i.d. Laplace l1 dominance",
            budget: secs(60),
            run: inequality_checks,
        },
        Criterion {
            id: "negative_controls",
            summary: "Laplace is not a CND for f_{eps,0}; Tulap coordinates are rejected for l1",
            budget: secs(10),
            run: negative_controls,
        },
    ]
}

/// Every acceptance criterion, entries prefixed with the criterion id.
pub fn acceptance(seed: u64) -> Result<TestReport> {
    let criteria = acceptance_criteria();
    let mut report = suite_report(Suite::Acceptance, seed);
    for c in &criteria {
        report.absorb(c.id, c.run(seed));
    }
    Ok(report)
}

/// The tensor-versus-composition inequalities, including the example where
/// the two orders differ.
pub fn inequalities(seed: u64) -> Result<TestReport> {
    let mut report = suite_report(Suite::Inequalities, seed);
    report.absorb("otimes_circ_example", otimes_circ_example(seed)?);
    for (d1, d2, k) in [
        (0.1, 0.1, 1),
        (0.05, 0.2, 3),
        (0.5, 0.5, 3),
        (0.01, 0.3, 10),
    ] {
        report.push(check_otimes_circ(d1, d2, k)?);
    }
    let smaller = make_eps_delta(0.0, 0.19)?;
    report.push(dominance_check(
        "tensor_dominates_compose",
        &make_eps_delta(0.0, 0.2)?,
        Curve::Exact(&smaller),
        true,
    ));
    report.absorb("inequalities", inequality_checks(seed)?);
    Ok(report)
}

/// Convergence of the log-concave limit for the three registered families.
pub fn limits(seed: u64) -> Result<TestReport> {
    let mut report = suite_report(Suite::Limits, seed);
    report.absorb("logconcave_limit", logconcave_limits(seed)?);
    Ok(report)
}

fn suite_report(suite: Suite, seed: u64) -> TestReport {
    TestReport::new(
        seed,
        json!({
            "suite": suite.name(),
            "mc": mc(seed).to_json(),
            "pld_grid": SUITE_PLD_GRID,
            "shifts": SUITE_SHIFTS,
            "version": crate::VERSION,
        }),
    )
}

fn mc(seed: u64) -> McConfig {
    McConfig {
        n: SUITE_MC_SAMPLES,
        seed,
        level: SUITE_LEVEL,
        grid_points: 201,
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

fn sup_diff(xs: &[f64], a: impl Fn(f64) -> f64, b: impl Fn(f64) -> f64) -> f64 {
    xs.iter().map(|&x| (a(x) - b(x)).abs()).fold(0.0, |m, d| {
        if d.is_nan() {
            f64::INFINITY
        } else {
            m.max(d)
        }
    })
}

fn tulap_uniqueness(seed: u64) -> Result<TestReport> {
    let mut r = TestReport::new(
        seed,
        json!({ "eps": [0.5, 1.0, 5.0], "grid": [-6.0, 6.0, 2001] }),
    );
    let xs = grid(-6.0, 6.0, 2001);
    let inner: Vec<f64> = grid(-0.5, 0.5, 101)[1..100].to_vec();
    for eps in [0.5, 1.0, 5.0] {
        let built = construct_cnd(&make_eps_delta(eps, 0.0)?)?;
        let t = tulap(eps)?;
        let gap = sup_diff(&xs, |x| built.cdf(x), |x| t.cdf(x));
        r.push(TestEntry::at_most(format!("cdf(eps={eps})"), gap, 1e-9));
        let height = (eps.exp() - 1.0) / (eps.exp() + 1.0);
        let dens = sup_diff(&inner, |x| built.density(x), |_| height).max(sup_diff(
            &inner,
            |x| t.density(x),
            |_| height,
        ));
        r.push(TestEntry::at_most(
            format!("core_density(eps={eps})"),
            dens,
            1e-10,
        ));
    }
    Ok(r)
}

fn shipped_cnds() -> Result<Vec<(String, Cnd, TradeoffFunction)>> {
    let g1 = make_gdp(1.0)?;
    let ed = make_eps_delta(1.0, 0.05)?;
    Ok(vec![
        ("tulap(0.5)".into(), tulap(0.5)?, make_eps_delta(0.5, 0.0)?),
        ("tulap(1)".into(), tulap(1.0)?, make_eps_delta(1.0, 0.0)?),
        ("tulap(5)".into(), tulap(5.0)?, make_eps_delta(5.0, 0.0)?),
        ("gaussian(1)".into(), gaussian_cnd(1.0)?, g1.clone()),
        (
            "laplace(1)".into(),
            laplace_cnd(1.0)?,
            make_laplace_tf(1.0)?,
        ),
        (
            "uniform(0.2)".into(),
            uniform_cnd(0.2)?,
            make_eps_delta(0.0, 0.2)?,
        ),
        ("constructed(G_1)".into(), construct_cnd(&g1)?, g1),
        ("constructed(f_{1,0.05})".into(), construct_cnd(&ed)?, ed),
        (
            "group_scaled(tulap(0.5),2)".into(),
            scale_group(&tulap(0.5)?, 2)?,
            self_compose(&make_eps_delta(0.5, 0.0)?, 2)?,
        ),
        (
            "group_scaled(gaussian(1),3)".into(),
            scale_group(&gaussian_cnd(1.0)?, 3)?,
            self_compose(&make_gdp(1.0)?, 3)?,
        ),
    ])
}

fn cnd_recurrence(seed: u64) -> Result<TestReport> {
    let mut r = TestReport::new(seed, json!({ "grid_points": 2001, "tol": RECURRENCE_TOL }));
    for (name, cnd, f) in shipped_cnds()? {
        let reach = 6.0_f64.max(-cnd.quantile(1e-6)?);
        let rec = recurrence_residual(&cnd, &f, &grid(-reach, reach, 2001));
        r.push(TestEntry::at_most(name, rec, RECURRENCE_TOL));
    }
    Ok(r)
}

fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}

/// Label, family and closed-form cdf of its limit CND.
type LimitCase = (&'static str, DivisibleFamily, fn(f64) -> f64);

fn logconcave_limits(seed: u64) -> Result<TestReport> {
    const GAP: f64 = 0.01;
    let mut r = TestReport::new(
        seed,
        json!({ "target_gap": GAP, "grid": [-5.0, 5.0, 2001] }),
    );
    let xs = grid(-5.0, 5.0, 2001);
    let families: [LimitCase; 3] = [
        ("gdp(1)", DivisibleFamily::gdp(1.0)?, phi),
        ("laplace(1)", DivisibleFamily::laplace(1.0)?, |x| {
            laplace_cdf(x, 1.0)
        }),
        ("zero_delta(0.2)", DivisibleFamily::zero_delta(0.2)?, |x| {
            ((x + 2.5) / 5.0).clamp(0.0, 1.0)
        }),
    ];
    for (name, fam, oracle) in families {
        let (cnd, diag) = logconcave_limit(&fam, GAP)?;
        let gap = sup_diff(&xs, |x| cnd.cdf(x), oracle);
        r.push(TestEntry::at_most(name, gap, GAP).with_details(format!(
            "sup cdf gap {gap:.3e} <= {GAP}; scale {}, bound {:.3e}, log-concavity defect {:.3e}",
            diag.scales_used.last().copied().unwrap_or(f64::NAN),
            diag.error_bound,
            diag.log_concavity_defect
        )));
    }
    Ok(r)
}

fn otimes_circ_example(seed: u64) -> Result<TestReport> {
    let mut r = TestReport::new(seed, json!({ "d1": 0.1, "d2": 0.1, "k": 2 }));
    let e = check_otimes_circ(0.1, 0.1, 2)?;
    let left = (2.0 * delta_tensor(0.1, 0.1)).min(1.0);
    let right = delta_tensor(0.2, 0.2);
    // Exact up to the rounding of the decimal inputs.
    let tol = 4.0 * f64::EPSILON;
    r.push(e);
    r.push(TestEntry::at_most(
        "delta_L = 0.38",
        (left - 0.38).abs(),
        tol,
    ));
    r.push(TestEntry::at_most(
        "delta_R = 0.36",
        (right - 0.36).abs(),
        tol,
    ));
    Ok(r)
}

/// Radial law of the ℓ∞-mechanism: `‖X‖∞ ~ Gamma(d, ε)`.
fn gamma_int_cdf(x: f64, d: usize, eps: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let y = eps * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..d {
        term *= y / k as f64;
        sum += term;
    }
    1.0 - (-y).exp() * sum
}

fn mv_with_shifts(m: &MvCnd, seed: u64, tag: u64) -> Result<TestReport> {
    let shifts = random_ball_shifts(m.norm(), SUITE_SHIFTS, derive_seed(seed, tag));
    verify_mv_cnd(m, &shifts, &mc(derive_seed(seed, tag + 1)))
}

fn linf_identities(seed: u64) -> Result<TestReport> {
    let eps = 1.0;
    let mut r = TestReport::new(seed, json!({ "eps": eps, "dims": [2, 3, 5] }));
    for (i, d) in [2usize, 3, 5].into_iter().enumerate() {
        let m = linf_mechanism(eps, d)?;
        let draws = m.sample_n(SUITE_MC_SAMPLES, derive_seed(seed, 100 + i as u64));
        let spread: Vec<f64> = draws
            .iter()
            .map(|x| {
                let (lo, hi) = x
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                lo + hi
            })
            .collect();
        r.push(ks_test(
            format!("d={d}/max_plus_min_ks"),
            &spread,
            |x| laplace_cdf(x, 2.0 / eps),
            SUITE_LEVEL,
        )?);
        let radial: Vec<f64> = draws
            .iter()
            .map(|x| x.iter().fold(0.0_f64, |a, v| a.max(v.abs())))
            .collect();
        r.push(ks_test(
            format!("d={d}/radial_ks"),
            &radial,
            |x| gamma_int_cdf(x, d, eps),
            SUITE_LEVEL,
        )?);
        r.absorb(
            &format!("d={d}"),
            mv_with_shifts(&m, seed, 200 + 2 * i as u64)?,
        );
    }
    Ok(r)
}

fn gaussian_mv(seed: u64) -> Result<TestReport> {
    let mut r = TestReport::new(
        seed,
        json!({ "sigma": "identity", "dim": 3, "norm": "linf" }),
    );
    let m = gaussian_mv_cnd(&DMatrix::identity(3, 3), &NormSpec::linf(3)?)?;
    r.push(TestEntry::new(
        "v_star",
        m.worst_shift() == [1.0, 1.0, 1.0],
        0.0,
        0.0,
        format!("v* = {:?}", m.worst_shift()),
    ));
    let mu = match m.target_f().family_tag() {
        FamilyTag::Gdp { mu } => mu,
        _ => f64::NAN,
    };
    r.push(TestEntry::at_most(
        "mu = sqrt3",
        (mu - 3f64.sqrt()).abs(),
        1e-10,
    ));
    r.absorb("mc", mv_with_shifts(&m, seed, 300)?);
    Ok(r)
}

fn uniform_cube(seed: u64) -> Result<TestReport> {
    let (delta, d) = (0.1, 3);
    let mut r = TestReport::new(seed, json!({ "delta": delta, "dim": d, "norm": "linf" }));
    let m = uniform_cube_cnd(delta, &NormSpec::linf(d)?)?;
    let a = m.worst_shift_result().objective;
    let exact = (0..d).fold(1.0, |p, _| p * (1.0 - delta));
    r.push(TestEntry::new(
        "overlap = (1-delta)^d",
        a == exact,
        (a - exact).abs(),
        0.0,
        format!("A = {a}, (1-delta)^d = {exact}"),
    ));
    r.absorb("mc", mv_with_shifts(&m, seed, 400)?);
    Ok(r)
}

fn pld_tensor(seed: u64) -> Result<TestReport> {
    let mut r = TestReport::new(seed, json!({ "grid_size": SUITE_PLD_GRID }));
    let cases = [
        (
            "tulap(1)xuniform(0.1)",
            tulap(1.0)?,
            uniform_cnd(0.1)?,
            make_eps_delta(1.0, 0.1)?,
        ),
        (
            "gaussian(1)xgaussian(1)",
            gaussian_cnd(1.0)?,
            gaussian_cnd(1.0)?,
            make_gdp(2f64.sqrt())?,
        ),
    ];
    for (name, f, g, expected) in cases {
        let est = tensor_via_pld(&f, &g, SUITE_PLD_GRID)?;
        r.push(TestEntry::at_most(format!("{name}/bound"), est.band, 0.01));
        r.push(dominance_check(
            format!("{name}/equality"),
            &expected,
            Curve::Estimated(&est),
            false,
        ));
    }
    Ok(r)
}

fn inequality_checks(seed: u64) -> Result<TestReport> {
    let mut r = TestReport::new(
        seed,
        json!({ "delta_grid": 50, "laplace_eps": 1.0, "k": 2 }),
    );
    let ds: Vec<f64> = (1..=50).map(|i| i as f64 / 50.0).collect();
    let mut worst = f64::NEG_INFINITY;
    for &d1 in &ds {
        for &d2 in &ds {
            worst = worst.max(delta_tensor(d1, d2) - delta_compose(d1, d2));
        }
    }
    r.push(TestEntry::new(
        "delta_tensor <= delta_compose",
        worst <= 0.0,
        worst,
        0.0,
        format!("largest delta_tensor - delta_compose over the 50x50 grid: {worst:e}"),
    ));
    let m = iid_l1_cnd(&laplace_cnd(1.0)?, 2)?;
    r.absorb("iid_laplace_l1", mv_with_shifts(&m, seed, 500)?);
    Ok(r)
}

fn negative_controls(seed: u64) -> Result<TestReport> {
    let eps = 1.0;
    let mut r = TestReport::new(seed, json!({ "eps": eps }));
    let report = verify_cnd(
        &laplace_cnd(eps)?,
        &make_eps_delta(eps, 0.0)?,
        &[1.0],
        &mc(derive_seed(seed, 600)),
    )?;
    let pass_of = |name: &str| report.entry(name).map(|e| (e.pass, e.statistic));
    let (eq_pass, eq_stat) = pass_of("unit_shift_equality").unwrap_or((true, f64::NAN));
    r.push(TestEntry::new(
        "laplace_vs_pure_dp/equality_fails",
        !eq_pass,
        eq_stat,
        EXACT_TOL,
        "T(Laplace, Laplace + 1) is strictly above f_{eps,0} somewhere",
    ));
    let (dom_pass, dom_stat) = pass_of("dominance(m=1)").unwrap_or((false, f64::NAN));
    r.push(TestEntry::new(
        "laplace_vs_pure_dp/dominance_holds",
        dom_pass,
        dom_stat,
        EXACT_TOL,
        "T(Laplace, Laplace + 1) >= f_{eps,0}",
    ));
    let rejected = matches!(iid_l1_cnd(&tulap(eps)?, 2), Err(CndError::Precondition(_)));
    r.push(TestEntry::new(
        "iid_l1(tulap)/rejected",
        rejected,
        0.0,
        0.0,
        "Tulap is not log-concave",
    ));
    Ok(r)
}
