// SPDX-License-Identifier: Apache-2.0

//! Tradeoff functions and the algebra on them.
//!
//! A tradeoff function `f: [0,1] -> [0,1]` gives the smallest type-II error
//! achievable at specificity `α` (one minus type-I error). Valid tradeoff
//! functions are convex, continuous, non-decreasing and lie below the
//! identity. This module provides the closed-form families used throughout
//! the crate, functional composition (group privacy), the whitelisted
//! closed-form tensor products (mechanism composition) and the symmetric
//! fixed point `f(1-c) = c`.

mod divisible;
mod piecewise;
mod pld;

pub use divisible::{DivisibleFamily, FamilyLabel};
pub use piecewise::{
    breakpoints, decide_nth_root_exists, PiecewiseLinearTf, RootVerdict, UnknownReason,
};
pub use pld::{tensor_many_via_pld, tensor_via_pld, tensor_via_pld_on, PrivacyLossDistribution};

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cnd::Cnd;
use crate::error::{domain, CndError, Result};
use crate::rng::stream_rng;
use crate::special::{phi, phi_inv};

/// Number of points on the uniform validation grid.
pub const VALIDATION_GRID: usize = 1001;
/// Extra uniformly drawn validation points.
pub const VALIDATION_RANDOM: usize = 100;

/// Closed-form description of a tradeoff function, used for serialization
/// and for the closed-form tensor whitelist.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family_tag", content = "params")]
pub enum FamilyTag {
    EpsDelta {
        eps: f64,
        delta: f64,
    },
    Gdp {
        mu: f64,
    },
    LaplaceTf {
        eps: f64,
    },
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
    /// Induced by a noise distribution through `α ↦ F(F⁻¹(α) - 1)`.
    FromCdf {
        kind: String,
    },
    /// Functional composition or an otherwise unnamed construction.
    Composite {
        description: String,
    },
}

type EvalFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Repr {
    EpsDelta {
        eps: f64,
        delta: f64,
    },
    Gdp {
        mu: f64,
    },
    Laplace {
        eps: f64,
    },
    Piecewise(PiecewiseLinearTf),
    FromCdf(Arc<Cnd>),
    /// `parts[0] ∘ parts[1] ∘ ...`, applied right to left.
    Composite(Vec<TradeoffFunction>),
    Custom {
        name: String,
        eval: Arc<EvalFn>,
    },
}

/// An evaluable tradeoff function.
#[derive(Clone)]
pub struct TradeoffFunction {
    repr: Repr,
    symmetric: bool,
}

impl fmt::Debug for TradeoffFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TradeoffFunction")
            .field("family", &self.family_tag())
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

/// `f_{ε,δ}(α) = max{0, 1-δ-e^ε+e^ε α, e^{-ε}(α-δ)}`.
pub fn make_eps_delta(eps: f64, delta: f64) -> Result<TradeoffFunction> {
    if !(eps >= 0.0) || eps.is_infinite() {
        return Err(domain(format!("eps must be finite and >= 0, got {eps}")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(domain(format!("delta must lie in [0,1], got {delta}")));
    }
    Ok(TradeoffFunction {
        repr: Repr::EpsDelta { eps, delta },
        symmetric: true,
    })
}

/// Gaussian tradeoff `G_μ(α) = Φ(Φ⁻¹(α) - μ)`.
pub fn make_gdp(mu: f64) -> Result<TradeoffFunction> {
    if !(mu >= 0.0) || mu.is_infinite() {
        return Err(domain(format!("mu must be finite and >= 0, got {mu}")));
    }
    Ok(TradeoffFunction {
        repr: Repr::Gdp { mu },
        symmetric: true,
    })
}

/// Laplace tradeoff `L_ε = T(N, N+ε)` with `N ~ Laplace(0,1)`.
pub fn make_laplace_tf(eps: f64) -> Result<TradeoffFunction> {
    if !(eps > 0.0) || eps.is_infinite() {
        return Err(domain(format!("eps must be finite and > 0, got {eps}")));
    }
    Ok(TradeoffFunction {
        repr: Repr::Laplace { eps },
        symmetric: true,
    })
}

/// The identity tradeoff function (perfect privacy).
pub fn identity() -> TradeoffFunction {
    TradeoffFunction {
        repr: Repr::EpsDelta {
            eps: 0.0,
            delta: 0.0,
        },
        symmetric: true,
    }
}

/// Tradeoff function `α ↦ F(F⁻¹(α) - 1)` induced by a noise distribution.
///
/// Quantile failures at `α ∈ {0, 1}` are resolved by the endpoint
/// conventions `f(0) = 0` and `f(1) = 1` (full support) or the cdf limit.
pub fn from_cnd_cdf(cnd: &Cnd) -> TradeoffFunction {
    TradeoffFunction {
        repr: Repr::FromCdf(Arc::new(cnd.clone())),
        symmetric: true,
    }
}

/// Functional composition `α ↦ f(g(α))`, revalidated on the standard grid.
pub fn compose(f: &TradeoffFunction, g: &TradeoffFunction) -> Result<TradeoffFunction> {
    let mut parts = Vec::new();
    for h in [f, g] {
        match &h.repr {
            Repr::Composite(inner) => parts.extend(inner.iter().cloned()),
            _ => parts.push(h.clone()),
        }
    }
    let out = TradeoffFunction {
        repr: Repr::Composite(parts),
        symmetric: f.symmetric && g.symmetric,
    };
    out.validate()?;
    Ok(out)
}

/// `k`-fold self composition `f^{∘k}`.
pub fn self_compose(f: &TradeoffFunction, k: u32) -> Result<TradeoffFunction> {
    if k == 0 {
        return Err(domain("self_compose needs k >= 1"));
    }
    if k == 1 {
        return Ok(f.clone());
    }
    let parts = match &f.repr {
        Repr::Composite(inner) => (0..k).flat_map(|_| inner.iter().cloned()).collect(),
        _ => vec![f.clone(); k as usize],
    };
    let out = TradeoffFunction {
        repr: Repr::Composite(parts),
        symmetric: f.symmetric,
    };
    out.validate()?;
    Ok(out)
}

/// Solves `f(1-c) = c` for `c ∈ [0, 1/2]` by bisection.
pub fn fixed_point_c(f: &TradeoffFunction) -> Result<f64> {
    const MAX_STEPS: usize = 200;
    const TOL: f64 = 1e-12;
    let h = |c: f64| f.eval(1.0 - c) - c;
    if h(0.5) >= 0.0 {
        return Ok(0.5);
    }
    if h(0.0) <= 0.0 {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
    for _ in 0..MAX_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let v = h(mid);
        if v == 0.0 {
            return Ok(mid);
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let r = h(c);
    if r.abs() <= TOL {
        Ok(c)
    } else {
        Err(CndError::Convergence(format!(
            "fixed point residual {r:e} after bisection; f is likely malformed"
        )))
    }
}

/// Closed-form tensor product `f ⊗ g` when the pair is on the whitelist:
/// identity with anything, `G_μ1 ⊗ G_μ2` and `f_{ε,δ1} ⊗ f_{0,δ2}`. Returns `None` (unsupported) otherwise.
pub fn tensor_closed_form(f: &TradeoffFunction, g: &TradeoffFunction) -> Option<TradeoffFunction> {
    if f.is_identity_tag() {
        return Some(g.clone());
    }
    if g.is_identity_tag() {
        return Some(f.clone());
    }
    match (&f.repr, &g.repr) {
        (Repr::Gdp { mu: a }, Repr::Gdp { mu: b }) => make_gdp(a.hypot(*b)).ok(),
        (Repr::EpsDelta { eps: e1, delta: d1 }, Repr::EpsDelta { eps: e2, delta: d2 }) => {
            // f_{ε,δ1} ⊗ f_{0,δ2} = f_{ε,0} ⊗ f_{0,δ1} ⊗ f_{0,δ2}
            if *e2 == 0.0 {
                make_eps_delta(*e1, d1 + d2 - d1 * d2).ok()
            } else if *e1 == 0.0 {
                make_eps_delta(*e2, d1 + d2 - d1 * d2).ok()
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Uniform grid of `n` points on `[0, 1]`.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2, "grid needs at least two points");
    let last = (n - 1) as f64;
    (0..n).map(|i| i as f64 / last).collect()
}

/// Largest violations found while validating a tradeoff function.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Validation {
    pub max_above_identity: f64,
    pub max_decrease: f64,
    pub max_convexity_violation: f64,
    pub out_of_range: bool,
}

impl TradeoffFunction {
    /// Wraps an arbitrary evaluator. The result is validated on the grid.
    pub fn custom<F>(name: impl Into<String>, symmetric: bool, eval: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let out = Self {
            repr: Repr::Custom {
                name: name.into(),
                eval: Arc::new(eval),
            },
            symmetric,
        };
        out.validate()?;
        Ok(out)
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Evaluates `f(α)`; `α` is clamped to `[0,1]`.
    pub fn eval(&self, alpha: f64) -> f64 {
        let a = alpha.clamp(0.0, 1.0);
        let v = match &self.repr {
            Repr::EpsDelta { eps, delta } => eval_eps_delta(*eps, *delta, a),
            Repr::Gdp { mu } => {
                if *mu == 0.0 {
                    a
                } else {
                    phi(phi_inv(a) - mu)
                }
            }
            Repr::Laplace { eps } => laplace_unit_cdf(laplace_unit_quantile(a) - eps),
            Repr::Piecewise(p) => p.eval(a),
            Repr::FromCdf(cnd) => cnd_shift_tradeoff(cnd, a, 1.0),
            Repr::Composite(parts) => parts.iter().rev().fold(a, |x, p| p.eval(x)),
            Repr::Custom { eval, .. } => eval(a),
        };
        v.clamp(0.0, 1.0)
    }

    /// Smallest `α` with `f(α) >= β`, for `β ∈ (0, f(1)]`. Returns `None`
    /// when `β` is not attained.
    pub fn inverse(&self, beta: f64) -> Option<f64> {
        if !(beta > 0.0) || beta > self.eval(1.0) {
            return None;
        }
        let a = match &self.repr {
            Repr::EpsDelta { eps, delta } => {
                let via_steep = 1.0 - (1.0 - delta - beta) * (-eps).exp();
                let via_flat = beta * eps.exp() + delta;
                via_steep.min(via_flat)
            }
            Repr::Gdp { mu } => phi(phi_inv(beta) + mu),
            Repr::Laplace { eps } => laplace_unit_cdf(laplace_unit_quantile(beta) + eps),
            Repr::Composite(parts) => {
                let mut b = beta;
                for p in parts {
                    b = p.inverse(b)?;
                }
                b
            }
            _ => return Some(self.inverse_bisect(beta)),
        };
        Some(a.clamp(0.0, 1.0))
    }

    fn inverse_bisect(&self, beta: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) >= beta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    /// Closed-form description of this function.
    pub fn family_tag(&self) -> FamilyTag {
        match &self.repr {
            Repr::EpsDelta { eps, delta } => FamilyTag::EpsDelta {
                eps: *eps,
                delta: *delta,
            },
            Repr::Gdp { mu } => FamilyTag::Gdp { mu: *mu },
            Repr::Laplace { eps } => FamilyTag::LaplaceTf { eps: *eps },
            Repr::Piecewise(p) => FamilyTag::PiecewiseLinear {
                knots: p.knots().to_vec(),
            },
            Repr::FromCdf(cnd) => FamilyTag::FromCdf {
                kind: format!("{:?}", cnd.kind()),
            },
            Repr::Composite(parts) => FamilyTag::Composite {
                description: parts
                    .iter()
                    .map(|p| p.short_name())
                    .collect::<Vec<_>>()
                    .join(" ∘ "),
            },
            Repr::Custom { name, .. } => FamilyTag::Composite {
                description: name.clone(),
            },
        }
    }

    fn short_name(&self) -> String {
        match &self.repr {
            Repr::EpsDelta { eps, delta } => format!("f_{{{eps},{delta}}}"),
            Repr::Gdp { mu } => format!("G_{mu}"),
            Repr::Laplace { eps } => format!("L_{eps}"),
            Repr::Piecewise(p) => format!("PL[{} knots]", p.knots().len()),
            Repr::FromCdf(cnd) => format!("T({:?})", cnd.kind()),
            Repr::Composite(parts) => format!("({} parts)", parts.len()),
            Repr::Custom { name, .. } => name.clone(),
        }
    }

    /// Rebuilds a closed-form function from its tag. `FromCdf` and
    /// `Composite` tags carry no evaluator and are rejected.
    pub fn from_tag(tag: &FamilyTag) -> Result<Self> {
        match tag {
            FamilyTag::EpsDelta { eps, delta } => make_eps_delta(*eps, *delta),
            FamilyTag::Gdp { mu } => make_gdp(*mu),
            FamilyTag::LaplaceTf { eps } => make_laplace_tf(*eps),
            FamilyTag::PiecewiseLinear { knots } => {
                Ok(PiecewiseLinearTf::new(knots.clone())?.to_tradeoff())
            }
            other => Err(domain(format!("{other:?} cannot be rebuilt from JSON"))),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.family_tag()).expect("tag serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tag: FamilyTag =
            serde_json::from_str(s).map_err(|e| domain(format!("bad tradeoff JSON: {e}")))?;
        Self::from_tag(&tag)
    }

    /// Piecewise-linear representation, available for `f_{ε,δ}` and
    /// piecewise-linear functions.
    pub fn as_piecewise(&self) -> Option<PiecewiseLinearTf> {
        match &self.repr {
            Repr::EpsDelta { eps, delta } => PiecewiseLinearTf::from_eps_delta(*eps, *delta).ok(),
            Repr::Piecewise(p) => Some(p.clone()),
            Repr::Composite(parts) => {
                let mut acc = parts.last()?.as_piecewise()?;
                for p in parts.iter().rev().skip(1) {
                    acc = piecewise::compose_pl(&p.as_piecewise()?, &acc).ok()?;
                }
                Some(acc)
            }
            _ => None,
        }
    }

    pub(crate) fn from_piecewise(p: PiecewiseLinearTf) -> Self {
        let symmetric = p.is_symmetric();
        Self {
            repr: Repr::Piecewise(p),
            symmetric,
        }
    }

    fn is_identity_tag(&self) -> bool {
        matches!(
            self.repr,
            Repr::EpsDelta {
                eps: 0.0,
                delta: 0.0
            } | Repr::Gdp { mu: 0.0 }
        )
    }

    /// `true` if `f(α) < α - tol` somewhere on the validation grid.
    pub fn is_nontrivial(&self, tol: f64) -> bool {
        alpha_grid(VALIDATION_GRID)
            .into_iter()
            .any(|a| self.eval(a) < a - tol)
    }

    /// Evaluates `f` on `alphas`.
    pub fn tabulate(&self, alphas: &[f64]) -> Vec<f64> {
        alphas.iter().map(|&a| self.eval(a)).collect()
    }

    /// Measures the tradeoff-function axioms on the 1001-point grid plus
    /// 100 pseudo-random points.
    pub fn validation(&self) -> Validation {
        let mut pts = alpha_grid(VALIDATION_GRID);
        let mut rng = stream_rng(0x07ad_e0ff, 0);
        pts.extend((0..VALIDATION_RANDOM).map(|_| rng.random::<f64>()));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let vals = self.tabulate(&pts);

        let mut v = Validation::default();
        for (&a, &y) in pts.iter().zip(&vals) {
            v.max_above_identity = v.max_above_identity.max(y - a);
            if !(0.0..=1.0).contains(&y) || !y.is_finite() {
                v.out_of_range = true;
            }
        }
        for w in vals.windows(2) {
            v.max_decrease = v.max_decrease.max(w[0] - w[1]);
        }
        for i in 1..pts.len() - 1 {
            let (a, b, c) = (pts[i - 1], pts[i], pts[i + 1]);
            let lam = (c - b) / (c - a);
            let chord = lam * vals[i - 1] + (1.0 - lam) * vals[i + 1];
            v.max_convexity_violation = v.max_convexity_violation.max(vals[i] - chord);
        }
        v
    }

    /// Checks the axioms with the library tolerances (1e-12 for `f ≤ α`,
    /// 1e-10 for convexity and monotonicity).
    pub fn validate(&self) -> Result<()> {
        let v = self.validation();
        if v.out_of_range {
            return Err(domain("tradeoff function leaves [0,1]"));
        }
        if v.max_above_identity > 1e-12 {
            return Err(domain(format!(
                "f(α) exceeds α by {:e}",
                v.max_above_identity
            )));
        }
        if v.max_decrease > 1e-10 {
            return Err(domain(format!("f decreases by {:e}", v.max_decrease)));
        }
        if v.max_convexity_violation > 1e-10 {
            return Err(domain(format!(
                "f violates convexity by {:e}",
                v.max_convexity_violation
            )));
        }
        Ok(())
    }

    /// `sup_α |α - f(α)|`, located by ternary search on the concave map
    /// `α ↦ α - f(α)`.
    pub fn sup_gap(&self) -> f64 {
        let g = |a: f64| a - self.eval(a);
        let grid_best = alpha_grid(VALIDATION_GRID)
            .into_iter()
            .map(|a| (a, g(a)))
            .fold(
                (0.0, f64::NEG_INFINITY),
                |acc, x| if x.1 > acc.1 { x } else { acc },
            );
        let step = 1.0 / (VALIDATION_GRID - 1) as f64;
        let (mut lo, mut hi) = ((grid_best.0 - step).max(0.0), (grid_best.0 + step).min(1.0));
        for _ in 0..100 {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if g(m1) < g(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        grid_best.1.max(g(0.5 * (lo + hi)))
    }

    /// Largest `|f(α) - g(α)|` over `alphas`.
    pub fn max_abs_diff(&self, other: &TradeoffFunction, alphas: &[f64]) -> f64 {
        alphas
            .iter()
            .map(|&a| (self.eval(a) - other.eval(a)).abs())
            .fold(0.0, f64::max)
    }
}

fn eval_eps_delta(eps: f64, delta: f64, a: f64) -> f64 {
    let e = eps.exp();
    let steep = if a == 1.0 {
        1.0 - delta
    } else {
        1.0 - delta - e * (1.0 - a)
    };
    let flat = (-eps).exp() * (a - delta);
    0.0_f64.max(steep).max(flat).min(a)
}

/// Laplace(0,1) cdf.
pub(crate) fn laplace_unit_cdf(x: f64) -> f64 {
    if x < 0.0 {
        0.5 * x.exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

/// Laplace(0,1) quantile.
pub(crate) fn laplace_unit_quantile(p: f64) -> f64 {
    if p <= 0.5 {
        (2.0 * p).ln()
    } else {
        -(2.0 * (1.0 - p)).ln()
    }
}

/// `F(F⁻¹(α) - shift)` with endpoint conventions.
pub(crate) fn cnd_shift_tradeoff(cnd: &Cnd, alpha: f64, shift: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    if alpha >= 1.0 {
        return cnd.cdf_upper_limit_shifted(shift);
    }
    match cnd.quantile(alpha) {
        Ok(x) => cnd.cdf(x - shift),
        Err(_) => f64::NAN,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eps_delta_values() {
        let id = make_eps_delta(0.0, 0.0).unwrap();
        assert_eq!(id.eval(0.3), 0.3);

        let f = make_eps_delta(2f64.ln(), 0.0).unwrap();
        assert_abs_diff_eq!(f.eval(2.0 / 3.0), 1.0 / 3.0, epsilon = 1e-15);

        // Hand evaluation of the three branches at ε=1, δ=0.05, α=0.5:
        // 1-0.05-e+e/2 = -0.40914..., e^{-1}·0.45 = 0.1655457...
        let f = make_eps_delta(1.0, 0.05).unwrap();
        let e = std::f64::consts::E;
        let expected = (0.45_f64 / e).max(0.95 - e / 2.0).max(0.0);
        assert_abs_diff_eq!(expected, 0.165_545_748_527_149_05, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(0.5), expected, epsilon = 1e-15);
    }

    #[test]
    fn constructor_domains() {
        assert!(make_eps_delta(-0.1, 0.0).is_err());
        assert!(make_eps_delta(1.0, 1.1).is_err());
        assert!(make_eps_delta(1.0, -0.1).is_err());
        assert!(make_gdp(-1.0).is_err());
        assert!(make_laplace_tf(0.0).is_err());
        assert!(make_laplace_tf(-2.0).is_err());
    }

    #[test]
    fn gdp_values() {
        assert_abs_diff_eq!(make_gdp(0.0).unwrap().eval(0.7), 0.7, epsilon = 1e-15);
        let g = make_gdp(1.0).unwrap();
        assert_abs_diff_eq!(g.eval(0.5), 0.158_655_253_931_457, epsilon = 1e-12);
        // symmetric point: Φ⁻¹(α) = μ/2 gives Φ(-μ/2) = 1 - α
        for mu in [0.3, 1.0, 2.5] {
            let g = make_gdp(mu).unwrap();
            let a = phi(mu / 2.0);
            assert_abs_diff_eq!(g.eval(a), phi(-mu / 2.0), epsilon = 1e-14);
        }
    }

    #[test]
    fn laplace_values() {
        for eps in [0.2, 1.0, 3.0] {
            let l = make_laplace_tf(eps).unwrap();
            assert_abs_diff_eq!(l.eval(0.5), 0.5 * (-eps).exp(), epsilon = 1e-15);
            assert_eq!(l.eval(1.0), 1.0);
            let f = make_eps_delta(eps, 0.0).unwrap();
            for a in alpha_grid(1001) {
                assert!(l.eval(a) >= f.eval(a) - 1e-14);
            }
        }
    }

    #[test]
    fn families_validate() {
        for f in [
            make_eps_delta(1.0, 0.05).unwrap(),
            make_eps_delta(0.0, 0.3).unwrap(),
            make_gdp(1.5).unwrap(),
            make_laplace_tf(0.7).unwrap(),
            identity(),
        ] {
            f.validate().unwrap();
        }
    }

    #[test]
    fn composition_examples() {
        let grid = alpha_grid(1001);
        let g = make_gdp(0.8).unwrap();
        let c = compose(&identity(), &g).unwrap();
        assert!(c.max_abs_diff(&g, &grid) < 1e-15);

        let d = make_eps_delta(0.0, 0.1).unwrap();
        let dd = compose(&d, &d).unwrap();
        assert!(dd.max_abs_diff(&make_eps_delta(0.0, 0.2).unwrap(), &grid) < 1e-12);

        let e = compose(
            &make_eps_delta(0.4, 0.0).unwrap(),
            &make_eps_delta(0.9, 0.0).unwrap(),
        )
        .unwrap();
        // Equal to f_{1.3,0} while the inner map stays on its flat branch,
        // strictly above it between the two kinks.
        let f13 = make_eps_delta(1.3, 0.0).unwrap();
        let inner_kink = 0.9_f64.exp() / (1.0 + 0.9_f64.exp());
        for &a in &grid {
            if a <= inner_kink {
                assert_abs_diff_eq!(e.eval(a), f13.eval(a), epsilon = 1e-15);
            }
            assert!(e.eval(a) >= f13.eval(a) - 1e-15);
        }
        assert!(e.eval(0.75) > f13.eval(0.75) + 0.05);
    }

    #[test]
    fn self_composition_examples() {
        let grid = alpha_grid(1001);
        let d = make_eps_delta(0.0, 0.1).unwrap();
        assert!(self_compose(&d, 1).unwrap().max_abs_diff(&d, &grid) == 0.0);
        assert!(
            self_compose(&d, 2)
                .unwrap()
                .max_abs_diff(&make_eps_delta(0.0, 0.2).unwrap(), &grid)
                < 1e-12
        );
        let g = make_gdp(0.6).unwrap();
        for k in 2..5 {
            let gk = self_compose(&g, k).unwrap();
            assert!(gk.max_abs_diff(&make_gdp(0.6 * k as f64).unwrap(), &grid) < 1e-12);
        }
        assert!(self_compose(&g, 0).is_err());
    }

    #[test]
    fn fixed_points() {
        assert_eq!(fixed_point_c(&identity()).unwrap(), 0.5);
        for eps in [0.1, 1.0, 2f64.ln(), 5.0] {
            let c = fixed_point_c(&make_eps_delta(eps, 0.0).unwrap()).unwrap();
            assert_abs_diff_eq!(c, 1.0 / (1.0 + eps.exp()), epsilon = 1e-12);
        }
        for delta in [0.05, 0.2, 0.9] {
            let c = fixed_point_c(&make_eps_delta(0.0, delta).unwrap()).unwrap();
            assert_abs_diff_eq!(c, (1.0 - delta) / 2.0, epsilon = 1e-12);
        }
        let g = make_gdp(1.0).unwrap();
        let c = fixed_point_c(&g).unwrap();
        assert!((g.eval(1.0 - c) - c).abs() <= 1e-12);
        assert_abs_diff_eq!(c, phi(-0.5), epsilon = 1e-12);
    }

    #[test]
    fn tensor_whitelist() {
        let grid = alpha_grid(201);
        let g1 = make_gdp(1.0).unwrap();
        let t = tensor_closed_form(&g1, &g1).unwrap();
        assert_eq!(t.family_tag(), FamilyTag::Gdp { mu: 2f64.sqrt() });

        let d = make_eps_delta(0.0, 0.1).unwrap();
        let t = tensor_closed_form(&d, &d).unwrap();
        assert!(t.max_abs_diff(&make_eps_delta(0.0, 0.19).unwrap(), &grid) < 1e-15);

        let f = make_eps_delta(1.0, 0.0).unwrap();
        let t = tensor_closed_form(&f, &make_eps_delta(0.0, 0.05).unwrap()).unwrap();
        assert_eq!(
            t.family_tag(),
            FamilyTag::EpsDelta {
                eps: 1.0,
                delta: 0.05
            }
        );
        let t = tensor_closed_form(&f, &identity()).unwrap();
        assert_eq!(t.family_tag(), f.family_tag());

        // Associativity: f_{1,0.05} ⊗ f_{0,0.1} = f_{1, 1-0.95·0.9}.
        let t = tensor_closed_form(
            &make_eps_delta(0.0, 0.1).unwrap(),
            &make_eps_delta(1.0, 0.05).unwrap(),
        )
        .unwrap();
        assert!(t.max_abs_diff(&make_eps_delta(1.0, 0.145).unwrap(), &grid) < 1e-15);

        assert!(tensor_closed_form(&make_laplace_tf(1.0).unwrap(), &g1).is_none());
        assert!(tensor_closed_form(&f, &f).is_none());
    }

    #[test]
    fn json_round_trip() {
        for f in [
            make_eps_delta(1.0, 0.05).unwrap(),
            make_gdp(2.0).unwrap(),
            make_laplace_tf(0.5).unwrap(),
        ] {
            let back = TradeoffFunction::from_json(&f.to_json()).unwrap();
            assert_eq!(back.family_tag(), f.family_tag());
        }
        let json = make_eps_delta(1.0, 0.0).unwrap().to_json();
        assert_eq!(
            json,
            r#"{"family_tag":"EpsDelta","params":{"eps":1.0,"delta":0.0}}"#
        );
    }

    #[test]
    fn inverse_matches_bisection() {
        for f in [
            make_eps_delta(1.0, 0.05).unwrap(),
            make_gdp(1.3).unwrap(),
            make_laplace_tf(0.7).unwrap(),
        ] {
            for i in 1..100 {
                let b = i as f64 / 100.0 * f.eval(1.0);
                let a = f.inverse(b).unwrap();
                assert_abs_diff_eq!(a, f.inverse_bisect(b), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn sup_gap_matches_closed_forms() {
        let g = make_gdp(0.5).unwrap();
        assert_abs_diff_eq!(g.sup_gap(), 2.0 * phi(0.25) - 1.0, epsilon = 1e-12);
        let d = make_eps_delta(0.0, 0.3).unwrap();
        assert_abs_diff_eq!(d.sup_gap(), 0.3, epsilon = 1e-12);
    }
}
