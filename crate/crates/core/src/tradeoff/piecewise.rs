// SPDX-License-Identifier: Apache-2.0

//! Piecewise-linear tradeoff functions and breakpoint analysis.
//!
//! Composition of piecewise-linear tradeoff functions can only add
//! breakpoints: the breakpoints of `f ∘ g` are `g⁻¹(B_f) ∪ B_g`. When `f` is
//! strictly positive on `(0,1]`, `g^{∘n}` has at least `k + n - 1`
//! breakpoints whenever `g` has `k ≥ 1`, which bounds how often `f` can be
//! divided.

use serde::Serialize;

use super::TradeoffFunction;
use crate::error::{domain, Result};

const SLOPE_TOL: f64 = 1e-12;

/// Convex piecewise-linear tradeoff function given by its knots.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinearTf {
    knots: Vec<(f64, f64)>,
    slopes: Vec<f64>,
}

impl PiecewiseLinearTf {
    /// Builds the function from knots `(α_i, f(α_i))`. Knots are sorted,
    /// duplicates and collinear interior knots are dropped, and the result
    /// is checked for convexity, monotonicity and `f(α) ≤ α`.
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
            return Err(domain("knots must be finite"));
        }
        knots.sort_by(|x, y| x.0.total_cmp(&y.0));
        knots.dedup_by(|x, y| (x.0 - y.0).abs() <= 1e-15);
        if knots.len() < 2 || knots[0].0 != 0.0 || knots[knots.len() - 1].0 != 1.0 {
            return Err(domain("knots must include α = 0 and α = 1"));
        }
        let knots = simplify(knots);
        let slopes: Vec<f64> = knots
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect();
        for w in slopes.windows(2) {
            if w[1] < w[0] - 1e-9 * w[0].abs().max(1.0) {
                return Err(domain("slopes must be non-decreasing (convexity)"));
            }
        }
        if slopes[0] < -1e-12 {
            return Err(domain("tradeoff function must be non-decreasing"));
        }
        for &(a, b) in &knots {
            if b > a + 1e-12 || b < -1e-12 {
                return Err(domain(format!("knot ({a}, {b}) violates 0 ≤ f(α) ≤ α")));
            }
        }
        Ok(Self { knots, slopes })
    }

    /// Knots of `f_{ε,δ}`: `α = 0, 1`, the kink at `δ` where the flat branch
    /// starts and the crossing of the two sloped branches.
    pub fn from_eps_delta(eps: f64, delta: f64) -> Result<Self> {
        let f = super::make_eps_delta(eps, delta)?;
        let e = eps.exp();
        let mut cand = vec![0.0, 1.0, delta];
        if eps > 0.0 {
            cand.push((e - 1.0 + delta * (1.0 - 1.0 / e)) / (e - 1.0 / e));
        }
        let knots = cand
            .into_iter()
            .filter(|a| (0.0..=1.0).contains(a))
            .map(|a| (a, f.eval(a)))
            .collect();
        Self::new(knots)
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        let a = alpha.clamp(0.0, 1.0);
        let i = self.knots.partition_point(|k| k.0 <= a);
        if i == 0 {
            return self.knots[0].1;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].1;
        }
        let (x0, y0) = self.knots[i - 1];
        y0 + self.slopes[i - 1] * (a - x0)
    }

    /// Smallest `α` with `f(α) = β`, if attained.
    pub fn inverse(&self, beta: f64) -> Option<f64> {
        if beta < self.knots[0].1 || beta > self.knots[self.knots.len() - 1].1 {
            return None;
        }
        let i = self.knots.partition_point(|k| k.1 < beta);
        if i == 0 {
            return Some(self.knots[0].0);
        }
        let (x0, y0) = self.knots[i - 1];
        let s = self.slopes[i - 1];
        Some(if s > 0.0 { x0 + (beta - y0) / s } else { x0 })
    }

    /// Interior knots where the slope strictly increases.
    pub fn breakpoint_locations(&self) -> Vec<f64> {
        self.slopes
            .windows(2)
            .zip(&self.knots[1..])
            .filter(|(w, _)| w[1] > w[0] + SLOPE_TOL * w[0].abs().max(1.0))
            .map(|(_, k)| k.0)
            .collect()
    }

    /// `f = T(P,Q)` is symmetric when its graph is invariant under the
    /// reflection `(α, β) ↦ (1-β, 1-α)`, which maps it to `T(Q,P)`. Knots on
    /// the flat stretch `β = 0` reflect onto the vertical segment at `α = 1`.
    pub fn is_symmetric(&self) -> bool {
        self.knots.iter().all(|&(a, b)| {
            if b <= 0.0 {
                return true;
            }
            (self.eval(1.0 - b) - (1.0 - a)).abs() <= 1e-9
        })
    }

    pub fn to_tradeoff(&self) -> TradeoffFunction {
        TradeoffFunction::from_piecewise(self.clone())
    }
}

/// Removes interior knots that lie on the segment joining their neighbours.
fn simplify(knots: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(knots.len());
    for k in knots {
        while out.len() >= 2 {
            let (a, b) = (out[out.len() - 2], out[out.len() - 1]);
            let s1 = (b.1 - a.1) / (b.0 - a.0);
            let s2 = (k.1 - b.1) / (k.0 - b.0);
            if (s2 - s1).abs() <= SLOPE_TOL * s1.abs().max(1.0) {
                out.pop();
            } else {
                break;
            }
        }
        out.push(k);
    }
    out
}

/// Exact composition `f ∘ g` of piecewise-linear functions.
pub(crate) fn compose_pl(
    f: &PiecewiseLinearTf,
    g: &PiecewiseLinearTf,
) -> Result<PiecewiseLinearTf> {
    let mut cand: Vec<f64> = g.knots.iter().map(|k| k.0).collect();
    for &(a, _) in &f.knots {
        if let Some(x) = g.inverse(a) {
            cand.push(x);
        }
    }
    let knots = cand
        .into_iter()
        .filter(|a| (0.0..=1.0).contains(a))
        .map(|a| (a, f.eval(g.eval(a))))
        .collect();
    PiecewiseLinearTf::new(knots)
}

/// Number of breakpoints of a piecewise-linear tradeoff function.
pub fn breakpoints(f: &PiecewiseLinearTf) -> usize {
    f.breakpoint_locations().len()
}

/// Why no verdict could be reached.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum UnknownReason {
    /// `f(x) = 0` for some `x > 0`: the breakpoint bound does not apply.
    ZeroBeyondOrigin,
    /// `f` is linear, so there are no breakpoints to count.
    NoBreakpoints,
    /// `n ≤ k`: the breakpoint count gives no obstruction.
    BelowBound { breakpoints: usize },
}

impl UnknownReason {
    pub fn describe(&self) -> String {
        match self {
            Self::ZeroBeyondOrigin => "hypothesis f(x)=0⟹x=0 violated".to_string(),
            Self::NoBreakpoints => "f has no breakpoints".to_string(),
            Self::BelowBound { breakpoints } => {
                format!("n ≤ k = {breakpoints}: no obstruction from breakpoint counting")
            }
        }
    }
}

/// Outcome of [`decide_nth_root_exists`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum RootVerdict {
    /// No tradeoff function `g` has `g^{∘n} = f`.
    Impossible,
    Unknown(UnknownReason),
}

/// Decides whether `f = g^{∘n}` is ruled out by breakpoint counting.
///
/// For `f` nontrivial with `k ≥ 1` breakpoints and `f(x) = 0 ⟹ x = 0`, no
/// `g` satisfies `g^{∘n} = f` once `n ≥ k + 1`. Nothing is claimed for
/// smaller `n`.
pub fn decide_nth_root_exists(f: &PiecewiseLinearTf, n: u32) -> RootVerdict {
    // f(0) = 0 for every tradeoff function, so positivity on (0,1] is a
    // positive first slope.
    if f.slopes[0] <= 0.0 {
        return RootVerdict::Unknown(UnknownReason::ZeroBeyondOrigin);
    }
    let k = breakpoints(f);
    if k == 0 {
        return RootVerdict::Unknown(UnknownReason::NoBreakpoints);
    }
    if n as usize > k {
        RootVerdict::Impossible
    } else {
        RootVerdict::Unknown(UnknownReason::BelowBound { breakpoints: k })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tradeoff::{alpha_grid, fixed_point_c, make_eps_delta};
    use approx::assert_abs_diff_eq;

    fn eps0(eps: f64) -> PiecewiseLinearTf {
        PiecewiseLinearTf::from_eps_delta(eps, 0.0).unwrap()
    }

    #[test]
    fn matches_closed_form() {
        for (eps, delta) in [(1.0, 0.0), (0.0, 0.2), (1.0, 0.05), (3.0, 0.4)] {
            let pl = PiecewiseLinearTf::from_eps_delta(eps, delta).unwrap();
            let f = make_eps_delta(eps, delta).unwrap();
            for a in alpha_grid(1001) {
                assert_abs_diff_eq!(pl.eval(a), f.eval(a), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn pure_dp_has_one_breakpoint_at_one_minus_c() {
        for eps in [0.5, 1.0, 4.0] {
            let pl = eps0(eps);
            let locs = pl.breakpoint_locations();
            assert_eq!(locs.len(), 1);
            let c = fixed_point_c(&make_eps_delta(eps, 0.0).unwrap()).unwrap();
            assert_abs_diff_eq!(locs[0], 1.0 - c, epsilon = 1e-12);
            assert!(pl.is_symmetric());
        }
    }

    #[test]
    fn identity_has_no_breakpoints() {
        let id = PiecewiseLinearTf::new(vec![(0.0, 0.0), (0.5, 0.5), (1.0, 1.0)]).unwrap();
        assert_eq!(breakpoints(&id), 0);
        assert_eq!(id.knots().len(), 2);
    }

    #[test]
    fn composed_pure_dp_has_two_breakpoints() {
        // Union formula: B_{f∘g} = g⁻¹(B_f) ∪ B_g with f = g = f_{1,0}. The
        // single breakpoint 1-c of f pulls back to g⁻¹(1-c), which differs
        // from 1-c because g(1-c) = c < 1-c.
        let f = eps0(1.0);
        let b = f.breakpoint_locations()[0];
        let pulled = f.inverse(b).unwrap();
        let mut expected = vec![b, pulled];
        expected.sort_by(f64::total_cmp);
        expected.dedup();
        assert_eq!(expected.len(), 2);

        let ff = compose_pl(&f, &f).unwrap();
        let locs = ff.breakpoint_locations();
        assert_eq!(locs.len(), 2);
        for (x, y) in locs.iter().zip(&expected) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        // the knot-level composition agrees with pointwise composition
        let tf = make_eps_delta(1.0, 0.0).unwrap();
        for a in alpha_grid(501) {
            assert_abs_diff_eq!(ff.eval(a), tf.eval(tf.eval(a)), epsilon = 1e-14);
        }
    }

    #[test]
    fn nth_root_verdicts() {
        assert_eq!(
            decide_nth_root_exists(&eps0(1.0), 2),
            RootVerdict::Impossible
        );
        assert_eq!(
            decide_nth_root_exists(&eps0(1.0), 1),
            RootVerdict::Unknown(UnknownReason::BelowBound { breakpoints: 1 })
        );

        // three breakpoints: f_{ε,0} composed three times... use a direct knot list
        let f3 = PiecewiseLinearTf::new(vec![
            (0.0, 0.0),
            (0.4, 0.1),
            (0.6, 0.2),
            (0.8, 0.4),
            (1.0, 1.0),
        ])
        .unwrap();
        assert_eq!(breakpoints(&f3), 3);
        assert_eq!(decide_nth_root_exists(&f3, 4), RootVerdict::Impossible);
        assert!(matches!(
            decide_nth_root_exists(&f3, 3),
            RootVerdict::Unknown(_)
        ));

        let zd = PiecewiseLinearTf::from_eps_delta(0.0, 0.2).unwrap();
        let v = decide_nth_root_exists(&zd, 5);
        assert_eq!(v, RootVerdict::Unknown(UnknownReason::ZeroBeyondOrigin));
        if let RootVerdict::Unknown(r) = v {
            assert_eq!(r.describe(), "hypothesis f(x)=0⟹x=0 violated");
        }
    }

    #[test]
    fn rejects_invalid_knots() {
        assert!(PiecewiseLinearTf::new(vec![(0.0, 0.0), (0.5, 0.4), (1.0, 0.5)]).is_err());
        assert!(PiecewiseLinearTf::new(vec![(0.0, 0.0), (0.5, 0.6), (1.0, 1.0)]).is_err());
        assert!(PiecewiseLinearTf::new(vec![(0.1, 0.0), (1.0, 1.0)]).is_err());
    }
}
