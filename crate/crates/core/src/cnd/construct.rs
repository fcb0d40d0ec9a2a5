// SPDX-License-Identifier: Apache-2.0

use super::Cnd;
use crate::error::{precondition, CndError, Result};
use crate::tradeoff::{fixed_point_c, TradeoffFunction};

/// Largest number of recursion steps a single cdf or quantile evaluation may
/// take.
pub const MAX_RECURSION_DEPTH: u64 = 1_000_000;

/// Threshold below which `f` counts as vanishing on an interval `[0, a₀]`.
const ZERO_REGION_MIN: f64 = 1e-12;

/// Cdf state of the recursion construction.
#[derive(Clone, Debug)]
pub(crate) struct Constructed {
    f: TradeoffFunction,
    c: f64,
    /// `sup{x : F(x) < 1}`.
    upper: f64,
}

/// Builds the canonical CND of a symmetric nontrivial tradeoff function.
///
/// On `[-1/2, 1/2]` the cdf interpolates linearly from `c` to `1-c`, where
/// `f(1-c) = c`. Left of that interval `F(x) = f(F(x+1))`; right of it the
/// cdf is the reflection `1 - F(-x)`, which equals `1 - f(1 - F(x-1))` for a
/// symmetric `f` and keeps the upper tail accurate.
pub fn construct_cnd(f: &TradeoffFunction) -> Result<Cnd> {
    if !f.is_symmetric() {
        return Err(precondition(
            "construct_cnd needs a symmetric tradeoff function",
        ));
    }
    let c = fixed_point_c(f)?;
    if c >= 0.5 - 1e-12 {
        return Err(precondition(
            "tradeoff function is trivial (f(1/2) = 1/2), no CND exists",
        ));
    }
    let mut out = Constructed {
        f: f.clone(),
        c,
        upper: f64::INFINITY,
    };
    out.upper = out.find_upper()?;
    Ok(Cnd::from_constructed(out, f.clone()))
}

impl Constructed {
    fn base(&self, x: f64) -> f64 {
        self.c + (1.0 - 2.0 * self.c) * (x + 0.5)
    }

    /// `F(x)` for `x ≤ -1/2` via `n = ⌈-x - 1/2⌉` applications of `f`.
    fn lower(&self, x: f64) -> Result<f64> {
        if x < -self.upper {
            return Ok(0.0);
        }
        let steps = (-x - 0.5).ceil().max(0.0);
        let x0 = (x + steps).clamp(-0.5, 0.5);
        let mut v = self.base(x0);
        let mut done = 0.0;
        while done < steps {
            if v == 0.0 {
                return Ok(0.0);
            }
            if done >= MAX_RECURSION_DEPTH as f64 {
                return Err(CndError::RecursionDepth {
                    depth: steps as u64,
                    limit: MAX_RECURSION_DEPTH,
                });
            }
            v = self.f.eval(v).clamp(0.0, 1.0);
            done += 1.0;
        }
        Ok(v)
    }

    pub(crate) fn cdf(&self, x: f64) -> Result<f64> {
        if x.abs() <= 0.5 {
            Ok(self.base(x))
        } else if x < 0.0 {
            self.lower(x)
        } else {
            Ok(1.0 - self.lower(-x)?)
        }
    }

    /// Inverts the recursion: `F(x+1) = f⁻¹(F(x))` lifts a lower-tail
    /// probability into the base interval, which is inverted linearly.
    pub(crate) fn quantile(&self, alpha: f64) -> Result<f64> {
        if alpha > 0.5 {
            return Ok(-self.quantile_lower(1.0 - alpha)?);
        }
        self.quantile_lower(alpha)
    }

    fn quantile_lower(&self, p: f64) -> Result<f64> {
        let mut v = p;
        let mut steps: u64 = 0;
        while v < self.c {
            if steps >= MAX_RECURSION_DEPTH {
                return Err(CndError::RecursionDepth {
                    depth: steps,
                    limit: MAX_RECURSION_DEPTH,
                });
            }
            v = self.f.inverse(v).ok_or_else(|| {
                CndError::Convergence(format!("f⁻¹ undefined at {v} while inverting the cdf"))
            })?;
            steps += 1;
        }
        let x0 = (v - self.c) / (1.0 - 2.0 * self.c) - 0.5;
        Ok(x0.min(0.5) - steps as f64)
    }

    /// Density on the open base interval `(-1/2, 1/2)`.
    pub(crate) fn base_density(&self) -> f64 {
        1.0 - 2.0 * self.c
    }

    pub(crate) fn support_upper(&self) -> f64 {
        self.upper
    }

    /// `sup{x : F(x) < 1}`, finite iff `f` vanishes on some `[0, a₀]` with
    /// `a₀ > 0`.
    fn find_upper(&self) -> Result<f64> {
        if self.f.eval(ZERO_REGION_MIN) > 0.0 {
            return Ok(f64::INFINITY);
        }
        // F(-1/2 - n) = f^{∘n}(c); find the first n where it vanishes.
        let mut v = self.c;
        let mut n: u64 = 0;
        while v > 0.0 {
            if n >= MAX_RECURSION_DEPTH {
                return Ok(f64::INFINITY);
            }
            v = self.f.eval(v);
            n += 1;
        }
        // Lower support end lies in (-1/2 - n, -1/2 - n + 1].
        let probe = Constructed {
            upper: f64::INFINITY,
            ..self.clone()
        };
        let (mut lo, mut hi) = (-0.5 - n as f64, 0.5 - n as f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if probe.cdf(mid)? > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(-lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnd::tulap;
    use crate::special::phi_inv;
    use crate::tradeoff::{from_cnd_cdf, identity, make_eps_delta, make_gdp, make_laplace_tf};
    use approx::assert_abs_diff_eq;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn pure_dp_construction_is_tulap() {
        for eps in [0.5, 1.0, 5.0] {
            let f = make_eps_delta(eps, 0.0).unwrap();
            let built = construct_cnd(&f).unwrap();
            let t = tulap(eps).unwrap();
            for x in grid(-6.0, 6.0, 2001) {
                assert_abs_diff_eq!(built.cdf(x), t.cdf(x), epsilon = 1e-9);
            }
            let g0 = (eps.exp() - 1.0) / (eps.exp() + 1.0);
            for x in grid(-0.49, 0.49, 99) {
                assert_abs_diff_eq!(built.density(x), g0, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn median_and_base_interval() {
        let g = make_gdp(1.0).unwrap();
        let built = construct_cnd(&g).unwrap();
        assert_eq!(built.cdf(0.0), 0.5);
        // Oracle: bisection on the Gaussian closed form Φ(Φ⁻¹(1-c)-1) = c.
        let (mut lo, mut hi) = (0.0_f64, 0.5_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let r = crate::special::phi(phi_inv(1.0 - mid) - 1.0) - mid;
            if r > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert_abs_diff_eq!(built.cdf(0.5), 1.0 - 0.5 * (lo + hi), epsilon = 1e-12);
    }

    #[test]
    fn recurrence_and_induced_tradeoff() {
        for f in [
            make_gdp(1.0).unwrap(),
            make_laplace_tf(0.7).unwrap(),
            make_eps_delta(1.0, 0.1).unwrap(),
            make_eps_delta(0.0, 0.3).unwrap(),
        ] {
            let cnd = construct_cnd(&f).unwrap();
            for x in grid(-8.0, 8.0, 1601) {
                let up = cnd.cdf(x + 1.0);
                if up < 1.0 {
                    assert_abs_diff_eq!(cnd.cdf(x), f.eval(up), epsilon = 1e-12);
                }
                let down = cnd.cdf(x - 1.0);
                if down > 0.0 {
                    assert_abs_diff_eq!(cnd.cdf(x), 1.0 - f.eval(1.0 - down), epsilon = 1e-12);
                }
            }
            let induced = from_cnd_cdf(&cnd);
            for a in crate::tradeoff::alpha_grid(1001) {
                assert_abs_diff_eq!(induced.eval(a), f.eval(a), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn quantile_matches_bisection() {
        for f in [make_gdp(1.0).unwrap(), make_eps_delta(1.0, 0.1).unwrap()] {
            let cnd = construct_cnd(&f).unwrap();
            for a in [1e-10, 1e-4, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let q = cnd.quantile(a).unwrap();
                assert_abs_diff_eq!(q, cnd.quantile_by_bisection(a).unwrap(), epsilon = 1e-8);
                assert_abs_diff_eq!(cnd.cdf(q), a, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn bounded_support_for_zero_delta() {
        // For f_{0,δ}, F(x) = max(0, F(x+1) - δ), so the base line
        // F(x) = c + δ(x + 1/2) with c = (1-δ)/2 continues until it hits 0.
        let cnd = construct_cnd(&make_eps_delta(0.0, 0.3).unwrap()).unwrap();
        let lower_end = -0.5 - 0.35 / 0.3;
        assert_abs_diff_eq!(cnd.support_upper(), -lower_end, epsilon = 1e-10);
        assert_eq!(cnd.cdf(lower_end - 0.01), 0.0);
        assert_eq!(cnd.cdf(-lower_end + 0.01), 1.0);
    }

    #[test]
    fn rejects_trivial_and_asymmetric() {
        assert!(matches!(
            construct_cnd(&identity()),
            Err(CndError::Precondition(_))
        ));
        let asym = TradeoffFunction::custom("asym", false, |a| a * a).unwrap();
        assert!(matches!(
            construct_cnd(&asym),
            Err(CndError::Precondition(_))
        ));
    }

    #[test]
    fn depth_limit_reported() {
        // L_ε with tiny ε decays slowly enough that 2·10⁶ steps stay positive.
        let f = make_laplace_tf(1e-9).unwrap();
        let cnd = construct_cnd(&f).unwrap();
        assert!(matches!(
            cnd.try_cdf(-2.0e6),
            Err(CndError::RecursionDepth { .. })
        ));
        assert!(cnd.cdf(-2.0e6).is_nan());
    }
}
