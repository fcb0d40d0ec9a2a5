// SPDX-License-Identifier: Apache-2.0

//! Numerical tensor products through privacy-loss distributions.
//!
//! For a noise distribution with density `g` the privacy loss of the test
//! `N` vs `N+1` is `ℓ(x) = log g(x-1) - log g(x)`, non-decreasing in `x` for
//! a CND. Its law under both hypotheses determines the tradeoff function,
//! and losses of independent coordinates add, so `f ⊗ g` is obtained by
//! convolving the two discretized loss laws.

use super::{PiecewiseLinearTf, TradeoffFunction};
use crate::cnd::Cnd;
use crate::error::{domain, CndError, Result};
use crate::verify::{lower_hull, EmpiricalTradeoff, EstimateMethod};

/// Probability mass ignored at each end of a distribution when locating the
/// finite loss range.
pub const TAIL_MASS: f64 = 1e-12;
/// Largest acceptable error bound of a PLD tensor product.
pub const MAX_PLD_ERROR: f64 = 0.05;
/// Smallest accepted grid size.
pub const MIN_GRID_SIZE: usize = 1000;

const BISECTION_STEPS: usize = 100;
const LOSS_SCAN_POINTS: usize = 20_001;

/// Discretized joint law of the privacy loss under the null (`p`) and the
/// alternative (`q`).
///
/// Finite bin `k` holds the losses in `[(offset+k)h, (offset+k+1)h)`. The
/// atoms at `±∞` are kept separately. Masses are exact cdf differences;
/// only the grouping of losses is approximate.
#[derive(Clone, Debug, PartialEq)]
pub struct PrivacyLossDistribution {
    h: f64,
    offset: i64,
    p: Vec<f64>,
    q: Vec<f64>,
    p_neg_inf: f64,
    q_neg_inf: f64,
    p_pos_inf: f64,
    q_pos_inf: f64,
    /// Width of the loss range merged into one bin.
    spread: f64,
    /// Mass moved into end bins from outside the grid.
    tail: f64,
}

impl PrivacyLossDistribution {
    /// Loss law of a mechanism with identical null and alternative.
    pub fn identity(h: f64) -> Self {
        Self {
            h,
            offset: 0,
            p: vec![1.0],
            q: vec![1.0],
            p_neg_inf: 0.0,
            q_neg_inf: 0.0,
            p_pos_inf: 0.0,
            q_pos_inf: 0.0,
            spread: 0.0,
            tail: 0.0,
        }
    }

    /// Discretizes the loss of `cnd` on the grid `[-half_bins·h, half_bins·h)`.
    pub fn from_cnd(cnd: &Cnd, h: f64, half_bins: usize) -> Result<Self> {
        let range = LossRange::of(cnd)?;
        let loss = |x: f64| loss_at(cnd, x);
        // x-boundary of {ℓ ≥ e} for each grid edge e
        let first_edge = -(half_bins as i64);
        let n_bins = 2 * half_bins;
        let mut edges_x = Vec::with_capacity(n_bins + 1);
        let mut last = range.lo;
        for j in 0..=n_bins {
            let e = (first_edge + j as i64) as f64 * h;
            let x = first_at_least(&loss, e, range.lo, range.hi)?.max(last);
            edges_x.push(x);
            last = x;
        }
        let mass_p = |a: f64, b: f64| (cnd.cdf(b) - cnd.cdf(a)).max(0.0);
        let mass_q = |a: f64, b: f64| (cnd.cdf(b - 1.0) - cnd.cdf(a - 1.0)).max(0.0);

        let (x_neg, x_pos) = (range.finite_lo, range.finite_hi);
        let mut p: Vec<f64> = edges_x.windows(2).map(|w| mass_p(w[0], w[1])).collect();
        let mut q: Vec<f64> = edges_x.windows(2).map(|w| mass_q(w[0], w[1])).collect();
        let (x0, xn) = (edges_x[0].max(x_neg), edges_x[n_bins].min(x_pos));
        let low = (mass_p(x_neg, x0), mass_q(x_neg, x0));
        let high = (mass_p(xn, x_pos), mass_q(xn, x_pos));
        p[0] += low.0;
        q[0] += low.1;
        p[n_bins - 1] += high.0;
        q[n_bins - 1] += high.1;
        Ok(Self {
            h,
            offset: first_edge,
            p,
            q,
            p_neg_inf: cnd.cdf(x_neg),
            q_neg_inf: cnd.cdf(x_neg - 1.0),
            p_pos_inf: 1.0 - cnd.cdf(x_pos),
            q_pos_inf: 1.0 - cnd.cdf(x_pos - 1.0),
            spread: h,
            tail: low.0.max(low.1) + high.0.max(high.1),
        })
    }

    /// Loss law of the pair of independent mechanisms.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if (self.h - other.h).abs() > 1e-15 * self.h.max(other.h) {
            return Err(domain("convolved loss grids must share the bin width"));
        }
        let n = self.p.len() + other.p.len() - 1;
        let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
        for (i, (&pa, &qa)) in self.p.iter().zip(&self.q).enumerate() {
            if pa == 0.0 && qa == 0.0 {
                continue;
            }
            for (j, (&pb, &qb)) in other.p.iter().zip(&other.q).enumerate() {
                p[i + j] += pa * pb;
                q[i + j] += qa * qb;
            }
        }
        let (pf_a, qf_a) = (self.p.iter().sum::<f64>(), self.q.iter().sum::<f64>());
        let (pf_b, qf_b) = (other.p.iter().sum::<f64>(), other.q.iter().sum::<f64>());
        // -∞ needs a -∞ component and no +∞ component; pairs with both
        // signs carry no mass under either hypothesis and go to the tail.
        let neg = |na: f64, fa: f64, nb: f64, fb: f64| na * (nb + fb) + fa * nb;
        let mixed = |a: &Self, b: &Self, pq: bool| {
            if pq {
                a.p_neg_inf * b.p_pos_inf + a.p_pos_inf * b.p_neg_inf
            } else {
                a.q_neg_inf * b.q_pos_inf + a.q_pos_inf * b.q_neg_inf
            }
        };
        Ok(Self {
            h: self.h,
            offset: self.offset + other.offset,
            p,
            q,
            p_neg_inf: neg(self.p_neg_inf, pf_a, other.p_neg_inf, pf_b),
            q_neg_inf: neg(self.q_neg_inf, qf_a, other.q_neg_inf, qf_b),
            p_pos_inf: neg(self.p_pos_inf, pf_a, other.p_pos_inf, pf_b),
            q_pos_inf: neg(self.q_pos_inf, qf_a, other.q_pos_inf, qf_b),
            spread: self.spread + other.spread,
            tail: self.tail + other.tail + mixed(self, other, true).max(mixed(self, other, false)),
        })
    }

    /// Upper bound on `sup_α |f_true(α) - f_pld(α)|`: merging losses that
    /// differ by at most `w` moves the curve by at most `1 - e^{-w}`, plus
    /// the clipped tail mass.
    pub fn error_bound(&self) -> f64 {
        -(-self.spread).exp_m1() + self.tail
    }

    /// ROC vertices `(α, β)` of the likelihood-ratio test, accepting the
    /// null on the lowest losses first.
    pub fn vertices(&self) -> Vec<(f64, f64)> {
        let groups = std::iter::once((self.p_neg_inf, self.q_neg_inf))
            .chain(self.p.iter().copied().zip(self.q.iter().copied()))
            .chain(std::iter::once((self.p_pos_inf, self.q_pos_inf)));
        let mut cum = vec![(0.0, 0.0)];
        let (mut a, mut b) = (0.0, 0.0);
        for (dp, dq) in groups {
            if dp == 0.0 && dq == 0.0 {
                continue;
            }
            a += dp;
            b += dq;
            cum.push((a, b));
        }
        // Normalizing by the running totals makes a group with no null mass
        // a vertical segment exactly.
        cum.iter()
            .map(|&(x, y)| ((x / a).min(1.0), (y / b).min(1.0)))
            .collect()
    }

    /// Piecewise-linear tradeoff function traced by the grouped test.
    pub fn to_tradeoff(&self) -> Result<TradeoffFunction> {
        let hull = lower_hull(&self.vertices());
        Ok(PiecewiseLinearTf::new(hull)?.to_tradeoff())
    }

    pub fn bin_width(&self) -> f64 {
        self.h
    }
}

/// Bisection domain for the loss and the points where it leaves `±∞`.
struct LossRange {
    lo: f64,
    hi: f64,
    /// `inf{x : ℓ(x) > -∞}` (or `lo`).
    finite_lo: f64,
    /// `sup{x : ℓ(x) < +∞}` (or `hi`).
    finite_hi: f64,
    max_abs_finite: f64,
}

impl LossRange {
    fn of(cnd: &Cnd) -> Result<Self> {
        let lo = cnd.quantile(TAIL_MASS)?;
        let hi = cnd.quantile(1.0 - TAIL_MASS)? + 1.0;
        let loss = |x: f64| loss_at(cnd, x);
        let finite_lo = if loss(lo)? == f64::NEG_INFINITY {
            first_at_least(&loss, f64::MIN, lo, hi)?
        } else {
            f64::NEG_INFINITY
        };
        let finite_hi = if loss(hi)? == f64::INFINITY {
            first_at_least(&loss, f64::INFINITY, lo, hi)?
        } else {
            f64::INFINITY
        };
        let mut max_abs_finite: f64 = 0.0;
        for i in 0..LOSS_SCAN_POINTS {
            let x = lo + (hi - lo) * i as f64 / (LOSS_SCAN_POINTS - 1) as f64;
            let l = loss(x)?;
            if l.is_finite() {
                max_abs_finite = max_abs_finite.max(l.abs());
            }
        }
        Ok(Self {
            lo,
            hi,
            finite_lo,
            finite_hi,
            max_abs_finite,
        })
    }
}

fn loss_at(cnd: &Cnd, x: f64) -> Result<f64> {
    let (lq, lp) = (cnd.log_density(x - 1.0), cnd.log_density(x));
    if lq.is_nan() || lp.is_nan() {
        return Err(CndError::Density(format!(
            "log density is NaN near x = {x}"
        )));
    }
    Ok(match (lq == f64::NEG_INFINITY, lp == f64::NEG_INFINITY) {
        (true, true) if x < 0.5 => f64::NEG_INFINITY,
        (true, true) => f64::INFINITY,
        (true, false) => f64::NEG_INFINITY,
        _ => lq - lp,
    })
}

/// `inf{x ∈ [lo, hi] : loss(x) ≥ level}` for a non-decreasing loss.
fn first_at_least<L: Fn(f64) -> Result<f64>>(
    loss: &L,
    level: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if loss(lo)? >= level {
        return Ok(lo);
    }
    if loss(hi)? < level {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..BISECTION_STEPS {
        let m = 0.5 * (a + b);
        if loss(m)? >= level {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(b)
}

/// Numerical `f ⊗ g` for the tradeoff functions of two CNDs, evaluated on
/// the 201-point α-grid.
pub fn tensor_via_pld(f: &Cnd, g: &Cnd, grid_size: usize) -> Result<EmpiricalTradeoff> {
    tensor_via_pld_on(f, g, grid_size, &super::alpha_grid(201))
}

/// As [`tensor_via_pld`] on a caller-chosen α-grid. `grid_size` is the
/// number of loss bins per component; both components share one bin width
/// so the sum of losses stays on the grid.
pub fn tensor_via_pld_on(
    f: &Cnd,
    g: &Cnd,
    grid_size: usize,
    alphas: &[f64],
) -> Result<EmpiricalTradeoff> {
    let joint = joint_pld(&[f.clone(), g.clone()], grid_size)?;
    Ok(EmpiricalTradeoff::from_vertices(
        &joint.vertices(),
        alphas,
        joint.error_bound(),
        0,
        0,
        EstimateMethod::PldGrid,
    ))
}

/// Numerical `f_1 ⊗ … ⊗ f_n` for the tradeoff functions of `cnds`, as a
/// piecewise-linear function together with its error bound.
pub fn tensor_many_via_pld(cnds: &[Cnd], grid_size: usize) -> Result<(TradeoffFunction, f64)> {
    let joint = joint_pld(cnds, grid_size)?;
    Ok((joint.to_tradeoff()?, joint.error_bound()))
}

fn joint_pld(cnds: &[Cnd], grid_size: usize) -> Result<PrivacyLossDistribution> {
    if cnds.is_empty() {
        return Err(domain("tensor product of an empty list"));
    }
    if grid_size < MIN_GRID_SIZE {
        return Err(domain(format!(
            "grid_size must be at least {MIN_GRID_SIZE}, got {grid_size}"
        )));
    }
    let mut reach = f64::MIN_POSITIVE;
    for c in cnds {
        reach = reach.max(LossRange::of(c)?.max_abs_finite);
    }
    let half_bins = grid_size / 2;
    // reach + 3 cells = half_bins cells
    let h = reach / (half_bins as f64 - 3.0);
    let mut joint = PrivacyLossDistribution::from_cnd(&cnds[0], h, half_bins)?;
    for c in &cnds[1..] {
        joint = joint.convolve(&PrivacyLossDistribution::from_cnd(c, h, half_bins)?)?;
    }
    let bound = joint.error_bound();
    if bound > MAX_PLD_ERROR {
        return Err(CndError::GridTooCoarse {
            bound,
            limit: MAX_PLD_ERROR,
        });
    }
    Ok(joint)
}
