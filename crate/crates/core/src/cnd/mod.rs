// SPDX-License-Identifier: Apache-2.0

//! One-dimensional canonical noise distributions.
//!
//! A CND for a symmetric tradeoff function `f` is a continuous, symmetric
//! noise `N ~ F` whose shift-by-one test realizes `f` exactly:
//! `T(N, N+1)(α) = F(F⁻¹(α) - 1) = f(α)`, while smaller shifts are no
//! easier to detect. Every CND obeys the recurrence
//! `F(x) = f(F(x+1))` and `F(x) = 1 - f(1 - F(x-1))`.

mod check;
mod construct;
mod limit;

pub use check::{recurrence_residual, verify_cnd, RECURRENCE_TOL, SAMPLER_KS_LEVEL, SYMMETRY_TOL};
pub use construct::{construct_cnd, MAX_RECURSION_DEPTH};
pub use limit::{log_concavity_defect, logconcave_limit, LimitDiagnostics};

use std::fmt::Write as _;
use std::sync::Arc;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use crate::error::{domain, CndError, Result};
use crate::special::{phi, phi_density, phi_inv};
use crate::tradeoff::{
    laplace_unit_cdf, laplace_unit_quantile, make_eps_delta, make_gdp, make_laplace_tf,
    self_compose, TradeoffFunction,
};
use construct::Constructed;

/// Which construction a [`Cnd`] came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params")]
pub enum CndKind {
    /// Recursion-based construction from an arbitrary symmetric `f`.
    Constructed,
    /// `Tulap(0, e^{-ε}, 0)`.
    Tulap { eps: f64 },
    /// `N(0, 1/μ²)`, the log-concave CND for `G_μ`.
    GaussianCnd { mu: f64 },
    /// `Laplace(0, 1/ε)`, the log-concave CND for `L_ε`.
    LaplaceCnd { eps: f64 },
    /// `U(-1/(2δ), 1/(2δ))`, the log-concave CND for `f_{0,δ}`.
    UniformCnd { delta: f64 },
    /// Output of [`logconcave_limit`].
    LimitCnd { scale: f64, log_concave: bool },
    /// `F(k·)`, a CND for `f^{∘k}`.
    GroupScaled { k: u32, base: Box<CndKind> },
}

impl CndKind {
    /// Kinds whose density is log-concave.
    pub fn is_log_concave(&self) -> bool {
        match self {
            Self::GaussianCnd { .. } | Self::LaplaceCnd { .. } | Self::UniformCnd { .. } => true,
            Self::LimitCnd { log_concave, .. } => *log_concave,
            Self::GroupScaled { base, .. } => base.is_log_concave(),
            Self::Constructed | Self::Tulap { .. } => false,
        }
    }
}

#[derive(Clone, Debug)]
enum Model {
    Tulap {
        b: f64,
        g0: f64,
    },
    Gaussian {
        mu: f64,
    },
    Laplace {
        eps: f64,
    },
    Uniform {
        half_width: f64,
    },
    Constructed(Arc<Constructed>),
    /// `cdf(x) = inner.cdf(scale · x)`.
    Scaled {
        inner: Arc<Cnd>,
        scale: f64,
    },
}

/// A one-dimensional canonical noise distribution.
#[derive(Clone, Debug)]
pub struct Cnd {
    kind: CndKind,
    model: Model,
    source_f: TradeoffFunction,
}

/// Bracket expansion limit for quantile search.
const MAX_BRACKET_DOUBLINGS: usize = 80;
/// Bisection steps after bracketing.
const QUANTILE_BISECTION_STEPS: usize = 80;
/// Step of the central finite difference used for densities without a
/// closed form.
pub const DENSITY_FD_STEP: f64 = 1e-6;

/// `Tulap(0, e^{-ε}, 0)`: density `g0·e^{-|k|ε}` on the cell
/// `(k - 1/2, k + 1/2]`, `g0 = (e^ε-1)/(e^ε+1)`.
pub fn tulap(eps: f64) -> Result<Cnd> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be finite and > 0, got {eps}")));
    }
    let b = (-eps).exp();
    Ok(Cnd {
        kind: CndKind::Tulap { eps },
        model: Model::Tulap {
            b,
            g0: (1.0 - b) / (1.0 + b),
        },
        source_f: make_eps_delta(eps, 0.0)?,
    })
}

/// `N(0, 1/μ²)`, cdf `Φ(μx)`.
pub fn gaussian_cnd(mu: f64) -> Result<Cnd> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(domain(format!("mu must be finite and > 0, got {mu}")));
    }
    Ok(Cnd {
        kind: CndKind::GaussianCnd { mu },
        model: Model::Gaussian { mu },
        source_f: make_gdp(mu)?,
    })
}

/// `Laplace(0, 1/ε)`.
pub fn laplace_cnd(eps: f64) -> Result<Cnd> {
    Ok(Cnd {
        kind: CndKind::LaplaceCnd { eps },
        model: Model::Laplace { eps },
        source_f: make_laplace_tf(eps)?,
    })
}

/// `U(-1/(2δ), 1/(2δ))`.
pub fn uniform_cnd(delta: f64) -> Result<Cnd> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("delta must lie in (0,1], got {delta}")));
    }
    Ok(Cnd {
        kind: CndKind::UniformCnd { delta },
        model: Model::Uniform {
            half_width: 0.5 / delta,
        },
        source_f: make_eps_delta(0.0, delta)?,
    })
}

/// `F(k·)`: a CND for `f^{∘k}` when `F` is a CND for `f`.
pub fn scale_group(cnd: &Cnd, k: u32) -> Result<Cnd> {
    if k == 0 {
        return Err(domain("group size k must be >= 1"));
    }
    if k == 1 {
        return Ok(cnd.clone());
    }
    Ok(Cnd {
        kind: CndKind::GroupScaled {
            k,
            base: Box::new(cnd.kind.clone()),
        },
        model: Model::Scaled {
            inner: Arc::new(cnd.clone()),
            scale: k as f64,
        },
        source_f: self_compose(&cnd.source_f, k)?,
    })
}

impl Cnd {
    pub(crate) fn from_constructed(c: Constructed, f: TradeoffFunction) -> Self {
        Self {
            kind: CndKind::Constructed,
            model: Model::Constructed(Arc::new(c)),
            source_f: f,
        }
    }

    pub(crate) fn rescaled(inner: Cnd, scale: f64, kind: CndKind, f: TradeoffFunction) -> Self {
        Self {
            kind,
            model: Model::Scaled {
                inner: Arc::new(inner),
                scale,
            },
            source_f: f,
        }
    }

    pub fn kind(&self) -> &CndKind {
        &self.kind
    }

    /// The tradeoff function this distribution is canonical for.
    pub fn source_f(&self) -> &TradeoffFunction {
        &self.source_f
    }

    /// Cumulative distribution function. Returns NaN if a constructed cdf
    /// would need more than [`MAX_RECURSION_DEPTH`] recursion steps; use
    /// [`Cnd::try_cdf`] to get the error instead.
    pub fn cdf(&self, x: f64) -> f64 {
        self.try_cdf(x).unwrap_or(f64::NAN)
    }

    pub fn try_cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Ok(f64::NAN);
        }
        if x.is_infinite() {
            return Ok(if x > 0.0 { 1.0 } else { 0.0 });
        }
        Ok(match &self.model {
            Model::Tulap { b, g0 } => {
                if x <= 0.0 {
                    tulap_upper_tail(*b, *g0, -x)
                } else {
                    1.0 - tulap_upper_tail(*b, *g0, x)
                }
            }
            Model::Gaussian { mu } => phi(mu * x),
            Model::Laplace { eps } => laplace_unit_cdf(eps * x),
            Model::Uniform { half_width } => {
                ((x + half_width) / (2.0 * half_width)).clamp(0.0, 1.0)
            }
            Model::Constructed(c) => c.cdf(x)?,
            Model::Scaled { inner, scale } => inner.try_cdf(scale * x)?,
        })
    }

    /// Quantile `F⁻¹(α) = inf{x : F(x) ≥ α}` for `α ∈ (0,1)`.
    pub fn quantile(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("quantile needs α in (0,1), got {alpha}")));
        }
        Ok(match &self.model {
            Model::Tulap { b, g0 } => {
                if alpha <= 0.5 {
                    -tulap_upper_quantile(*b, *g0, alpha)
                } else {
                    tulap_upper_quantile(*b, *g0, 1.0 - alpha)
                }
            }
            Model::Gaussian { mu } => phi_inv(alpha) / mu,
            Model::Laplace { eps } => laplace_unit_quantile(alpha) / eps,
            Model::Uniform { half_width } => half_width * (2.0 * alpha - 1.0),
            Model::Constructed(c) => c.quantile(alpha)?,
            Model::Scaled { inner, scale } => inner.quantile(alpha)? / scale,
        })
    }

    /// Quantile by bracketing and bisection on the cdf alone: start from
    /// `[-1, 1]`, double until the bracket straddles `α`, then bisect.
    pub fn quantile_by_bisection(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(domain(format!("quantile needs α in (0,1), got {alpha}")));
        }
        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        let mut doublings = 0;
        while self.try_cdf(lo)? >= alpha || self.try_cdf(hi)? < alpha {
            doublings += 1;
            if doublings > MAX_BRACKET_DOUBLINGS {
                return Err(CndError::Convergence(format!(
                    "could not bracket the {alpha} quantile"
                )));
            }
            if self.try_cdf(lo)? >= alpha {
                lo *= 2.0;
            }
            if self.try_cdf(hi)? < alpha {
                hi *= 2.0;
            }
        }
        for _ in 0..QUANTILE_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.try_cdf(mid)? >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Density. Analytic for Tulap, Gaussian, Laplace and uniform kinds;
    /// central finite difference of the cdf otherwise.
    pub fn density(&self, x: f64) -> f64 {
        match &self.model {
            Model::Tulap { b, g0 } => g0 * b.powf(tulap_cell(x).unsigned_abs() as f64),
            Model::Gaussian { mu } => mu * phi_density(mu * x),
            Model::Laplace { eps } => 0.5 * eps * (-eps * x.abs()).exp(),
            Model::Uniform { half_width } => {
                if x.abs() <= *half_width {
                    0.5 / half_width
                } else {
                    0.0
                }
            }
            Model::Constructed(c) if x.abs() < 0.5 => c.base_density(),
            Model::Constructed(_) => {
                let h = DENSITY_FD_STEP;
                ((self.cdf(x + h) - self.cdf(x - h)) / (2.0 * h)).max(0.0)
            }
            Model::Scaled { inner, scale } => scale * inner.density(scale * x),
        }
    }

    /// Natural log of the density; `-inf` off the support.
    pub fn log_density(&self, x: f64) -> f64 {
        match &self.model {
            Model::Gaussian { mu } => {
                let z = mu * x;
                mu.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z
            }
            Model::Laplace { eps } => (0.5 * eps).ln() - eps * x.abs(),
            Model::Tulap { b, g0 } => g0.ln() + tulap_cell(x).unsigned_abs() as f64 * b.ln(),
            Model::Scaled { inner, scale } => scale.ln() + inner.log_density(scale * x),
            _ => self.density(x).ln(),
        }
    }

    /// Upper end of the support (`+inf` for full support).
    pub fn support_upper(&self) -> f64 {
        match &self.model {
            Model::Uniform { half_width } => *half_width,
            Model::Constructed(c) => c.support_upper(),
            Model::Scaled { inner, scale } => inner.support_upper() / scale,
            _ => f64::INFINITY,
        }
    }

    /// `lim_{α→1} F(F⁻¹(α) - shift)`.
    pub(crate) fn cdf_upper_limit_shifted(&self, shift: f64) -> f64 {
        let top = self.support_upper();
        if top.is_infinite() {
            1.0
        } else {
            self.cdf(top - shift)
        }
    }

    /// Draws one value by inverse-cdf sampling (Gaussian kinds use a normal
    /// variate directly).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.model {
            Model::Gaussian { mu } => {
                let z: f64 = rng.sample(StandardNormal);
                z / mu
            }
            Model::Scaled { inner, scale } => inner.sample(rng) / scale,
            _ => {
                let u: f64 = rng.sample(Open01);
                self.quantile(u).unwrap_or(f64::NAN)
            }
        }
    }

    /// Tulap fast path: `G₁ - G₂ + U` with `G₁, G₂` geometric on
    /// `{0,1,...}` with success probability `1 - e^{-ε}` and
    /// `U ~ U(-1/2, 1/2)`. Returns `None` for other kinds.
    pub fn sample_tulap_fast<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<f64> {
        let Model::Tulap { b, .. } = self.model else {
            return None;
        };
        let ln_b = b.ln();
        let mut geometric = || {
            let u: f64 = rng.sample(Open01);
            (u.ln() / ln_b).floor()
        };
        let g1 = geometric();
        let g2 = geometric();
        let u: f64 = rng.sample(Open01);
        Some(g1 - g2 + u - 0.5)
    }

    /// CSV table `x,cdf,density` over `xs`.
    pub fn to_csv(&self, xs: &[f64]) -> String {
        let mut out = String::from("x,cdf,density\n");
        for &x in xs {
            let _ = writeln!(out, "{x},{},{}", self.cdf(x), self.density(x));
        }
        out
    }

    /// JSON metadata `{kind, params, source_f}`.
    pub fn metadata(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.kind).expect("kind serializes");
        v["source_f"] = serde_json::to_value(self.source_f.family_tag()).expect("tag serializes");
        if v.get("params").is_none() {
            v["params"] = json!({});
        }
        v
    }
}

/// Signed cell index `k` with `|x| ∈ (|k| - 1/2, |k| + 1/2]`. Boundary
/// points go to the inner cell so the density is exactly symmetric.
fn tulap_cell(x: f64) -> i64 {
    let k = (x.abs() - 0.5).ceil().max(0.0) as i64;
    if x < 0.0 {
        -k
    } else {
        k
    }
}

/// `P(N > y)` for `y ≥ 0`.
fn tulap_upper_tail(b: f64, g0: f64, y: f64) -> f64 {
    let k = (y - 0.5).ceil().max(0.0);
    if k == 0.0 {
        0.5 - g0 * y
    } else {
        let bk = b.powf(k);
        g0 * (bk * b / (1.0 - b) + bk * (k + 0.5 - y))
    }
}

/// `y ≥ 0` with `P(N > y) = p` for `p ∈ (0, 1/2]`.
fn tulap_upper_quantile(b: f64, g0: f64, p: f64) -> f64 {
    if p >= b / (1.0 + b) {
        return (0.5 - p) / g0;
    }
    // cell k ≥ 1 satisfies b^{k+1}/(1+b) ≤ p < b^k/(1+b)
    let r = (p * (1.0 + b)).ln() / b.ln();
    let mut k = (r.ceil() - 1.0).max(1.0);
    while b.powf(k) / (1.0 + b) <= p && k > 1.0 {
        k -= 1.0;
    }
    while b.powf(k + 1.0) / (1.0 + b) > p {
        k += 1.0;
    }
    let bk = b.powf(k);
    let y = k + 0.5 - (p / g0 - bk * b / (1.0 - b)) / bk;
    y.clamp(k - 0.5, k + 0.5)
}
