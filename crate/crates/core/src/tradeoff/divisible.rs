// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{alpha_grid, identity, make_eps_delta, make_gdp, make_laplace_tf, TradeoffFunction};
use crate::error::{domain, Result};

/// Which registered family a [`DivisibleFamily`] is.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum FamilyLabel {
    /// `t ↦ G_{tμ}`.
    GdpFamily { mu: f64 },
    /// `t ↦ L_{tε}`.
    LaplaceFamily { eps: f64 },
    /// `t ↦ f_{0, min(1, tδ)}`.
    ZeroDeltaFamily { delta: f64 },
    /// A user-supplied family; no monoid law is assumed.
    Custom { name: String },
}

type AtFn = dyn Fn(f64) -> TradeoffFunction + Send + Sync;

/// One-parameter family `{f_t : t ≥ 0}` closed under composition,
/// `f_s ∘ f_t = f_{s+t}`, with `f_0 = Id`.
#[derive(Clone)]
pub struct DivisibleFamily {
    label: FamilyLabel,
    at: Arc<AtFn>,
}

impl fmt::Debug for DivisibleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DivisibleFamily")
            .field("label", &self.label)
            .finish()
    }
}

impl DivisibleFamily {
    pub fn gdp(mu: f64) -> Result<Self> {
        make_gdp(mu)?;
        Ok(Self {
            label: FamilyLabel::GdpFamily { mu },
            at: Arc::new(move |t| make_gdp(t * mu).expect("t, mu >= 0")),
        })
    }

    pub fn laplace(eps: f64) -> Result<Self> {
        make_laplace_tf(eps)?;
        Ok(Self {
            label: FamilyLabel::LaplaceFamily { eps },
            at: Arc::new(move |t| {
                if t == 0.0 {
                    identity()
                } else {
                    make_laplace_tf(t * eps).expect("t, eps > 0")
                }
            }),
        })
    }

    pub fn zero_delta(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(domain(format!("delta must lie in (0,1], got {delta}")));
        }
        Ok(Self {
            label: FamilyLabel::ZeroDeltaFamily { delta },
            at: Arc::new(move |t| make_eps_delta(0.0, (t * delta).min(1.0)).expect("valid")),
        })
    }

    /// Wraps an arbitrary family, e.g. one of the counterexamples where the
    /// monoid law holds but `f_s` does not approach the identity.
    pub fn custom<F>(name: impl Into<String>, at: F) -> Self
    where
        F: Fn(f64) -> TradeoffFunction + Send + Sync + 'static,
    {
        Self {
            label: FamilyLabel::Custom { name: name.into() },
            at: Arc::new(at),
        }
    }

    pub fn label(&self) -> &FamilyLabel {
        &self.label
    }

    /// Member `f_t`.
    pub fn at(&self, t: f64) -> TradeoffFunction {
        assert!(t >= 0.0, "family parameter must be non-negative");
        (self.at)(t)
    }

    /// Largest deviation `|f_s(f_t(α)) - f_{s+t}(α)|` over the grid for the
    /// given `(s, t)` pairs.
    pub fn monoid_defect(&self, pairs: &[(f64, f64)], alphas: &[f64]) -> f64 {
        pairs
            .iter()
            .map(|&(s, t)| {
                let (fs, ft, fst) = (self.at(s), self.at(t), self.at(s + t));
                alphas
                    .iter()
                    .map(|&a| (fs.eval(ft.eval(a)) - fst.eval(a)).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|f_0(α) - α|` over the grid.
    pub fn identity_defect(&self) -> f64 {
        let f0 = self.at(0.0);
        alpha_grid(1001)
            .into_iter()
            .map(|a| (f0.eval(a) - a).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registered() -> Vec<DivisibleFamily> {
        vec![
            DivisibleFamily::gdp(1.0).unwrap(),
            DivisibleFamily::gdp(0.3).unwrap(),
            DivisibleFamily::laplace(1.0).unwrap(),
            DivisibleFamily::laplace(2.5).unwrap(),
            DivisibleFamily::zero_delta(0.2).unwrap(),
        ]
    }

    #[test]
    fn monoid_law_and_identity() {
        let pairs = [(0.1, 0.2), (0.5, 0.5), (1.0, 0.25), (2.0, 3.0), (0.0, 0.7)];
        let grid = alpha_grid(1001);
        for fam in registered() {
            assert!(fam.identity_defect() <= 1e-12, "{:?}", fam.label());
            let d = fam.monoid_defect(&pairs, &grid);
            assert!(d <= 1e-9, "{:?}: defect {d}", fam.label());
        }
    }

    #[test]
    fn members_nontrivial_for_positive_t() {
        for fam in registered() {
            for t in [1e-3, 0.1, 1.0] {
                assert!(fam.at(t).is_nontrivial(1e-9), "{:?} at {t}", fam.label());
            }
        }
    }

    #[test]
    fn zero_delta_saturates() {
        let fam = DivisibleFamily::zero_delta(0.4).unwrap();
        assert_eq!(fam.at(5.0).eval(0.9), 0.0);
        assert!(DivisibleFamily::zero_delta(0.0).is_err());
    }
}
