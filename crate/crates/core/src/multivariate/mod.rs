// SPDX-License-Identifier: Apache-2.0

//! Multivariate canonical noise distributions.
//!
//! A multivariate CND `N` for `f` with respect to a norm has a symmetric
//! density, satisfies `T(N, N+v) ≥ f` for every `‖v‖ ≤ 1`, attains
//! equality at a worst-case shift `v*`, and has a likelihood ratio that is
//! monotone along `v*`. Five constructions are provided: products of 1-d
//! CNDs (ℓ∞), i.i.d. log-concave coordinates (ℓ1), correlated Gaussians,
//! uniform cubes and the ℓ∞-mechanism.
//!
//! Pure `ε`-DP has no multivariate CND, and `f_{ε,0}` is not a tensor
//! product of nontrivial tradeoff functions; nothing here searches for one.

mod build;
mod check;
mod norm;
mod shift;

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cnd::{Cnd, CndKind};
use crate::tradeoff::TradeoffFunction;
use crate::verify::parallel_draws;

pub use build::{
    approx_dp_cnd, approx_dp_cnd_with_split, equal_delta_split, gaussian_mv_cnd, iid_l1_cnd,
    linf_mechanism, linf_plrv, product_cnd, uniform_cube_cnd, PRODUCT_PLD_GRID,
};
pub use check::{random_ball_shifts, verify_mv_cnd, MLR_TOL, SYMMETRY_REL_TOL};
pub use norm::{NormFn, NormKind, NormSpec};
pub use shift::{
    worst_shift_gaussian, worst_shift_uniform, ShiftCertificate, ShiftMethod, WorstShiftResult,
    CERTIFICATE_TOL, MAX_VERTEX_DIM, SEARCH_CANDIDATES,
};

/// Which construction an [`MvCnd`] came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "params")]
pub enum MvKind {
    Product {
        components: Vec<CndKind>,
    },
    IidL1 {
        component: CndKind,
        k: usize,
    },
    GaussianMv {
        sigma: Vec<Vec<f64>>,
    },
    UniformCube {
        delta: f64,
        dim: usize,
    },
    ApproxDp {
        eps: f64,
        delta: f64,
        deltas: Vec<f64>,
    },
    LinfMech {
        eps: f64,
        dim: usize,
    },
}

#[derive(Clone, Debug)]
enum MvModel {
    Product(Vec<Cnd>),
    /// `N(0, LLᵀ)`; `log_norm` is `-Σ ln L_ii - (d/2) ln 2π`.
    Gaussian {
        chol: DMatrix<f64>,
        log_norm: f64,
    },
    /// Density `exp(-ε‖x‖∞) / (d! (2/ε)^d)`.
    Linf {
        eps: f64,
        dim: usize,
        log_norm: f64,
    },
}

/// A multivariate canonical noise distribution with its sensitivity norm,
/// worst-case shift and target tradeoff function.
#[derive(Clone, Debug)]
pub struct MvCnd {
    kind: MvKind,
    norm: NormSpec,
    shift: WorstShiftResult,
    target_f: TradeoffFunction,
    /// Uniform error of `target_f` when it is a numerical tensor product.
    target_error: f64,
    model: MvModel,
}

impl MvCnd {
    pub fn kind(&self) -> &MvKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.norm.dim()
    }

    pub fn norm(&self) -> &NormSpec {
        &self.norm
    }

    pub fn worst_shift(&self) -> &[f64] {
        &self.shift.v_star
    }

    pub fn worst_shift_result(&self) -> &WorstShiftResult {
        &self.shift
    }

    pub fn target_f(&self) -> &TradeoffFunction {
        &self.target_f
    }

    pub fn target_error(&self) -> f64 {
        self.target_error
    }

    /// Same distribution checked against a different target, e.g. a
    /// deliberately wrong one as a negative control.
    pub fn with_target(&self, f: TradeoffFunction) -> Self {
        Self {
            target_f: f,
            target_error: 0.0,
            ..self.clone()
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        if x.len() != self.dim() {
            return f64::NAN;
        }
        match &self.model {
            MvModel::Product(cnds) => cnds.iter().zip(x).map(|(c, &v)| c.log_density(v)).sum(),
            MvModel::Gaussian { chol, log_norm } => {
                let v = DVector::from_column_slice(x);
                chol.solve_lower_triangular(&v)
                    .map_or(f64::NAN, |z| log_norm - 0.5 * z.norm_squared())
            }
            MvModel::Linf { eps, log_norm, .. } => {
                log_norm - eps * x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.model {
            MvModel::Product(cnds) => cnds.iter().map(|c| c.sample(rng)).collect(),
            MvModel::Gaussian { chol, .. } => {
                let z: Vec<f64> = (0..chol.nrows())
                    .map(|_| StandardNormal.sample(rng))
                    .collect();
                (chol * DVector::from_vec(z)).iter().copied().collect()
            }
            MvModel::Linf { eps, dim, .. } => {
                // R ~ Gamma(d+1, ε) as a sum of d+1 exponentials, X = R·U.
                let exp = Exp::new(*eps).expect("eps validated at construction");
                let r: f64 = (0..=*dim).map(|_| exp.sample(rng)).sum();
                (0..*dim).map(|_| r * rng.random_range(-1.0..1.0)).collect()
            }
        }
    }

    /// `n` draws over the fixed stream partition of `seed`.
    pub fn sample_n(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        parallel_draws(n, seed, 0, |rng| Ok(self.sample(rng))).expect("sampling is infallible")
    }

    /// `{kind, dim, norm, v_star, target_f, ...}`.
    pub fn metadata(&self) -> Value {
        json!({
            "kind": self.kind,
            "dim": self.dim(),
            "norm": self.norm.to_json(),
            "v_star": self.shift.v_star,
            "target_f": self.target_f.family_tag(),
            "target_error": self.target_error,
            "worst_shift": self.shift,
        })
    }

    /// CSV with header `x1,…,xd` and one row per draw.
    pub fn samples_csv(&self, draws: &[Vec<f64>]) -> String {
        let header: Vec<String> = (1..=self.dim()).map(|i| format!("x{i}")).collect();
        let mut out = header.join(",");
        out.push('\n');
        for row in draws {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}
