// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

use crate::error::{domain, Result};
use crate::rng::stream_rng;

/// Evaluable norm on `ℝ^d`.
pub type NormFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Which norm a [`NormSpec`] measures sensitivity in.
#[derive(Clone)]
pub enum NormKind {
    L1,
    L2,
    Linf,
    /// `‖x‖ = √(xᵀ M x)` for a symmetric positive-definite `M`.
    Elliptical(DMatrix<f64>),
    Custom {
        name: String,
        norm: Arc<NormFn>,
    },
}

/// A norm together with the dimension it acts on.
#[derive(Clone)]
pub struct NormSpec {
    kind: NormKind,
    dim: usize,
}

impl fmt::Debug for NormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NormSpec({}, d={})", self.name(), self.dim)
    }
}

/// Sample size of [`NormSpec::axiom_violation`] when checking custom norms.
const AXIOM_SAMPLES: usize = 1000;
/// Largest accepted relative violation of the norm axioms.
const AXIOM_TOL: f64 = 1e-9;

impl NormSpec {
    pub fn l1(dim: usize) -> Result<Self> {
        Self::simple(NormKind::L1, dim)
    }

    pub fn l2(dim: usize) -> Result<Self> {
        Self::simple(NormKind::L2, dim)
    }

    pub fn linf(dim: usize) -> Result<Self> {
        Self::simple(NormKind::Linf, dim)
    }

    fn simple(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("norm dimension must be >= 1"));
        }
        Ok(Self { kind, dim })
    }

    /// `√(xᵀ M x)`; `M` must be symmetric positive definite.
    pub fn elliptical(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(domain("elliptical norm needs a nonempty square matrix"));
        }
        if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(domain("elliptical norm matrix must be symmetric"));
        }
        if m.clone().cholesky().is_none() {
            return Err(domain("elliptical norm matrix must be positive definite"));
        }
        let dim = m.nrows();
        Ok(Self {
            kind: NormKind::Elliptical(m),
            dim,
        })
    }

    /// A user-supplied norm, accepted after sampled checks of the norm
    /// axioms.
    pub fn custom<F>(name: impl Into<String>, dim: usize, norm: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let spec = Self::simple(
            NormKind::Custom {
                name: name.into(),
                norm: Arc::new(norm),
            },
            dim,
        )?;
        let v = spec.axiom_violation(AXIOM_SAMPLES, 0);
        if !(v <= AXIOM_TOL) {
            return Err(domain(format!(
                "custom norm violates the norm axioms by {v:.3e} on sampled points"
            )));
        }
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }

    /// Short identifier: `l1`, `l2`, `linf`, `elliptical` or the custom name.
    pub fn name(&self) -> String {
        match &self.kind {
            NormKind::L1 => "l1".into(),
            NormKind::L2 => "l2".into(),
            NormKind::Linf => "linf".into(),
            NormKind::Elliptical(_) => "elliptical".into(),
            NormKind::Custom { name, .. } => name.clone(),
        }
    }

    /// Unit balls with finitely many extreme points.
    pub fn is_polytope(&self) -> bool {
        matches!(self.kind, NormKind::L1 | NormKind::Linf)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            NormKind::L1 => x.iter().map(|v| v.abs()).sum(),
            NormKind::L2 => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::Linf => x.iter().fold(0.0, |m, v| m.max(v.abs())),
            NormKind::Elliptical(m) => {
                let v = DVector::from_column_slice(x);
                (v.dot(&(m * &v))).max(0.0).sqrt()
            }
            NormKind::Custom { norm, .. } => norm(x),
        }
    }

    /// `x / ‖x‖`, or `None` for the zero vector.
    pub fn to_boundary(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = self.eval(x);
        (n > 0.0 && n.is_finite()).then(|| x.iter().map(|v| v / n).collect())
    }

    /// Largest relative violation of `‖0‖ = 0`, `‖λx‖ = |λ|‖x‖` and
    /// `‖x+y‖ ≤ ‖x‖ + ‖y‖` over `n` sampled `(λ, x, y)`.
    pub fn axiom_violation(&self, n: usize, seed: u64) -> f64 {
        let mut rng = stream_rng(seed, 0);
        let mut worst = self.eval(&vec![0.0; self.dim]).abs();
        for _ in 0..n {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
            let lambda: f64 = 4.0 * rng.sample::<f64, _>(StandardNormal);
            let (nx, ny) = (self.eval(&x), self.eval(&y));
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let scale = nx.max(ny).max(1e-300);
            let homog =
                (self.eval(&scaled) - lambda.abs() * nx).abs() / (lambda.abs().max(1.0) * scale);
            let tri = (self.eval(&sum) - nx - ny).max(0.0) / scale;
            let positive = if nx > 0.0 { 0.0 } else { 1.0 };
            worst = worst.max(homog).max(tri).max(positive);
        }
        worst
    }

    pub fn to_json(&self) -> Value {
        let mut out = json!({ "kind": self.name(), "dim": self.dim });
        if let NormKind::Elliptical(m) = &self.kind {
            out["matrix"] = json!(matrix_rows(m));
        }
        out
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
