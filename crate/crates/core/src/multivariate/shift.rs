// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::norm::{NormKind, NormSpec};
use crate::error::{domain, Result};
use crate::rng::{stream_rng, StreamRng};

/// Largest dimension for which the `2^d` vertices of the ℓ∞ ball are
/// enumerated.
pub const MAX_VERTEX_DIM: usize = 20;
/// Candidates drawn by the projected search and by the certificate.
pub const SEARCH_CANDIDATES: usize = 10_000;
/// Improvement over `v*` a certificate tolerates.
pub const CERTIFICATE_TOL: f64 = 1e-8;

const SEARCH_SEED: u64 = 0x5eed_5eed;
const CERTIFICATE_SEED: u64 = 0xce27_1f1c;
const LOCAL_STARTS: usize = 16;

/// How `v*` was found.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "method", content = "warning")]
pub enum ShiftMethod {
    ClosedForm,
    VertexEnumeration,
    /// Multi-start local search without a global guarantee. The warning is
    /// set when an exact method was skipped.
    ProjectedSearch(Option<String>),
}

/// Sampled evidence that no feasible shift beats `v*`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShiftCertificate {
    pub candidates: usize,
    /// Largest improvement of a sampled feasible point over `v*` (`≤ 0`
    /// when none improves).
    pub best_improvement: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Worst-case shift of a multivariate CND.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstShiftResult {
    pub v_star: Vec<f64>,
    /// The optimized functional at `v_star`.
    pub objective: f64,
    pub method: ShiftMethod,
    pub certificate: ShiftCertificate,
}

impl WorstShiftResult {
    /// `v*` fixed by the construction rather than by optimization.
    pub(crate) fn given(v_star: Vec<f64>, objective: f64) -> Self {
        Self {
            v_star,
            objective,
            method: ShiftMethod::ClosedForm,
            certificate: ShiftCertificate {
                candidates: 0,
                best_improvement: 0.0,
                tolerance: CERTIFICATE_TOL,
                passed: true,
            },
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sense {
    Max,
    Min,
}

/// `argmax_{‖u‖≤1} ‖Σ^{-1/2} u‖₂`.
///
/// Closed form for ℓ2 and elliptical norms (top generalized eigenvector),
/// vertex enumeration for ℓ1 and for ℓ∞ up to [`MAX_VERTEX_DIM`], projected
/// search otherwise. Ties go to the lexicographically largest maximizer, so
/// `Σ = I` gives `e₁` for ℓ2 and ℓ1 and `(1,…,1)` for ℓ∞.
pub fn worst_shift_gaussian(sigma: &DMatrix<f64>, norm: &NormSpec) -> Result<WorstShiftResult> {
    let d = norm.dim();
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(domain(format!(
            "covariance is {}x{} but the norm acts on dimension {d}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| domain("covariance must be symmetric positive definite"))?;
    let l = chol.l();
    let objective = move |u: &[f64]| -> f64 {
        let v = DVector::from_column_slice(u);
        l.solve_lower_triangular(&v).map_or(f64::NAN, |z| z.norm())
    };
    let closed = match norm.kind() {
        NormKind::L2 => Some(ellipsoid_argmax(&chol.inverse(), &DMatrix::identity(d, d))),
        NormKind::Elliptical(m) => Some(ellipsoid_argmax(&chol.inverse(), m)),
        _ => None,
    };
    Ok(optimize(norm, &objective, Sense::Max, closed))
}

/// `argmin_{‖v‖≤1} ∏(1 - δ|v_i|)`, the shift that minimizes the overlap of
/// two uniform cubes of side `1/δ`.
pub fn worst_shift_uniform(delta: f64, norm: &NormSpec) -> Result<WorstShiftResult> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("delta must lie in (0,1], got {delta}")));
    }
    let objective = move |v: &[f64]| overlap(delta, v);
    Ok(optimize(norm, &objective, Sense::Min, None))
}

/// `∏(1 - δ|v_i|)`, clamped at 0.
pub(crate) fn overlap(delta: f64, v: &[f64]) -> f64 {
    v.iter()
        .fold(1.0, |a, x| a * (1.0 - delta * x.abs()).max(0.0))
}

/// Maximizer of `uᵀKu` over `uᵀMu ≤ 1`, lexicographically largest on ties.
fn ellipsoid_argmax(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let d = k.nrows();
    // u = C⁻ᵀw with M = CCᵀ turns the constraint into ‖w‖ ≤ 1.
    let c = m
        .clone()
        .cholesky()
        .expect("norm matrix is positive definite")
        .l();
    let c_inv = c
        .clone()
        .try_inverse()
        .expect("Cholesky factor is invertible");
    let reduced = &c_inv * k * c_inv.transpose();
    let reduced = 0.5 * (&reduced + reduced.transpose());
    let eig = reduced.symmetric_eigen();
    let top = eig.eigenvalues.max();
    let tol = 1e-10 * top.abs().max(1.0);
    let cols: Vec<DVector<f64>> = (0..d)
        .filter(|&i| eig.eigenvalues[i] >= top - tol)
        .map(|i| c_inv.transpose() * eig.eigenvectors.column(i))
        .collect();
    let basis = DMatrix::from_columns(&cols);
    // Maximize u_i over the top eigenspace for the first coordinate that is
    // not identically zero there: u ∝ B (BᵀMB)⁻¹ Bᵀ e_i.
    let gram = basis.transpose() * m * &basis;
    let gram_inv = gram.try_inverse().expect("eigenspace basis is independent");
    for i in 0..d {
        let coeff = &gram_inv * basis.row(i).transpose();
        let u = &basis * coeff;
        let n = u.dot(&(m * &u)).sqrt();
        if n > 1e-9 {
            return (u / n).iter().copied().collect();
        }
    }
    unreachable!("a nonzero eigenspace has a nonzero coordinate")
}

/// Shared optimizer: exact answer when available, otherwise vertex
/// enumeration or projected search; always certified by sampling.
fn optimize(
    norm: &NormSpec,
    objective: &dyn Fn(&[f64]) -> f64,
    sense: Sense,
    closed_form: Option<Vec<f64>>,
) -> WorstShiftResult {
    let d = norm.dim();
    let score = |u: &[f64]| match sense {
        Sense::Max => objective(u),
        Sense::Min => -objective(u),
    };
    let (v_star, method) = if let Some(v) = closed_form {
        (v, ShiftMethod::ClosedForm)
    } else {
        match norm.kind() {
            NormKind::L1 => (
                best_of(unit_axes(d).into_iter(), &score),
                ShiftMethod::VertexEnumeration,
            ),
            NormKind::Linf if d <= MAX_VERTEX_DIM => (
                best_of(cube_vertices(d), &score),
                ShiftMethod::VertexEnumeration,
            ),
            NormKind::Linf => (
                projected_search(norm, &score),
                ShiftMethod::ProjectedSearch(Some(format!(
                    "d = {d} > {MAX_VERTEX_DIM}: 2^d vertices not enumerated, no global guarantee"
                ))),
            ),
            _ => (
                projected_search(norm, &score),
                ShiftMethod::ProjectedSearch(None),
            ),
        }
    };
    let best = score(&v_star);
    let mut rng = stream_rng(CERTIFICATE_SEED, d as u64);
    let mut improvement = f64::NEG_INFINITY;
    for _ in 0..SEARCH_CANDIDATES {
        if let Some(u) = random_feasible(norm, &mut rng) {
            improvement = improvement.max(score(&u) - best);
        }
    }
    WorstShiftResult {
        objective: objective(&v_star),
        v_star,
        method,
        certificate: ShiftCertificate {
            candidates: SEARCH_CANDIDATES,
            best_improvement: improvement,
            tolerance: CERTIFICATE_TOL,
            passed: improvement <= CERTIFICATE_TOL,
        },
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x > y;
        }
    }
    false
}

/// Highest-scoring candidate, lexicographically largest among ties.
fn best_of(cands: impl Iterator<Item = Vec<f64>>, score: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for u in cands {
        let s = score(&u);
        if !s.is_finite() {
            continue;
        }
        best = match best {
            None => Some((s, u)),
            Some((bs, bu)) => {
                if (s > bs && !ties(s, bs)) || (ties(s, bs) && lex_greater(&u, &bu)) {
                    Some((s, u))
                } else {
                    Some((bs, bu))
                }
            }
        };
    }
    best.expect("at least one finite candidate").1
}

fn unit_axes(d: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[i] = s;
            out.push(e);
        }
    }
    out
}

fn cube_vertices(d: usize) -> impl Iterator<Item = Vec<f64>> {
    (0u64..1 << d).map(move |bits| {
        (0..d)
            .map(|i| {
                if bits >> (d - 1 - i) & 1 == 0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect()
    })
}

/// Uniform direction scaled to the boundary, then pulled inward by
/// `U^{1/d}` half of the time.
fn random_feasible(norm: &NormSpec, rng: &mut StreamRng) -> Option<Vec<f64>> {
    let d = norm.dim();
    let x: Vec<f64> = match rng.random_range(0..3) {
        0 => (0..d)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
        _ => (0..d).map(|_| rng.sample(StandardNormal)).collect(),
    };
    let u = norm.to_boundary(&x)?;
    if rng.random::<bool>() {
        let r = rng.random::<f64>().powf(1.0 / d as f64);
        Some(u.into_iter().map(|v| v * r).collect())
    } else {
        Some(u)
    }
}

/// Best boundary point among axes, sign patterns and random directions,
/// refined by coordinate hill climbing from the best starts.
fn projected_search(norm: &NormSpec, score: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let d = norm.dim();
    let mut rng = stream_rng(SEARCH_SEED, d as u64);
    let mut cands: Vec<Vec<f64>> = unit_axes(d)
        .into_iter()
        .chain(std::iter::once(vec![1.0; d]))
        .filter_map(|u| norm.to_boundary(&u))
        .collect();
    while cands.len() < SEARCH_CANDIDATES {
        let x: Vec<f64> = if cands.len().is_multiple_of(2) {
            (0..d)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        } else {
            (0..d).map(|_| rng.sample(StandardNormal)).collect()
        };
        if let Some(u) = norm.to_boundary(&x) {
            cands.push(u);
        }
    }
    let mut scored: Vec<(f64, Vec<f64>)> = cands.into_iter().map(|u| (score(&u), u)).collect();
    scored.retain(|(s, _)| s.is_finite());
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let refined = scored
        .into_iter()
        .take(LOCAL_STARTS)
        .map(|(_, u)| hill_climb(norm, score, u));
    best_of(refined, score)
}

fn hill_climb(norm: &NormSpec, score: &dyn Fn(&[f64]) -> f64, mut u: Vec<f64>) -> Vec<f64> {
    let mut best = score(&u);
    let mut step = 0.5;
    while step > 1e-9 {
        let mut moved = false;
        for i in 0..u.len() {
            for s in [step, -step] {
                let mut w = u.clone();
                w[i] += s;
                if let Some(w) = norm.to_boundary(&w) {
                    let v = score(&w);
                    if v > best && !ties(v, best) {
                        best = v;
                        u = w;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(v))
    }

    #[test]
    fn identity_l2_gives_e1() {
        let r = worst_shift_gaussian(&DMatrix::identity(3, 3), &NormSpec::l2(3).unwrap()).unwrap();
        assert_eq!(r.method, ShiftMethod::ClosedForm);
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.v_star[0], 1.0, epsilon = 1e-12);
        assert!(r.certificate.passed);
    }

    #[test]
    fn identity_linf_and_l1() {
        let r =
            worst_shift_gaussian(&DMatrix::identity(3, 3), &NormSpec::linf(3).unwrap()).unwrap();
        assert_eq!(r.v_star, vec![1.0; 3]);
        assert_abs_diff_eq!(r.objective, 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.method, ShiftMethod::VertexEnumeration);
        let r = worst_shift_gaussian(&DMatrix::identity(3, 3), &NormSpec::l1(3).unwrap()).unwrap();
        assert_eq!(r.v_star, vec![1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn diagonal_linf_by_hand() {
        // All four vertices (±1,±1) give √(1 + 1/4).
        let r = worst_shift_gaussian(&diag(&[1.0, 4.0]), &NormSpec::linf(2).unwrap()).unwrap();
        assert_abs_diff_eq!(r.objective, 1.25f64.sqrt(), epsilon = 1e-12);
        assert_eq!(r.v_star, vec![1.0, 1.0]);
        assert!(r.certificate.passed);
    }

    #[test]
    fn l2_picks_smallest_variance_axis() {
        let r = worst_shift_gaussian(&diag(&[4.0, 0.25, 1.0]), &NormSpec::l2(3).unwrap()).unwrap();
        assert_abs_diff_eq!(r.objective, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(r.v_star[1].abs(), 1.0, epsilon = 1e-10);
        assert!(r.v_star[1] > 0.0);
    }

    #[test]
    fn elliptical_matches_search() {
        let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 3.0]);
        let norm = NormSpec::elliptical(m.clone()).unwrap();
        let exact = worst_shift_gaussian(&sigma, &norm).unwrap();
        assert_abs_diff_eq!(norm.eval(&exact.v_star), 1.0, epsilon = 1e-12);
        // Same norm as an opaque closure goes through the projected search.
        let opaque = NormSpec::custom("ellipse", 2, move |x| {
            let v = DVector::from_column_slice(x);
            v.dot(&(&m * &v)).sqrt()
        })
        .unwrap();
        let search = worst_shift_gaussian(&sigma, &opaque).unwrap();
        assert!(matches!(search.method, ShiftMethod::ProjectedSearch(None)));
        assert_abs_diff_eq!(search.objective, exact.objective, epsilon = 1e-8);
        assert!(exact.certificate.passed && search.certificate.passed);
    }

    #[test]
    fn high_dimensional_linf_falls_back() {
        let d = 21;
        let r =
            worst_shift_gaussian(&DMatrix::identity(d, d), &NormSpec::linf(d).unwrap()).unwrap();
        assert!(matches!(r.method, ShiftMethod::ProjectedSearch(Some(_))));
        assert_abs_diff_eq!(r.objective, (d as f64).sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn uniform_shift_examples() {
        let r = worst_shift_uniform(0.3, &NormSpec::linf(3).unwrap()).unwrap();
        assert_eq!(r.v_star, vec![1.0; 3]);
        assert_eq!(r.objective, 0.7f64.powi(3));
        // Oracle: grid search over the ℓ1 ball at resolution 1e-3.
        let r = worst_shift_uniform(0.5, &NormSpec::l1(2).unwrap()).unwrap();
        let mut best = f64::INFINITY;
        for i in 0..=1000 {
            let a = i as f64 / 1000.0;
            best = best.min(overlap(0.5, &[a, 1.0 - a]));
        }
        assert_abs_diff_eq!(r.objective, best, epsilon = 1e-12);
        assert_eq!(r.objective, 0.5);
        assert_eq!(r.v_star, vec![1.0, 0.0]);
        let r = worst_shift_uniform(0.4, &NormSpec::l2(1).unwrap()).unwrap();
        assert_abs_diff_eq!(r.objective, 0.6, epsilon = 1e-12);
        assert!(worst_shift_uniform(0.0, &NormSpec::l2(1).unwrap()).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(worst_shift_gaussian(&DMatrix::identity(2, 2), &NormSpec::l2(3).unwrap()).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(worst_shift_gaussian(&bad, &NormSpec::l2(2).unwrap()).is_err());
    }
}
