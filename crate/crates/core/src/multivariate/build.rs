// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::norm::{matrix_rows, NormSpec};
use super::shift::{overlap, worst_shift_gaussian, worst_shift_uniform, WorstShiftResult};
use super::{MvCnd, MvKind, MvModel};
use crate::cnd::{tulap, uniform_cnd, Cnd};
use crate::error::{domain, precondition, Result};
use crate::tradeoff::{
    make_eps_delta, make_gdp, make_laplace_tf, tensor_closed_form, tensor_many_via_pld,
};

/// Loss bins per component when a product target has no closed form.
pub const PRODUCT_PLD_GRID: usize = 10_000;

/// Independent coordinates `(N_1, …, N_d)` with `N_i` a CND for `f_i`: a
/// CND for `f_1 ⊗ … ⊗ f_d` with respect to ℓ∞, tight at `(1,…,1)`.
pub fn product_cnd(cnds: &[Cnd]) -> Result<MvCnd> {
    let kind = MvKind::Product {
        components: cnds.iter().map(|c| c.kind().clone()).collect(),
    };
    product_with_kind(cnds, kind)
}

fn product_with_kind(cnds: &[Cnd], kind: MvKind) -> Result<MvCnd> {
    if cnds.is_empty() {
        return Err(domain("product_cnd needs at least one component"));
    }
    for (i, c) in cnds.iter().enumerate() {
        let f = c.source_f();
        if !f.is_symmetric() || !f.is_nontrivial(1e-12) {
            return Err(precondition(format!(
                "component {i} needs a nontrivial symmetric tradeoff function"
            )));
        }
    }
    let mut closed = Some(cnds[0].source_f().clone());
    for c in &cnds[1..] {
        closed = closed.and_then(|t| tensor_closed_form(&t, c.source_f()));
    }
    let (target_f, target_error) = match closed {
        Some(t) => (t, 0.0),
        None => tensor_many_via_pld(cnds, PRODUCT_PLD_GRID)?,
    };
    let d = cnds.len();
    Ok(MvCnd {
        kind,
        norm: NormSpec::linf(d)?,
        shift: WorstShiftResult::given(vec![1.0; d], 1.0),
        target_f,
        target_error,
        model: MvModel::Product(cnds.to_vec()),
    })
}

/// `k` i.i.d. copies of a log-concave CND for `f`: a CND for `f` with
/// respect to ℓ1, tight at `e₁`.
pub fn iid_l1_cnd(cnd: &Cnd, k: usize) -> Result<MvCnd> {
    if k == 0 {
        return Err(domain("iid_l1_cnd needs k >= 1"));
    }
    if !cnd.kind().is_log_concave() {
        return Err(precondition(format!(
            "iid_l1_cnd needs a log-concave component, got {:?}",
            cnd.kind()
        )));
    }
    let mut v_star = vec![0.0; k];
    v_star[0] = 1.0;
    Ok(MvCnd {
        kind: MvKind::IidL1 {
            component: cnd.kind().clone(),
            k,
        },
        norm: NormSpec::l1(k)?,
        shift: WorstShiftResult::given(v_star, 1.0),
        target_f: cnd.source_f().clone(),
        target_error: 0.0,
        model: MvModel::Product(vec![cnd.clone(); k]),
    })
}

/// `N(0, Σ)`: a CND for `G_μ` with `μ = max_{‖u‖≤1} ‖Σ^{-1/2}u‖₂`.
pub fn gaussian_mv_cnd(sigma: &DMatrix<f64>, norm: &NormSpec) -> Result<MvCnd> {
    if (sigma - sigma.transpose()).amax() > 1e-12 * sigma.amax().max(1.0) {
        return Err(domain("covariance must be symmetric"));
    }
    let shift = worst_shift_gaussian(sigma, norm)?;
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| domain("covariance must be symmetric positive definite"))?
        .l();
    let d = sigma.nrows() as f64;
    let log_norm = -chol.diagonal().iter().map(|v| v.ln()).sum::<f64>() - 0.5 * d * (2.0 * PI).ln();
    Ok(MvCnd {
        kind: MvKind::GaussianMv {
            sigma: matrix_rows(sigma),
        },
        norm: norm.clone(),
        target_f: make_gdp(shift.objective)?,
        shift,
        target_error: 0.0,
        model: MvModel::Gaussian { chol, log_norm },
    })
}

/// I.i.d. `U(-1/(2δ), 1/(2δ))` coordinates: a CND for `f_{0,1-A}` with
/// `A = min_{‖v‖≤1} ∏(1 - δ|v_i|)`.
pub fn uniform_cube_cnd(delta: f64, norm: &NormSpec) -> Result<MvCnd> {
    let shift = worst_shift_uniform(delta, norm)?;
    let d = norm.dim();
    let a = overlap(delta, &shift.v_star);
    Ok(MvCnd {
        kind: MvKind::UniformCube { delta, dim: d },
        norm: norm.clone(),
        shift,
        target_f: make_eps_delta(0.0, 1.0 - a)?,
        target_error: 0.0,
        model: MvModel::Product(vec![uniform_cnd(delta)?; d]),
    })
}

/// `δ_i = 1 - (1-δ)^{1/k}`, so that `∏(1-δ_i) = 1-δ`.
pub fn equal_delta_split(delta: f64, k: usize) -> Vec<f64> {
    vec![-((-delta).ln_1p() / k as f64).exp_m1(); k]
}

/// Tulap(ε) in one coordinate and `k` uniform coordinates: a CND for
/// `f_{ε,δ}` with respect to ℓ∞. The `δ_i` split `δ` equally.
pub fn approx_dp_cnd(eps: f64, delta: f64, k: usize) -> Result<MvCnd> {
    if k == 0 {
        return Err(domain("approx_dp_cnd needs k >= 1"));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(domain(format!("delta must lie in (0,1], got {delta}")));
    }
    let mut m = approx_dp_cnd_with_split(eps, &equal_delta_split(delta, k))?;
    m.target_f = make_eps_delta(eps, delta)?;
    if let MvKind::ApproxDp { delta: d, .. } = &mut m.kind {
        *d = delta;
    }
    Ok(m)
}

/// As [`approx_dp_cnd`] with explicit `δ_i`; the target is `f_{ε,δ}` with
/// `1-δ = ∏(1-δ_i)`.
pub fn approx_dp_cnd_with_split(eps: f64, deltas: &[f64]) -> Result<MvCnd> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be finite and > 0, got {eps}")));
    }
    if deltas.is_empty() {
        return Err(domain("approx_dp_cnd needs at least one delta"));
    }
    let mut cnds = vec![tulap(eps)?];
    for &d in deltas {
        cnds.push(uniform_cnd(d)?);
    }
    let delta = 1.0 - deltas.iter().fold(1.0, |a, d| a * (1.0 - d));
    product_with_kind(
        &cnds,
        MvKind::ApproxDp {
            eps,
            delta,
            deltas: deltas.to_vec(),
        },
    )
}

/// Density `exp(-ε‖x‖∞) / (d!(2/ε)^d)`: a CND for `L_ε` with respect to
/// ℓ∞, tight at `(1,…,1)`.
pub fn linf_mechanism(eps: f64, dim: usize) -> Result<MvCnd> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("eps must be finite and > 0, got {eps}")));
    }
    if dim == 0 {
        return Err(domain("dimension must be >= 1"));
    }
    let d = dim as f64;
    let ln_fact: f64 = (1..=dim).map(|i| (i as f64).ln()).sum();
    Ok(MvCnd {
        kind: MvKind::LinfMech { eps, dim },
        norm: NormSpec::linf(dim)?,
        shift: WorstShiftResult::given(vec![1.0; dim], 1.0),
        target_f: make_laplace_tf(eps)?,
        target_error: 0.0,
        model: MvModel::Linf {
            eps,
            dim,
            log_norm: -ln_fact - d * (2.0 / eps).ln(),
        },
    })
}

/// Privacy loss `log g(x) - log g(x - 1)` of the ℓ∞-mechanism at the shift
/// `(1,…,1)`: `ε · clamp(1 - (max x + min x), -1, 1)`.
pub fn linf_plrv(x: &[f64], eps: f64) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    eps * (1.0 - (hi + lo)).clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnd::{gaussian_cnd, laplace_cnd};
    use crate::tradeoff::{alpha_grid, FamilyTag};
    use approx::assert_abs_diff_eq;

    #[test]
    fn product_targets() {
        let m = product_cnd(&[tulap(1.0).unwrap(), uniform_cnd(0.05).unwrap()]).unwrap();
        assert_eq!(
            m.target_f().family_tag(),
            FamilyTag::EpsDelta {
                eps: 1.0,
                delta: 0.05
            }
        );
        assert_eq!(m.norm().name(), "linf");
        let single = product_cnd(&[laplace_cnd(0.7).unwrap()]).unwrap();
        assert_eq!(single.worst_shift(), &[1.0]);
        assert_eq!(
            single.target_f().family_tag(),
            FamilyTag::LaplaceTf { eps: 0.7 }
        );
        let g = product_cnd(&[gaussian_cnd(1.0).unwrap(), gaussian_cnd(2.0).unwrap()]).unwrap();
        assert_eq!(
            g.target_f().family_tag(),
            FamilyTag::Gdp { mu: 5f64.sqrt() }
        );
        assert!(product_cnd(&[]).is_err());
    }

    #[test]
    fn product_without_closed_form_uses_pld() {
        let m = product_cnd(&[laplace_cnd(1.0).unwrap(), gaussian_cnd(1.0).unwrap()]).unwrap();
        assert!(m.target_error() > 0.0 && m.target_error() <= 0.01);
        assert!(matches!(
            m.target_f().family_tag(),
            FamilyTag::PiecewiseLinear { .. }
        ));
    }

    #[test]
    fn iid_l1_examples() {
        let m = iid_l1_cnd(&laplace_cnd(1.0).unwrap(), 3).unwrap();
        assert_eq!(m.worst_shift(), &[1.0, 0.0, 0.0]);
        assert_eq!(m.target_f().family_tag(), FamilyTag::LaplaceTf { eps: 1.0 });
        let g = iid_l1_cnd(&gaussian_cnd(2.0).unwrap(), 1).unwrap();
        let one = gaussian_cnd(2.0).unwrap();
        for x in [-1.0, 0.0, 0.3, 2.0] {
            assert_abs_diff_eq!(g.log_density(&[x]), one.log_density(x), epsilon = 1e-14);
        }
        assert!(matches!(
            iid_l1_cnd(&tulap(1.0).unwrap(), 2),
            Err(crate::error::CndError::Precondition(_))
        ));
    }

    #[test]
    fn gaussian_examples() {
        let id3 = DMatrix::identity(3, 3);
        let m = gaussian_mv_cnd(&id3, &NormSpec::linf(3).unwrap()).unwrap();
        assert_eq!(m.worst_shift(), &[1.0, 1.0, 1.0]);
        match m.target_f().family_tag() {
            FamilyTag::Gdp { mu } => assert_abs_diff_eq!(mu, 3f64.sqrt(), epsilon = 1e-10),
            t => panic!("unexpected target {t:?}"),
        }
        let m = gaussian_mv_cnd(&id3, &NormSpec::l2(3).unwrap()).unwrap();
        assert_abs_diff_eq!(m.worst_shift_result().objective, 1.0, epsilon = 1e-12);
        // Density against the product of standard normals.
        let x = [0.3, -1.2, 2.0];
        let expected: f64 = x.iter().map(|v| -0.5 * v * v - 0.5 * (2.0 * PI).ln()).sum();
        assert_abs_diff_eq!(m.log_density(&x), expected, epsilon = 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(gaussian_mv_cnd(&bad, &NormSpec::l2(2).unwrap()).is_err());
    }

    #[test]
    fn uniform_cube_examples() {
        let m = uniform_cube_cnd(0.1, &NormSpec::linf(3).unwrap()).unwrap();
        assert_eq!(m.worst_shift(), &[1.0; 3]);
        assert_eq!(m.worst_shift_result().objective, 0.9f64.powi(3));
        let m = uniform_cube_cnd(0.3, &NormSpec::l2(1).unwrap()).unwrap();
        let expected = make_eps_delta(0.0, 0.3).unwrap();
        assert!(m.target_f().max_abs_diff(&expected, &alpha_grid(201)) < 1e-15);
        assert!(uniform_cube_cnd(1.5, &NormSpec::linf(2).unwrap()).is_err());
    }

    #[test]
    fn approx_dp_split() {
        let s = equal_delta_split(0.19, 2);
        assert_abs_diff_eq!(s[0], 0.1, epsilon = 1e-15);
        let m = approx_dp_cnd(1.0, 0.19, 2).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(
            m.target_f().family_tag(),
            FamilyTag::EpsDelta {
                eps: 1.0,
                delta: 0.19
            }
        );
        let one = approx_dp_cnd(1.0, 0.05, 1).unwrap();
        assert_abs_diff_eq!(
            match one.kind() {
                MvKind::ApproxDp { deltas, .. } => deltas[0],
                _ => unreachable!(),
            },
            0.05,
            epsilon = 1e-15
        );
        // Small δ approaches the pure-DP curve.
        let tiny = approx_dp_cnd(1.0, 1e-9, 1).unwrap();
        let pure = make_eps_delta(1.0, 0.0).unwrap();
        assert!(tiny.target_f().max_abs_diff(&pure, &alpha_grid(201)) < 1e-8);
        assert!(approx_dp_cnd(0.0, 0.1, 1).is_err());
        assert!(approx_dp_cnd(1.0, 0.0, 1).is_err());
        assert!(approx_dp_cnd(1.0, 0.1, 0).is_err());
    }

    #[test]
    fn linf_density() {
        // d = 1 is Laplace(0, 1/ε).
        let m = linf_mechanism(2.0, 1).unwrap();
        for x in [-1.5, 0.0, 0.4] {
            assert_abs_diff_eq!(
                m.density(&[x]),
                (2.0f64 * (-2.0 * x.abs()).exp()) / 2.0,
                epsilon = 1e-15
            );
        }
        // 2-d iterated Simpson quadrature over [-30/ε, 30/ε]² with ε = 1,
        // split at the kinks y = ±|x| and x = 0.
        let m = linf_mechanism(1.0, 2).unwrap();
        let simpson = |g: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize| {
            let h = (b - a) / n as f64;
            let mut s = g(a) + g(b);
            for i in 1..n {
                s += g(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let lim = 30.0;
        let inner = |x: f64| {
            let g = |y: f64| m.density(&[x, y]);
            let k = x.abs();
            simpson(&g, -lim, -k, 400) + simpson(&g, -k, k, 400) + simpson(&g, k, lim, 400)
        };
        let total = simpson(&inner, -lim, 0.0, 4000) + simpson(&inner, 0.0, lim, 4000);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
        assert!(linf_mechanism(0.0, 2).is_err());
        assert!(linf_mechanism(1.0, 0).is_err());
    }

    #[test]
    fn linf_plrv_branches() {
        assert_eq!(linf_plrv(&[0.0, 0.0], 1.5), 1.5);
        assert_eq!(linf_plrv(&[1.5, 0.5], 1.5), -1.5);
        assert_eq!(linf_plrv(&[0.75, 0.25, 0.5], 1.5), 0.0);
        assert_eq!(linf_plrv(&[3.0, 0.0], 1.0), -1.0);
    }
}
