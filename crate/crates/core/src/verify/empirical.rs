// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{precondition, CndError, Result};
use crate::rng::{stream_chunks, stream_rng, StreamRng, MC_STREAMS};
use crate::tradeoff::alpha_grid;

/// Smallest Monte-Carlo sample size accepted by [`empirical_tradeoff`].
pub const MIN_MC_SAMPLES: usize = 10_000;

/// Monte-Carlo settings shared by the verification routines.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct McConfig {
    /// Draws per hypothesis.
    pub n: usize,
    pub seed: u64,
    /// Confidence level `η` of the uniform band.
    pub level: f64,
    /// Number of points of the α-grid.
    pub grid_points: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n: 100_000,
            seed: 0,
            level: 0.01,
            grid_points: 201,
        }
    }
}

impl McConfig {
    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "n": self.n,
            "seed": self.seed,
            "level": self.level,
            "grid_points": self.grid_points,
        })
    }
}

/// How an [`EmpiricalTradeoff`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EstimateMethod {
    /// Two seeded sample streams; `band` is the DKW half-width.
    MonteCarlo,
    /// Discretized privacy-loss convolution; `band` is the error bound.
    PldGrid,
}

/// Estimated tradeoff curve on an α-grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalTradeoff {
    pub alphas: Vec<f64>,
    /// Lower convex hull of the raw curve, evaluated on `alphas`.
    pub betas: Vec<f64>,
    /// Curve before convex cleanup.
    pub raw_betas: Vec<f64>,
    pub band: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub method: EstimateMethod,
}

impl EmpiricalTradeoff {
    /// Builds the estimate from the ROC vertices `(α, β)`, which must start
    /// at `(0,0)`, end at `(1,1)` and be non-decreasing in both coordinates.
    pub(crate) fn from_vertices(
        vertices: &[(f64, f64)],
        alphas: &[f64],
        band: f64,
        n_samples: usize,
        seed: u64,
        method: EstimateMethod,
    ) -> Self {
        let hull = lower_hull(vertices);
        let raw_betas = alphas.iter().map(|&a| eval_curve(vertices, a)).collect();
        let betas = alphas.iter().map(|&a| eval_curve(&hull, a)).collect();
        Self {
            alphas: alphas.to_vec(),
            betas,
            raw_betas,
            band,
            n_samples,
            seed,
            method,
        }
    }

    /// Linear interpolation of the cleaned curve.
    pub fn eval(&self, alpha: f64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .alphas
            .iter()
            .copied()
            .zip(self.betas.iter().copied())
            .collect();
        eval_curve(&pts, alpha.clamp(0.0, 1.0))
    }

    /// Largest amount by which the raw curve lies above the cleaned one.
    pub fn cleanup_gap(&self) -> f64 {
        self.raw_betas
            .iter()
            .zip(&self.betas)
            .map(|(r, b)| r - b)
            .fold(0.0, f64::max)
    }

    /// CSV with columns `alpha,beta_hat,band`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta_hat,band\n");
        for (a, b) in self.alphas.iter().zip(&self.betas) {
            let _ = writeln!(out, "{a},{b},{}", self.band);
        }
        out
    }
}

/// DKW half-width `√(ln(2/η) / (2n))`.
pub fn dkw_band(n: usize, level: f64) -> f64 {
    ((2.0 / level).ln() / (2.0 * n as f64)).sqrt()
}

/// Runs `draw` `n` times split over the fixed stream partition, streams
/// numbered from `first_stream`. Output order follows stream order, so the
/// result does not depend on the thread pool.
pub fn parallel_draws<T, F>(n: usize, seed: u64, first_stream: u64, draw: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Result<T> + Sync,
{
    let parts: Vec<Result<Vec<T>>> = stream_chunks(n)
        .into_par_iter()
        .map(|(stream, count)| {
            let mut rng = stream_rng(seed, first_stream + stream);
            (0..count).map(|_| draw(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Privacy loss `log q - log p` with the support conventions: `q = 0` gives
/// `-∞`, `p = 0 < q` gives `+∞`.
pub(crate) fn plrv(log_q: f64, log_p: f64) -> Result<f64> {
    if log_q.is_nan() || log_p.is_nan() {
        return Err(CndError::Density("log density is NaN".into()));
    }
    if log_q == f64::NEG_INFINITY {
        if log_p == f64::NEG_INFINITY {
            return Err(CndError::Density(
                "sample lies outside both supports".into(),
            ));
        }
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_q - log_p)
}

/// Estimates `T(X, X + shift)` from seeded draws of `X`.
///
/// Null draws use streams `0..16`, alternative draws streams `16..32`. Each
/// draw is reduced to its privacy loss `log g(x - shift) - log g(x)` and the
/// curve is traced by sweeping a threshold over the pooled losses; ties are
/// broken by randomization, i.e. consecutive ROC vertices are joined
/// linearly.
pub fn empirical_tradeoff<S, L>(
    sample: S,
    log_density: L,
    shift: &[f64],
    cfg: &McConfig,
) -> Result<EmpiricalTradeoff>
where
    S: Fn(&mut StreamRng) -> Vec<f64> + Sync,
    L: Fn(&[f64]) -> f64 + Sync,
{
    if cfg.n < MIN_MC_SAMPLES {
        return Err(precondition(format!(
            "need at least {MIN_MC_SAMPLES} draws, got {}",
            cfg.n
        )));
    }
    let null = parallel_draws(cfg.n, cfg.seed, 0, |rng| {
        let x = sample(rng);
        let moved: Vec<f64> = x.iter().zip(shift).map(|(a, v)| a - v).collect();
        plrv(log_density(&moved), log_density(&x))
    })?;
    let alt = parallel_draws(cfg.n, cfg.seed, MC_STREAMS, |rng| {
        let x = sample(rng);
        let moved: Vec<f64> = x.iter().zip(shift).map(|(a, v)| a + v).collect();
        plrv(log_density(&x), log_density(&moved))
    })?;
    Ok(tradeoff_from_losses(null, alt, cfg))
}

/// Losses are snapped to this grid so that atoms of the privacy loss, which
/// rounding spreads over a few ulps, stay tied across both samples.
const LOSS_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

fn snap(loss: f64) -> f64 {
    if loss.is_finite() {
        (loss / LOSS_QUANTUM).round() * LOSS_QUANTUM
    } else {
        loss
    }
}

/// Tradeoff estimate from privacy losses observed under the null and the
/// alternative. Small losses favour the null.
pub fn tradeoff_from_losses(null: Vec<f64>, alt: Vec<f64>, cfg: &McConfig) -> EmpiricalTradeoff {
    let mut null: Vec<f64> = null.into_iter().map(snap).collect();
    let mut alt: Vec<f64> = alt.into_iter().map(snap).collect();
    null.sort_by(f64::total_cmp);
    alt.sort_by(f64::total_cmp);
    let (n0, n1) = (null.len() as f64, alt.len() as f64);
    let mut vertices = vec![(0.0, 0.0)];
    let (mut i, mut j) = (0, 0);
    while i < null.len() || j < alt.len() {
        let t = match (null.get(i), alt.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < null.len() && null[i] <= t {
            i += 1;
        }
        while j < alt.len() && alt[j] <= t {
            j += 1;
        }
        vertices.push((i as f64 / n0, j as f64 / n1));
    }
    let n = null.len().min(alt.len());
    EmpiricalTradeoff::from_vertices(
        &vertices,
        &alpha_grid(cfg.grid_points),
        dkw_band(n, cfg.level),
        n,
        cfg.seed,
        EstimateMethod::MonteCarlo,
    )
}

/// Lower convex hull of points sorted by `α`.
pub(crate) fn lower_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &p in points {
        while hull.len() >= 2 {
            let (o, a) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (a.0 - o.0) * (p.1 - o.1) - (a.1 - o.1) * (p.0 - o.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        if let Some(&last) = hull.last() {
            if last.0 == p.0 && last.1 <= p.1 {
                continue;
            }
        }
        hull.push(p);
    }
    hull
}

/// Evaluates a monotone polyline at `alpha`; on vertical segments the
/// lowest `β` is returned.
pub(crate) fn eval_curve(points: &[(f64, f64)], alpha: f64) -> f64 {
    let k = points.partition_point(|p| p.0 < alpha);
    if k == points.len() {
        return points[k - 1].1;
    }
    if points[k].0 == alpha || k == 0 {
        return points[k].1;
    }
    let (a0, b0) = points[k - 1];
    let (a1, b1) = points[k];
    b0 + (b1 - b0) * (alpha - a0) / (a1 - a0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnd::{gaussian_cnd, tulap};
    use crate::tradeoff::{make_eps_delta, make_gdp};

    fn cfg(seed: u64) -> McConfig {
        McConfig {
            seed,
            ..McConfig::default()
        }
    }

    #[test]
    fn dkw_band_value() {
        // √(ln 200 / 2e5)
        assert!((dkw_band(100_000, 0.01) - 0.005_146_997).abs() < 1e-8);
    }

    #[test]
    fn hull_and_eval() {
        let pts: [(f64, f64); 5] = [(0.0, 0.0), (0.5, 0.3), (0.5, 0.4), (0.6, 0.2), (1.0, 1.0)];
        let mut sorted = pts.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let hull = lower_hull(&sorted);
        assert_eq!(hull, vec![(0.0, 0.0), (0.6, 0.2), (1.0, 1.0)]);
        assert!((eval_curve(&hull, 0.3) - 0.1).abs() < 1e-15);
        assert_eq!(
            eval_curve(&[(0.0, 0.0), (0.5, 0.1), (0.5, 0.3), (1.0, 1.0)], 0.5),
            0.1
        );
    }

    #[test]
    fn tulap_matches_pure_dp() {
        let t = tulap(1.0).unwrap();
        let est = empirical_tradeoff(
            |rng| vec![t.sample(rng)],
            |x| t.log_density(x[0]),
            &[1.0],
            &cfg(3),
        )
        .unwrap();
        let f = make_eps_delta(1.0, 0.0).unwrap();
        for (a, b) in est.alphas.iter().zip(&est.betas) {
            assert!((b - f.eval(*a)).abs() <= 2.0 * est.band, "α={a}");
        }
        assert!(est.cleanup_gap() <= est.band);
    }

    #[test]
    fn zero_shift_is_identity() {
        let g = gaussian_cnd(1.0).unwrap();
        let est = empirical_tradeoff(
            |rng| vec![g.sample(rng)],
            |x| g.log_density(x[0]),
            &[0.0],
            &cfg(4),
        )
        .unwrap();
        for (a, b) in est.alphas.iter().zip(&est.betas) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn gaussian_half_shift() {
        let g = gaussian_cnd(1.0).unwrap();
        let est = empirical_tradeoff(
            |rng| vec![g.sample(rng)],
            |x| g.log_density(x[0]),
            &[0.5],
            &cfg(5),
        )
        .unwrap();
        let oracle = make_gdp(0.5).unwrap();
        for (a, b) in est.alphas.iter().zip(&est.betas) {
            assert!((b - oracle.eval(*a)).abs() <= 2.0 * est.band);
        }
    }

    #[test]
    fn reproducible_bytes() {
        let g = gaussian_cnd(2.0).unwrap();
        let run = || {
            let est = empirical_tradeoff(
                |rng| vec![g.sample(rng)],
                |x| g.log_density(x[0]),
                &[1.0],
                &McConfig {
                    n: 20_000,
                    ..cfg(9)
                },
            )
            .unwrap();
            serde_json::to_string(&est).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn small_n_rejected() {
        let g = gaussian_cnd(1.0).unwrap();
        let small = McConfig { n: 100, ..cfg(1) };
        assert!(empirical_tradeoff(
            |rng| vec![g.sample(rng)],
            |x| g.log_density(x[0]),
            &[1.0],
            &small
        )
        .is_err());
    }
}
