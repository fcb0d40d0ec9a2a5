// SPDX-License-Identifier: Apache-2.0

use anyhow::{anyhow, bail, ensure, Context, Result};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use cnd_core::multivariate::random_ball_shifts;
use cnd_core::rng::derive_seed;
use cnd_core::tradeoff::alpha_grid;
use cnd_core::verify::parallel_draws;
use cnd_core::{
    approx_dp_cnd, construct_cnd, gaussian_cnd, gaussian_mv_cnd, iid_l1_cnd, laplace_cnd,
    linf_mechanism, logconcave_limit, make_eps_delta, make_gdp, make_laplace_tf, product_cnd,
    scale_group, tulap, uniform_cnd, uniform_cube_cnd, verify_cnd, verify_mv_cnd, Cnd,
    DivisibleFamily, McConfig, MvCnd, NormSpec, Suite, TradeoffFunction, VERSION,
};

use crate::args::{
    Cli, CndCommand, CndKindArg, CndSpec, Command, Family, FamilyParams, LimitFamily, MvCommand,
    MvKindArg, MvSpec, NormArg, SuiteArg,
};
use crate::output::{emit, Artifact};

/// What a command produced: its artifacts, metadata for the provenance
/// header, and whether every check passed.
struct Outcome {
    artifacts: Vec<Artifact>,
    metadata: Option<Value>,
    pass: bool,
}

impl Outcome {
    fn of(artifact: Artifact) -> Self {
        Self {
            artifacts: vec![artifact],
            metadata: None,
            pass: true,
        }
    }
}

/// Runs the parsed command; `Ok(false)` means a verification failed.
pub fn run(cli: &Cli) -> Result<bool> {
    let rc = &cli.run;
    ensure!(
        rc.n_mc >= 1000,
        "--n must be at least 1000, got {}",
        rc.n_mc
    );
    ensure!(rc.grid_points >= 2, "--grid-points must be at least 2");
    ensure!(
        rc.level > 0.0 && rc.level < 1.0,
        "--level must lie in (0, 1)"
    );
    let mc = McConfig {
        n: rc.n_mc,
        seed: rc.seed,
        level: rc.level,
        grid_points: rc.grid_points,
    };
    let outcome = match &cli.command {
        Command::Tradeoff(a) => tradeoff_cmd(&tradeoff_of(a.family, &a.params)?, rc.grid_points),
        Command::Cnd(c) => cnd_cmd(c, &mc)?,
        Command::Mv(c) => mv_cmd(c, &mc)?,
        Command::Report(r) => report_cmd(r.suite, rc.seed)?,
    };
    let mut provenance = json!({
        "seed": rc.seed,
        "version": VERSION,
        "config": { "run": rc, "command": &cli.command },
    });
    if let Some(m) = outcome.metadata {
        provenance["metadata"] = m;
    }
    emit(
        &outcome.artifacts,
        &provenance,
        rc.format,
        rc.output_dir.as_deref(),
    )?;
    Ok(outcome.pass)
}

fn need(v: Option<f64>, flag: &str, what: &str) -> Result<f64> {
    v.ok_or_else(|| anyhow!("{what} needs --{flag}"))
}

fn tradeoff_of(family: Family, p: &FamilyParams) -> Result<TradeoffFunction> {
    Ok(match family {
        Family::EpsDelta => {
            make_eps_delta(need(p.eps, "eps", "eps-delta")?, p.delta.unwrap_or(0.0))?
        }
        Family::Gdp => make_gdp(need(p.mu, "mu", "gdp")?)?,
        Family::Laplace => make_laplace_tf(need(p.eps, "eps", "laplace")?)?,
    })
}

fn tradeoff_cmd(f: &TradeoffFunction, points: usize) -> Outcome {
    let mut table = String::from("alpha,beta\n");
    for a in alpha_grid(points) {
        table.push_str(&format!("{a},{}\n", f.eval(a)));
    }
    Outcome {
        metadata: Some(json!({ "tradeoff": f.family_tag() })),
        ..Outcome::of(Artifact::csv("tradeoff", table))
    }
}

fn cnd_of(spec: &CndSpec) -> Result<Cnd> {
    let p = &spec.params;
    let base = match (spec.kind, spec.f) {
        (None | Some(CndKindArg::Constructed), Some(f)) => construct_cnd(&tradeoff_of(f, p)?)?,
        (Some(CndKindArg::Constructed), None) => bail!("--kind constructed needs --f"),
        (Some(_), Some(_)) => bail!("use either --kind or --f, not both"),
        (None, None) => bail!("select a distribution with --kind or --f"),
        (Some(CndKindArg::Tulap), None) => tulap(need(p.eps, "eps", "tulap")?)?,
        (Some(CndKindArg::Gaussian), None) => gaussian_cnd(need(p.mu, "mu", "gaussian")?)?,
        (Some(CndKindArg::Laplace), None) => laplace_cnd(need(p.eps, "eps", "laplace")?)?,
        (Some(CndKindArg::Uniform), None) => uniform_cnd(need(p.delta, "delta", "uniform")?)?,
    };
    Ok(match spec.group_k {
        Some(k) => scale_group(&base, k)?,
        None => base,
    })
}

fn x_grid(xmax: f64, points: usize) -> Result<Vec<f64>> {
    ensure!(xmax > 0.0 && xmax.is_finite(), "--xmax must be positive");
    ensure!(points >= 2, "--points must be at least 2");
    Ok((0..points)
        .map(|i| -xmax + 2.0 * xmax * i as f64 / (points - 1) as f64)
        .collect())
}

fn cnd_cmd(cmd: &CndCommand, mc: &McConfig) -> Result<Outcome> {
    Ok(match cmd {
        CndCommand::Build { spec, xmax, points } => {
            let cnd = cnd_of(spec)?;
            Outcome {
                metadata: Some(cnd.metadata()),
                ..Outcome::of(Artifact::csv(
                    "cnd_build",
                    cnd.to_csv(&x_grid(*xmax, *points)?),
                ))
            }
        }
        CndCommand::Sample { spec } => {
            let cnd = cnd_of(spec)?;
            let draws = parallel_draws(mc.n, mc.seed, 0, |rng| Ok(cnd.sample(rng)))?;
            let mut table = String::from("x\n");
            for x in draws {
                table.push_str(&format!("{x}\n"));
            }
            Outcome {
                metadata: Some(cnd.metadata()),
                ..Outcome::of(Artifact::csv("cnd_samples", table))
            }
        }
        CndCommand::Verify { spec, m_grid } => {
            let cnd = cnd_of(spec)?;
            let report = verify_cnd(&cnd, cnd.source_f(), m_grid, mc)?;
            Outcome {
                pass: report.all_pass(),
                ..Outcome::of(Artifact::json("cnd_verify", report.to_json_value()))
            }
        }
        CndCommand::Limit {
            family,
            params,
            gap,
            xmax,
            points,
        } => {
            let fam = match family {
                LimitFamily::Gdp => DivisibleFamily::gdp(need(params.mu, "mu", "gdp")?)?,
                LimitFamily::Laplace => {
                    DivisibleFamily::laplace(need(params.eps, "eps", "laplace")?)?
                }
                LimitFamily::ZeroDelta => {
                    DivisibleFamily::zero_delta(need(params.delta, "delta", "zero-delta")?)?
                }
            };
            let (cnd, diag) = logconcave_limit(&fam, *gap)?;
            Outcome {
                metadata: Some(json!({ "cnd": cnd.metadata(), "diagnostics": diag })),
                pass: diag.converged,
                ..Outcome::of(Artifact::csv(
                    "cnd_limit",
                    cnd.to_csv(&x_grid(*xmax, *points)?),
                ))
            }
        }
    })
}

/// `identity` (with `dim`), `diag:a,b,...` or `rows:a,b;c,d`.
fn parse_sigma(s: &str, dim: Option<usize>) -> Result<DMatrix<f64>> {
    let nums = |t: &str| -> Result<Vec<f64>> {
        t.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad number {v:?} in --sigma"))
            })
            .collect()
    };
    if s == "identity" {
        let d = dim.ok_or_else(|| anyhow!("--sigma identity needs --dim"))?;
        return Ok(DMatrix::identity(d, d));
    }
    if let Some(rest) = s.strip_prefix("diag:") {
        return Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(nums(
            rest,
        )?)));
    }
    if let Some(rest) = s.strip_prefix("rows:") {
        let rows: Vec<Vec<f64>> = rest.split(';').map(nums).collect::<Result<_>>()?;
        let d = rows.len();
        ensure!(
            rows.iter().all(|r| r.len() == d),
            "--sigma rows must form a square matrix"
        );
        return Ok(DMatrix::from_fn(d, d, |i, j| rows[i][j]));
    }
    bail!("--sigma must be identity, diag:... or rows:...")
}

fn norm_of(arg: Option<NormArg>, dim: usize) -> Result<NormSpec> {
    Ok(match arg.unwrap_or(NormArg::Linf) {
        NormArg::L1 => NormSpec::l1(dim)?,
        NormArg::L2 => NormSpec::l2(dim)?,
        NormArg::Linf => NormSpec::linf(dim)?,
    })
}

/// `tulap:ε`, `gaussian:μ`, `laplace:ε` or `uniform:δ`.
fn parse_component(s: &str) -> Result<Cnd> {
    let (name, value) = s
        .split_once(':')
        .ok_or_else(|| anyhow!("component {s:?} must look like name:value"))?;
    let v: f64 = value
        .parse()
        .with_context(|| format!("bad parameter in component {s:?}"))?;
    Ok(match name {
        "tulap" => tulap(v)?,
        "gaussian" => gaussian_cnd(v)?,
        "laplace" => laplace_cnd(v)?,
        "uniform" => uniform_cnd(v)?,
        _ => bail!("unknown component {name:?}; expected tulap, gaussian, laplace or uniform"),
    })
}

fn mv_of(spec: &MvSpec) -> Result<MvCnd> {
    let dim = |what| spec.dim.ok_or_else(|| anyhow!("{what} needs --dim"));
    Ok(match spec.kind {
        MvKindArg::Linf => linf_mechanism(need(spec.eps, "eps", "linf")?, dim("linf")?)?,
        MvKindArg::Gauss => {
            let sigma = parse_sigma(&spec.sigma, spec.dim)?;
            if let Some(d) = spec.dim {
                ensure!(d == sigma.nrows(), "--dim {d} does not match --sigma");
            }
            gaussian_mv_cnd(&sigma, &norm_of(spec.norm, sigma.nrows())?)?
        }
        MvKindArg::ApproxDp => approx_dp_cnd(
            need(spec.eps, "eps", "approx-dp")?,
            need(spec.delta, "delta", "approx-dp")?,
            spec.k.unwrap_or(1),
        )?,
        MvKindArg::Uniform => {
            let d = dim("uniform")?;
            uniform_cube_cnd(
                need(spec.delta, "delta", "uniform")?,
                &norm_of(spec.norm, d)?,
            )?
        }
        MvKindArg::Product => {
            ensure!(!spec.components.is_empty(), "product needs --components");
            let cnds: Vec<Cnd> = spec
                .components
                .iter()
                .map(|c| parse_component(c))
                .collect::<Result<_>>()?;
            product_cnd(&cnds)?
        }
        MvKindArg::IidL1 => {
            let first = spec
                .components
                .first()
                .ok_or_else(|| anyhow!("iid-l1 needs --components with one component"))?;
            let k = spec.k.ok_or_else(|| anyhow!("iid-l1 needs --k"))?;
            iid_l1_cnd(&parse_component(first)?, k)?
        }
    })
}

fn mv_cmd(cmd: &MvCommand, mc: &McConfig) -> Result<Outcome> {
    Ok(match cmd {
        MvCommand::Build { spec } => {
            Outcome::of(Artifact::json("mv_build", mv_of(spec)?.metadata()))
        }
        MvCommand::Sample { spec } => {
            let m = mv_of(spec)?;
            let draws = m.sample_n(mc.n, mc.seed);
            Outcome {
                metadata: Some(m.metadata()),
                ..Outcome::of(Artifact::csv("mv_samples", m.samples_csv(&draws)))
            }
        }
        MvCommand::Verify { spec, shifts } => {
            let m = mv_of(spec)?;
            let shifts = random_ball_shifts(m.norm(), *shifts, derive_seed(mc.seed, 1));
            let report = verify_mv_cnd(&m, &shifts, mc)?;
            Outcome {
                pass: report.all_pass(),
                ..Outcome::of(Artifact::json("mv_verify", report.to_json_value()))
            }
        }
    })
}

fn report_cmd(suite: SuiteArg, seed: u64) -> Result<Outcome> {
    let (suite, stem) = match suite {
        SuiteArg::Acceptance => (Suite::Acceptance, "report_acceptance"),
        SuiteArg::Inequalities => (Suite::Inequalities, "report_inequalities"),
        SuiteArg::Limits => (Suite::Limits, "report_limits"),
    };
    let report = suite.run(seed)?;
    Ok(Outcome {
        pass: report.all_pass(),
        ..Outcome::of(Artifact::json(stem, report.to_json_value()))
    })
}
