// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "cnd",
    version,
    about = "Canonical noise distributions for f-differential privacy"
)]
pub struct Cli {
    #[command(flatten)]
    pub run: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Settings shared by every command and echoed into every artifact.
#[derive(Debug, Args, Serialize)]
pub struct RunConfig {
    /// Master seed of all random streams.
    #[arg(long, global = true, env = "FDP_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Monte-Carlo draws per hypothesis, or draws to emit for `sample`.
    #[arg(long = "n", global = true, default_value_t = 100_000)]
    pub n_mc: usize,
    /// Points of the alpha-grid.
    #[arg(long, global = true, default_value_t = 201)]
    pub grid_points: usize,
    /// Significance level of confidence bands.
    #[arg(long, global = true, default_value_t = 0.01)]
    pub level: f64,
    /// Write artifacts here under fixed file names instead of stdout.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Tabulate a tradeoff function on the alpha-grid.
    Tradeoff(TradeoffArgs),
    /// One-dimensional canonical noise distributions.
    #[command(subcommand)]
    Cnd(CndCommand),
    /// Multivariate canonical noise distributions.
    #[command(subcommand)]
    Mv(MvCommand),
    /// Run a verification suite; exits nonzero if any entry fails.
    Report(ReportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    EpsDelta,
    Gdp,
    Laplace,
}

/// Parameters of a tradeoff function.
#[derive(Debug, Args, Serialize)]
pub struct FamilyParams {
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct TradeoffArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    #[command(flatten)]
    pub params: FamilyParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CndKindArg {
    Tulap,
    Gaussian,
    Laplace,
    Uniform,
    /// Recursion construction for the tradeoff function given by `--f`.
    Constructed,
}

/// Selects a one-dimensional CND: `--kind` for a closed form, or `--f` for
/// the recursion construction.
#[derive(Debug, Args, Serialize)]
pub struct CndSpec {
    #[arg(long, value_enum)]
    pub kind: Option<CndKindArg>,
    #[arg(long = "f", value_enum)]
    pub f: Option<Family>,
    #[command(flatten)]
    pub params: FamilyParams,
    /// Rescale to the CND of the k-fold group composition.
    #[arg(long)]
    pub group_k: Option<u32>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum CndCommand {
    /// Emit `x,cdf,density` on a grid over `[-xmax, xmax]`.
    Build {
        #[command(flatten)]
        spec: CndSpec,
        #[arg(long, default_value_t = 6.0)]
        xmax: f64,
        #[arg(long, default_value_t = 1201)]
        points: usize,
    },
    /// Emit `--n` seeded draws.
    Sample {
        #[command(flatten)]
        spec: CndSpec,
    },
    /// Check the CND properties against the distribution's tradeoff function.
    Verify {
        #[command(flatten)]
        spec: CndSpec,
        /// Shifts for the one-sided dominance checks.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
        m_grid: Vec<f64>,
    },
    /// Log-concave limit CND of a divisible family.
    Limit {
        #[arg(long, value_enum)]
        family: LimitFamily,
        #[command(flatten)]
        params: FamilyParams,
        /// Target sup-gap `sup |alpha - f_s(alpha)|`.
        #[arg(long, default_value_t = 0.01)]
        gap: f64,
        #[arg(long, default_value_t = 6.0)]
        xmax: f64,
        #[arg(long, default_value_t = 1201)]
        points: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitFamily {
    Gdp,
    Laplace,
    ZeroDelta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MvKindArg {
    Linf,
    Gauss,
    ApproxDp,
    Uniform,
    Product,
    IidL1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormArg {
    L1,
    L2,
    Linf,
}

/// Selects a multivariate CND.
#[derive(Debug, Args, Serialize)]
pub struct MvSpec {
    #[arg(long, value_enum)]
    pub kind: MvKindArg,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Uniform coordinates of `approx-dp`, or copies for `iid-l1`.
    #[arg(long)]
    pub k: Option<usize>,
    /// `identity`, `diag:a,b,...` or `rows:a,b;c,d`.
    #[arg(long, default_value = "identity")]
    pub sigma: String,
    #[arg(long, value_enum)]
    pub norm: Option<NormArg>,
    /// Product components such as `tulap:1,uniform:0.1`; the first one is
    /// the `iid-l1` component.
    #[arg(long, value_delimiter = ',')]
    pub components: Vec<String>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum MvCommand {
    /// Emit metadata: kind, norm, worst shift and target.
    Build {
        #[command(flatten)]
        spec: MvSpec,
    },
    /// Emit `--n` seeded draws with header `x1,...,xd`.
    Sample {
        #[command(flatten)]
        spec: MvSpec,
    },
    /// Check the multivariate CND properties.
    Verify {
        #[command(flatten)]
        spec: MvSpec,
        /// Random unit-ball shifts for the dominance checks.
        #[arg(long, default_value_t = 20)]
        shifts: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteArg {
    Acceptance,
    Inequalities,
    Limits,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long, value_enum)]
    pub suite: SuiteArg,
}
