use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "dynmmsbm", version, about = "Dynamic mixed-membership stochastic blockmodel")]
pub struct Cli {
    /// RNG seed. Required, here or in the config file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores). Defaults to $DYNMMSBM_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML or JSON file whose keys are the long flag names.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw a synthetic dynamic network from a preset.
    Simulate(SimulateArgs),
    /// Fit a model by batch (vem) or stochastic (svi) variational inference.
    Fit(FitArgs),
    /// Fitted edge probabilities for every modeled dyad.
    Predict(PredictArgs),
    /// Edge probabilities for future periods.
    Forecast(ForecastArgs),
    /// Counterfactual effect of shifting a monadic covariate.
    Effects(EffectsArgs),
    /// AUROC of a scored prediction file.
    EvalAuroc(EvalAurocArgs),
    /// Refit over expanding windows, warm-starting each from the last.
    OnlineFit(OnlineFitArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetName {
    Easy,
    Medium,
    Hard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineName {
    Vem,
    Svi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountNormName {
    Exact,
    TwicePeriodSize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AggregateName {
    Overall,
    Node,
    NodeYear,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct DataArgs {
    /// Directory holding edges.csv and optionally monadic.csv, dyadic.csv.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub monadic: Option<PathBuf>,
    #[arg(long)]
    pub dyadic: Option<PathBuf>,
    #[arg(long)]
    pub undirected: bool,
    /// Treat every unlisted pair of present nodes as a non-edge.
    #[arg(long)]
    pub dense: bool,
    #[arg(long)]
    pub no_intercept: bool,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ModelArgs {
    /// Number of latent groups.
    #[arg(short = 'k', long)]
    pub groups: Option<usize>,
    /// Number of hidden Markov states.
    #[arg(short = 'm', long)]
    pub states: Option<usize>,
    /// Dirichlet concentration on transition rows.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, value_enum)]
    pub count_norm: Option<CountNormName>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct InitArgs {
    #[arg(long)]
    pub kmeans_restarts: Option<usize>,
    /// Initial weight on each node's spectral cluster.
    #[arg(long)]
    pub init_concentration: Option<f64>,
    /// Allow the relaxed (assignment-problem) label alignment for large K.
    #[arg(long)]
    pub relaxed_align: bool,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct VemArgs {
    /// Absolute hyperparameter-change tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Quasi-Newton iterations per M-step.
    #[arg(long)]
    pub inner_iters: Option<usize>,
    /// Compute standard errors after fitting.
    #[arg(long)]
    pub se: bool,
    #[arg(long)]
    pub se_samples: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SviArgs {
    #[arg(long)]
    pub batch_nodes: Option<usize>,
    #[arg(long)]
    pub rho_tau: Option<f64>,
    #[arg(long)]
    pub rho_p: Option<f64>,
    /// Constant step size in (0, 1], replacing the decaying schedule.
    #[arg(long)]
    pub rho_const: Option<f64>,
    /// Fraction of dyads held out for scoring.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub tol_holdout: Option<f64>,
    #[arg(long)]
    pub tol_window: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub periods: Option<usize>,
    /// Number of leading periods spent in the first state.
    #[arg(long)]
    pub switch_after: Option<usize>,
    #[arg(long)]
    pub undirected: bool,
    /// Run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum)]
    pub engine: Option<EngineName>,
    #[command(flatten)]
    #[serde(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub vem: VemArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub svi: SviArgs,
    /// Ground-truth file from `simulate`; defaults to truth.json in --data.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// CSV of `node,step,<monadic columns>` for forecast steps 1..horizon.
    #[arg(long)]
    pub future_monadic: Option<PathBuf>,
    /// CSV of `sender,receiver,step,<dyadic columns>`.
    #[arg(long)]
    pub future_dyadic: Option<PathBuf>,
    /// Fail instead of reusing last observed covariates when rows are missing.
    #[arg(long)]
    pub no_carry_forward: bool,
    /// Dyadic "periods since last edge" column updated from sampled edges.
    #[arg(long)]
    pub ar_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct EffectsArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    /// Monadic covariate to shift.
    #[arg(long)]
    pub column: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub cap: Option<f64>,
    #[arg(long, value_enum)]
    pub aggregate: Option<AggregateName>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct EvalAurocArgs {
    /// CSV with a 0/1 label column and a score column.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub score_column: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct OnlineFitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub init: InitArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub vem: VemArgs,
    /// Comma-separated window ends (numbers of leading periods).
    #[arg(long)]
    pub windows: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
