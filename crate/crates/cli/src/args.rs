//! Command-line arguments. Every subcommand's argument struct is also the
//! resolved configuration embedded in its report, so output destinations
//! and `--jobs` are skipped during serialization.

use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand};
use regionvar::learners::LOGISTIC_C_GRID;
use regionvar::LearnerSpec;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "regionvar", version, about = "Find regions of the input space where decision-makers disagree")]
pub struct Cli {
    /// Flat `key = value` file; flags given on the command line override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (0 = all cores). Results do not depend on this.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic dataset with a known region, plus its truth sidecar.
    #[command(args_override_self = true)]
    Generate(GenerateArgs),
    /// Learn a region and agent grouping on a dataset.
    #[command(args_override_self = true)]
    Discover(DiscoverArgs),
    /// Choose beta by permutation p-values.
    #[command(args_override_self = true)]
    TuneBeta(TuneBetaArgs),
    /// Split, tune, discover, and benchmark the region on held-out rows.
    #[command(args_override_self = true)]
    Validate(ValidateArgs),
    /// Run the direct-model baseline on the same split as `validate`.
    #[command(args_override_self = true)]
    Baseline(BaselineArgs),
    /// Score a region (learned or external) against a truth sidecar.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Re-run discovery on agent-stratified folds and report consistency.
    #[command(args_override_self = true)]
    Stability(StabilityArgs),
}

fn parse_learner(s: &str) -> Result<LearnerSpec, String> {
    s.parse().map_err(|e: regionvar::Error| e.to_string())
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV with one header row.
    #[arg(long, value_name = "CSV")]
    pub data: PathBuf,
    #[arg(long, default_value = "agent")]
    pub agent_col: String,
    #[arg(long, default_value = "decision")]
    pub decision_col: String,
    /// Comma-separated feature columns [default: every other column].
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub feature_cols: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RegionArgs {
    /// Region model `h`, as `kind[:key=value,...]`: `tree:leaf=25,depth=4`,
    /// `ridge:alpha=1`, `forest:trees=100,leaf=25`, `logistic:c=1`.
    #[arg(long, default_value = "tree:leaf=25", value_parser = parse_learner)]
    pub region: LearnerSpec,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Features the outcome model sees but the region model does not.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub exclude_features: Vec<String>,
    /// Fit `f`, the grouping and `h` on disjoint thirds of the rows.
    #[arg(long)]
    pub sample_split: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenerateArgs {
    /// Directory for `data.csv`, `truth.json` and `generate.json`.
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    pub out_dir: PathBuf,
    /// Rows to draw when features are synthetic.
    #[arg(long, default_value_t = 4500)]
    pub rows: usize,
    #[arg(long, default_value_t = 40)]
    pub agents: usize,
    /// Number of agent groups; more than 2 spreads coefficients over [-c, c].
    #[arg(long, default_value_t = 2)]
    pub groups: usize,
    /// Alternative-policy coefficient `c` on the region indicator.
    #[arg(long, default_value_t = 1.5)]
    pub coefficient: f64,
    /// `drug`, `misdemeanor`, or a rule such as `misdemeanor == 1 && age <= 35`.
    #[arg(long, default_value = "drug")]
    pub rule: String,
    /// Reuse the features of this CSV and fit the base policy to its decisions.
    #[arg(long, value_name = "CSV")]
    pub seed_data: Option<PathBuf>,
    #[arg(long, default_value = "agent")]
    pub seed_agent_col: String,
    #[arg(long, default_value = "decision")]
    pub seed_decision_col: String,
    /// Feature columns of `--seed-data` [default: every other column].
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub seed_feature_cols: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DiscoverArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    /// Outcome model `f`, same syntax as `--region`.
    #[arg(long, default_value = "logistic:c=1", value_parser = parse_learner)]
    pub outcome: LearnerSpec,
    #[command(flatten)]
    pub region: RegionArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON path; `-` writes to stdout.
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Also write the region (model, threshold, normalization, grouping) here.
    #[arg(long, value_name = "JSON")]
    #[serde(skip)]
    pub region_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TuneBetaArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated beta candidates [default: 0.02, 0.06, ..., 0.42].
    #[arg(long, value_delimiter = ',', action = ArgAction::Set)]
    pub candidates: Vec<f64>,
    /// Null permutations per candidate.
    #[arg(long, default_value_t = regionvar::tuning::DEFAULT_PERMUTATIONS)]
    pub permutations: usize,
    #[arg(long, default_value = "logistic:c=1", value_parser = parse_learner)]
    pub outcome: LearnerSpec,
    #[command(flatten)]
    pub region: RegionArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: PathBuf,
    /// CSV of the p-value curve, one row per candidate.
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    /// Logistic C grid for the outcome model, tuned by validation AUC.
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = LOGISTIC_C_GRID)]
    pub c_grid: Vec<f64>,
    #[command(flatten)]
    pub region: RegionArgs,
    /// Random test subsets in the significance benchmark.
    #[arg(long, default_value_t = regionvar::validation::DEFAULT_N_RANDOM)]
    pub n_random: usize,
    /// Truth sidecar; adds region and partition metrics.
    #[arg(long, value_name = "JSON")]
    pub truth: Option<PathBuf>,
    /// `R` for the eta diagnostic; give all of `--eta-r`, `--eta-alpha`, `--eta-omega`.
    #[arg(long)]
    pub eta_r: Option<f64>,
    #[arg(long)]
    pub eta_alpha: Option<f64>,
    #[arg(long)]
    pub eta_omega: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: PathBuf,
    /// CSV of `(row_id, score)` for the test rows.
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    #[arg(long, value_delimiter = ',', action = ArgAction::Set, default_values_t = LOGISTIC_C_GRID)]
    pub c_grid: Vec<f64>,
    /// Semicolon-separated region learners tuned by validation MSE
    /// [default: ridge over alpha 0.01, 0.1, 1, 10, 100].
    #[arg(long, value_delimiter = ';', action = ArgAction::Set, value_parser = parse_learner)]
    pub region_grid: Vec<LearnerSpec>,
    #[arg(long, value_name = "JSON")]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_name = "CSV")]
    #[serde(skip)]
    pub scores_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_name = "JSON")]
    pub truth: PathBuf,
    /// Region file written by `discover --region-out`.
    #[arg(long, value_name = "JSON", conflicts_with = "scores", required_unless_present = "scores")]
    pub region_file: Option<PathBuf>,
    /// External `(row_id, score)` CSV, with 0-based data row ids. Only the listed
    /// rows are scored; rows with `score >= cutoff` form the region.
    #[arg(long, value_name = "CSV", requires = "cutoff")]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 0.2)]
    pub beta: f64,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value = "logistic:c=1", value_parser = parse_learner)]
    pub outcome: LearnerSpec,
    #[command(flatten)]
    pub region: RegionArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "-")]
    #[serde(skip)]
    pub out: PathBuf,
}
