use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use regionvar::baselines::{self, DirectBaselineConfig, EvaluationReport};
use regionvar::data::{load_csv, normalize, write_csv, CsvSchema, NormalizationStats};
use regionvar::discovery::{self, render_region, DiscoverConfig, Region};
use regionvar::learners::Grid;
use regionvar::pipeline::{self, PipelineConfig};
use regionvar::rng::derive_seed;
use regionvar::synthgen::{
    generate_from_features, spread_coefficients, synthetic_features, BasePolicy, RegionRule, SyntheticConfig,
    SyntheticTruth, SYNTHETIC_FEATURES,
};
use regionvar::tuning::{self, config_hash, default_candidates, TuneBetaConfig};
use regionvar::validation::{self, eta_bound};
use regionvar::{Dataset, Error, ErrorKind, Grouping, LearnerSpec};
use serde::{Deserialize, Serialize};

use crate::args::*;

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Config(String),
    Output { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) => match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Computation => 4,
            },
            CliError::Config(_) => 2,
            CliError::Output { .. } => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(m) => write!(f, "{m}"),
            CliError::Output { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Fields shared by every report: the command, its resolved configuration
/// and the sha256 of that configuration's JSON.
#[derive(Serialize)]
struct Report<'a, C: Serialize, B: Serialize> {
    command: &'a str,
    config: &'a C,
    config_hash: String,
    #[serde(flatten)]
    body: B,
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(Error::from)?;
    s.push('\n');
    Ok(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if path == Path::new("-") {
        std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Output {
                path: path.into(),
                source,
            })
    } else {
        std::fs::write(path, text).map_err(|source| CliError::Output {
            path: path.into(),
            source,
        })
    }
}

fn emit<C: Serialize, B: Serialize>(command: &str, config: &C, body: B, out: &Path) -> Result<()> {
    let report = Report {
        command,
        config,
        config_hash: config_hash(config)?,
        body,
    };
    write_text(out, &to_json(&report)?)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::Core(Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

fn header(path: &Path) -> Result<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::Io {
            path: path.into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        },
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers().map_err(Error::Csv)?;
    Ok(headers.iter().map(|h| h.trim().to_string()).collect())
}

fn load(path: &Path, agent_col: &str, decision_col: &str, feature_cols: &[String]) -> Result<Dataset> {
    let feature_cols = if feature_cols.is_empty() {
        header(path)?
            .into_iter()
            .filter(|c| c != agent_col && c != decision_col)
            .collect()
    } else {
        feature_cols.to_vec()
    };
    let schema = CsvSchema {
        agent_col: agent_col.into(),
        decision_col: decision_col.into(),
        feature_cols,
    };
    Ok(load_csv(path, &schema)?)
}

fn load_data(args: &DataArgs) -> Result<Dataset> {
    load(&args.data, &args.agent_col, &args.decision_col, &args.feature_cols)
}

fn load_truth(path: &Path, dataset: &Dataset) -> Result<SyntheticTruth> {
    let truth = SyntheticTruth::from_json(&read_text(path)?)?;
    if truth.region.len() != dataset.len() {
        return Err(CliError::Config(format!(
            "truth {} covers {} rows, dataset has {}",
            path.display(),
            truth.region.len(),
            dataset.len()
        )));
    }
    Ok(truth)
}

fn discover_config(beta: f64, outcome: &LearnerSpec, region: &RegionArgs, seed: u64) -> DiscoverConfig {
    DiscoverConfig {
        beta,
        outcome: outcome.clone(),
        region: region.region.clone(),
        max_iter: region.max_iter,
        exclude_features: region.exclude_features.clone(),
        sample_split: region.sample_split,
        seed,
    }
}

fn write_scores(path: &Path, row_ids: &[usize], scores: &[f64]) -> Result<()> {
    let mut text = String::from("row_id,score\n");
    for (id, s) in row_ids.iter().zip(scores) {
        text.push_str(&format!("{id},{s}\n"));
    }
    write_text(path, &text)
}

pub fn generate(args: &GenerateArgs) -> Result<()> {
    let rule = RegionRule::from_name_or_expr(&args.rule)?;
    if args.groups < 2 {
        return Err(CliError::Config(format!("need at least 2 groups, got {}", args.groups)));
    }
    let group_coefficients = if args.groups == 2 {
        vec![0.0, args.coefficient]
    } else {
        spread_coefficients(args.groups, args.coefficient)
    };
    let cfg = SyntheticConfig {
        n_rows: args.rows,
        n_agents: args.agents,
        rule,
        group_coefficients,
        seed: args.seed,
    };
    let (features, names, base) = match &args.seed_data {
        Some(path) => {
            let seed = load(path, &args.seed_agent_col, &args.seed_decision_col, &args.seed_feature_cols)?;
            let base = BasePolicy::fit(seed.features(), seed.feature_names(), &seed.decisions_f64(), 1.0)
                .map_err(|e| e.context("fitting base policy"))?;
            (seed.features().clone(), seed.feature_names().to_vec(), base)
        }
        None => (
            synthetic_features(args.rows, &mut regionvar::rng::derived_rng(args.seed, &[0])),
            SYNTHETIC_FEATURES.iter().map(|s| s.to_string()).collect(),
            BasePolicy::synthetic_default(),
        ),
    };
    let (dataset, truth) = generate_from_features(features, names, &base, &cfg)?;

    std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Output {
        path: args.out_dir.clone(),
        source,
    })?;
    let data_path = args.out_dir.join("data.csv");
    write_csv(&dataset, &data_path, "agent", "decision").map_err(|e| match e {
        Error::Io { path, source } => CliError::Output { path, source },
        e => CliError::Core(e),
    })?;
    write_text(&args.out_dir.join("truth.json"), &format!("{}\n", truth.to_json()?))?;

    #[derive(Serialize)]
    struct Body<'a> {
        rows: usize,
        agents: usize,
        features: &'a [String],
        group_coefficients: &'a [f64],
        region_fraction: f64,
        /// `[[outside, inside]; groups]`
        policy_means: Vec<[f64; 2]>,
    }
    let body = Body {
        rows: dataset.len(),
        agents: dataset.n_agents(),
        features: dataset.feature_names(),
        group_coefficients: &truth.group_coefficients,
        region_fraction: truth.region_fraction(),
        policy_means: truth.policy_means(),
    };
    eprintln!(
        "wrote {} rows for {} agents to {} (region `{}`, fraction {:.3})",
        body.rows,
        body.agents,
        args.out_dir.display(),
        truth.rule,
        body.region_fraction
    );
    emit("generate", args, body, &args.out_dir.join("generate.json"))
}

/// Everything needed to score new rows with a learned region.
#[derive(Debug, Serialize, Deserialize)]
pub struct RegionFile {
    pub format_version: u32,
    pub beta: f64,
    pub normalization: NormalizationStats,
    pub region: Region,
    pub agents: Vec<String>,
    pub grouping: Grouping,
}

pub fn discover(args: &DiscoverArgs) -> Result<()> {
    let dataset = load_data(&args.data)?;
    let (normalized, stats) = normalize(&dataset);
    let cfg = discover_config(args.beta, &args.outcome, &args.region, args.seed);
    let result = discovery::discover(&normalized, &cfg).map_err(|e| e.context("discovery"))?;
    let rendering = render_region(&result.region, args.beta, dataset.feature_names(), Some(&stats));
    eprint!("{rendering}");
    eprintln!(
        "termination: {:?} after {} iterations; objective {:.6}",
        result.termination,
        result.iterations(),
        result.objective
    );
    if let Some(path) = &args.region_out {
        let file = RegionFile {
            format_version: 1,
            beta: args.beta,
            normalization: stats.clone(),
            region: result.region.clone(),
            agents: result.agents.clone(),
            grouping: result.grouping.clone(),
        };
        write_text(path, &to_json(&file)?)?;
    }

    #[derive(Serialize)]
    struct Body<'a> {
        features: &'a [String],
        normalization: NormalizationStats,
        result: discovery::DiscoveryResult,
        rendering: String,
    }
    let body = Body {
        features: dataset.feature_names(),
        normalization: stats,
        result,
        rendering,
    };
    emit("discover", args, body, &args.out)
}

pub fn tune_beta(args: &TuneBetaArgs) -> Result<()> {
    let dataset = load_data(&args.data)?;
    let (normalized, _) = normalize(&dataset);
    let candidates = if args.candidates.is_empty() {
        default_candidates()
    } else {
        args.candidates.clone()
    };
    let cfg = TuneBetaConfig {
        candidates: candidates.clone(),
        permutations: args.permutations,
        discover: discover_config(candidates[0], &args.outcome, &args.region, args.seed),
        seed: args.seed,
    };
    let scan = tuning::tune_beta(&normalized, &cfg).map_err(|e| e.context("beta tuning"))?;
    for row in &scan.rows {
        eprintln!(
            "beta {:.2}: q_obs {:.5}, null mean {:.5}, p {:.4}",
            row.beta, row.q_obs, row.null_mean, row.p_value
        );
    }
    eprintln!("selected beta: {}", scan.selected_beta);
    if let Some(path) = &args.curve_out {
        let mut text = String::from("beta,p_value,q_obs,null_mean,null_q05,null_q50,null_q95\n");
        for r in &scan.rows {
            text.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.beta, r.p_value, r.q_obs, r.null_mean, r.null_q05, r.null_q50, r.null_q95
            ));
        }
        write_text(path, &text)?;
    }

    #[derive(Serialize)]
    struct Body {
        scan: tuning::BetaScan,
    }
    emit("tune-beta", args, Body { scan }, &args.out)
}

/// One row of the benchmark table: a metric, the subset it was measured
/// on, and its value.
#[derive(Serialize)]
struct TableRow {
    metric: &'static str,
    subset: &'static str,
    value: f64,
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let eta_inputs = match (args.eta_r, args.eta_alpha, args.eta_omega) {
        (None, None, None) => None,
        (Some(r), Some(a), Some(w)) => Some((r, a, w)),
        _ => {
            return Err(CliError::Config(
                "the eta diagnostic needs all of --eta-r, --eta-alpha and --eta-omega".into(),
            ))
        }
    };
    let eta = eta_inputs
        .map(|(r, a, w)| eta_bound(r, a, args.beta, w))
        .transpose()?;
    let dataset = load_data(&args.data)?;
    let truth = args.truth.as_deref().map(|p| load_truth(p, &dataset)).transpose()?;
    let cfg = PipelineConfig {
        discover: discover_config(args.beta, &LearnerSpec::Logistic { c: 1.0 }, &args.region, args.seed),
        c_grid: args.c_grid.clone(),
        n_random: args.n_random,
        seed: args.seed,
    };
    let run = pipeline::run(&dataset, &cfg)?;
    let evaluation = truth.as_ref().map(|t| pipeline::evaluate_run(&run, t)).transpose()?;
    let b = &run.benchmark;
    eprintln!(
        "l_hat on test: learned {:.5}, random {:.5} (sd {:.5}); z = {}",
        b.l_test,
        b.random_mean,
        b.random_std,
        b.z_score.map_or("undefined".into(), |z| format!("{z:.2}"))
    );
    if let Some(path) = &args.scores_out {
        write_scores(path, run.prepared.test.row_ids(), &run.test_scores)?;
    }

    #[derive(Serialize)]
    struct Body<'a> {
        split: &'a regionvar::data::SplitReport,
        normalization: &'a NormalizationStats,
        outcome_selection: &'a [regionvar::learners::GridScore],
        outcome_selected: usize,
        discovery: &'a discovery::DiscoveryResult,
        rendering: String,
        benchmark: &'a validation::RegionBenchmark,
        table: Vec<TableRow>,
        #[serde(skip_serializing_if = "Option::is_none")]
        evaluation: Option<EvaluationReport>,
        #[serde(skip_serializing_if = "Option::is_none")]
        eta: Option<validation::EtaReport>,
    }
    let table = vec![
        TableRow {
            metric: "l_hat",
            subset: "learned region, train",
            value: b.l_train,
        },
        TableRow {
            metric: "l_hat",
            subset: "learned region, test",
            value: b.l_test,
        },
        TableRow {
            metric: "l_hat",
            subset: "random regions, test, mean",
            value: b.random_mean,
        },
        TableRow {
            metric: "l_hat",
            subset: "random regions, test, std",
            value: b.random_std,
        },
    ];
    let body = Body {
        split: &run.prepared.split,
        normalization: &run.prepared.stats,
        outcome_selection: &run.outcome.table,
        outcome_selected: run.outcome.selected,
        discovery: &run.discovery,
        rendering: render_region(
            &run.discovery.region,
            args.beta,
            dataset.feature_names(),
            Some(&run.prepared.stats),
        ),
        benchmark: b,
        table,
        evaluation,
        eta,
    };
    emit("validate", args, body, &args.out)
}

pub fn baseline(args: &BaselineArgs) -> Result<()> {
    let dataset = load_data(&args.data)?;
    let truth = args.truth.as_deref().map(|p| load_truth(p, &dataset)).transpose()?;
    let prepared = pipeline::prepare(&dataset, derive_seed(args.seed, &[0]))?;
    let region_grid = if args.region_grid.is_empty() {
        Grid::default_for("ridge")?.points().to_vec()
    } else {
        args.region_grid.clone()
    };
    let cfg = DirectBaselineConfig {
        beta: args.beta,
        c_grid: args.c_grid.clone(),
        region_grid,
        seed: args.seed,
    };
    let bl = pipeline::run_direct_baseline(&prepared, &cfg)?;
    let evaluation = truth
        .as_ref()
        .map(|t| pipeline::evaluate(&bl.test_scores, bl.cutoff, &bl.grouping, &prepared.test, t))
        .transpose()?;
    if let Some(e) = &evaluation {
        eprintln!("baseline region AUC on test: {:.4}", e.region_auc);
    }
    if let Some(path) = &args.scores_out {
        write_scores(path, prepared.test.row_ids(), &bl.test_scores)?;
    }

    #[derive(Serialize)]
    struct Body<'a> {
        split: &'a regionvar::data::SplitReport,
        agents: &'a [String],
        baseline: &'a baselines::DirectBaseline,
        #[serde(skip_serializing_if = "Option::is_none")]
        evaluation: Option<EvaluationReport>,
    }
    let body = Body {
        split: &prepared.split,
        agents: prepared.train.agents(),
        baseline: &bl,
        evaluation,
    };
    emit("baseline", args, body, &args.out)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<()> {
    let dataset = load_data(&args.data)?;
    let truth = load_truth(&args.truth, &dataset)?;
    let truth_bits = pipeline::truth_region(&truth, &dataset);
    let (evaluation, source) = match (&args.region_file, &args.scores, args.cutoff) {
        (Some(path), None, _) => {
            let file: RegionFile = serde_json::from_str(&read_text(path)?).map_err(Error::from)?;
            if file.format_version != 1 {
                return Err(CliError::Config(format!(
                    "{}: unsupported region format version {}",
                    path.display(),
                    file.format_version
                )));
            }
            let normalized = file.normalization.apply(&dataset)?;
            let scores = file.region.scores(normalized.features())?;
            let mut report = baselines::region_metrics(&scores, file.region.threshold, &truth_bits)?;
            if truth.n_groups() == 2 {
                let aligned = baselines::align_grouping(&file.grouping, &file.agents, &truth.agents)?;
                report.partition_accuracy = Some(baselines::partition_accuracy(&aligned, &truth.binary_grouping()?)?);
            }
            (report, "region_file")
        }
        (None, Some(path), Some(cutoff)) => {
            let pairs = baselines::read_scores(path)?;
            let mut scores = Vec::with_capacity(pairs.len());
            let mut bits = Vec::with_capacity(pairs.len());
            for (id, score) in pairs {
                let Some(&bit) = truth_bits.get(id) else {
                    return Err(CliError::Config(format!(
                        "{}: row id {id} is outside the {} data rows",
                        path.display(),
                        dataset.len()
                    )));
                };
                scores.push(score);
                bits.push(bit);
            }
            (baselines::region_metrics(&scores, cutoff, &bits)?, "scores")
        }
        _ => {
            return Err(CliError::Config(
                "give either --region-file, or --scores with --cutoff".into(),
            ))
        }
    };
    eprintln!("region AUC {:.4}", evaluation.region_auc);

    #[derive(Serialize)]
    struct Body {
        source: &'static str,
        evaluation: EvaluationReport,
    }
    emit("evaluate", args, Body { source, evaluation }, &args.out)
}

pub fn stability(args: &StabilityArgs) -> Result<()> {
    let dataset = load_data(&args.data)?;
    let prepared = pipeline::prepare(&dataset, derive_seed(args.seed, &[0]))?;
    let train_val = prepared.train_validation()?;
    let cfg = discover_config(args.beta, &args.outcome, &args.region, args.seed);
    let report = validation::stability(&train_val, &prepared.test, args.folds, &cfg, args.seed)
        .map_err(|e| e.context("stability"))?;
    eprintln!(
        "held-out {:.3}, test region {:.3}, pairs {:.3} (shuffled {:.3})",
        report.heldout.fraction, report.test_region.fraction, report.pairs.fraction, report.pairs.shuffled_fraction
    );

    #[derive(Serialize)]
    struct Body {
        stability: validation::StabilityReport,
    }
    emit("stability", args, Body { stability: report }, &args.out)
}
