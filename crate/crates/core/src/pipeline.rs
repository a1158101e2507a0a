//! Normalize, split, tune `f`, discover, benchmark, and score against truth.

use serde::{Deserialize, Serialize};

use crate::baselines::{self, DirectBaseline, DirectBaselineConfig, EvaluationReport};
use crate::data::{normalize, split_stratified, Dataset, NormalizationStats, SplitReport, SplitSpec};
use crate::discovery::{discover_with_outcome, DiscoverConfig, DiscoveryResult};
use crate::error::Result;
use crate::learners::{tune, Grid, Metric, TuneOutcome, LOGISTIC_C_GRID};
use crate::rng::derive_seed;
use crate::synthgen::SyntheticTruth;
use crate::validation::{benchmark_region, RegionBenchmark, DEFAULT_N_RANDOM};

/// A normalized dataset split 60/20/20 by agent.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub stats: NormalizationStats,
    pub train: Dataset,
    pub validation: Dataset,
    pub test: Dataset,
    pub split: SplitReport,
}

impl Prepared {
    pub fn train_validation(&self) -> Result<Dataset> {
        self.train.concat(&self.validation)
    }
}

pub fn prepare(dataset: &Dataset, split_seed: u64) -> Result<Prepared> {
    let (normalized, stats) = normalize(dataset);
    let split = split_stratified(&normalized, &SplitSpec::standard(split_seed))?;
    Ok(Prepared {
        stats,
        train: split.train()?.clone(),
        validation: split.validation()?.clone(),
        test: split.test()?.clone(),
        split: split.report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub discover: DiscoverConfig,
    pub c_grid: Vec<f64>,
    pub n_random: usize,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(discover: DiscoverConfig, seed: u64) -> Self {
        Self {
            discover,
            c_grid: LOGISTIC_C_GRID.to_vec(),
            n_random: DEFAULT_N_RANDOM,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub prepared: Prepared,
    pub outcome: TuneOutcome,
    pub discovery: DiscoveryResult,
    pub benchmark: RegionBenchmark,
    /// Region scores `h(x)` on the test rows.
    pub test_scores: Vec<f64>,
}

/// Tunes `f` by validation AUC, then runs discovery on train and validation
/// rows together and benchmarks the region on the test rows.
pub fn run(dataset: &Dataset, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let prepared = prepare(dataset, derive_seed(cfg.seed, &[0]))?;
    run_prepared(prepared, cfg)
}

pub fn run_prepared(prepared: Prepared, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let grid = Grid::logistic(&cfg.c_grid)?;
    let (ty, vy) = (prepared.train.decisions_f64(), prepared.validation.decisions_f64());
    let outcome = tune(
        &grid,
        (prepared.train.features(), &ty),
        (prepared.validation.features(), &vy),
        Metric::Auc,
        cfg.seed,
    )
    .map_err(|e| e.context("tuning outcome model"))?;
    let train_val = prepared.train_validation()?;
    let discovery = discover_with_outcome(&train_val, outcome.model.clone(), &cfg.discover)
        .map_err(|e| e.context("discovery"))?;
    let benchmark = benchmark_region(
        &discovery,
        &outcome.model,
        &train_val,
        &prepared.test,
        cfg.n_random,
        derive_seed(cfg.seed, &[2]),
    )
    .map_err(|e| e.context("benchmark"))?;
    let test_scores = discovery.region.scores(prepared.test.features())?;
    Ok(PipelineRun {
        prepared,
        outcome,
        discovery,
        benchmark,
        test_scores,
    })
}

/// Truth region bits for the rows of `dataset`, looked up by row id.
pub fn truth_region(truth: &SyntheticTruth, dataset: &Dataset) -> Vec<bool> {
    dataset.row_ids().iter().map(|&i| truth.region.as_slice()[i]).collect()
}

/// Region metrics on `test`, plus partition accuracy for two-group truths.
/// `grouping` is indexed by the agents of `test` and matched to the truth by name.
pub fn evaluate(
    scores: &[f64],
    cutoff: f64,
    grouping: &crate::objective::Grouping,
    test: &Dataset,
    truth: &SyntheticTruth,
) -> Result<EvaluationReport> {
    let mut report = baselines::region_metrics(scores, cutoff, &truth_region(truth, test))?;
    if truth.n_groups() == 2 {
        let aligned = baselines::align_grouping(grouping, test.agents(), &truth.agents)?;
        report.partition_accuracy = Some(baselines::partition_accuracy(&aligned, &truth.binary_grouping()?)?);
    }
    Ok(report)
}

pub fn evaluate_run(run: &PipelineRun, truth: &SyntheticTruth) -> Result<EvaluationReport> {
    evaluate(
        &run.test_scores,
        run.discovery.region.threshold,
        &run.discovery.grouping,
        &run.prepared.test,
        truth,
    )
}

pub fn run_direct_baseline(prepared: &Prepared, cfg: &DirectBaselineConfig) -> Result<DirectBaseline> {
    baselines::direct_baseline(&prepared.train, &prepared.validation, &prepared.test, cfg)
}
