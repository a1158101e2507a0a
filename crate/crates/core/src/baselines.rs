//! The direct-model baseline and the metrics used to score any method
//! against a known region and grouping.
//!
//! The direct baseline fits `E[Y | X]` and `E[Y | A, X]` with logistic
//! regressions and asks, row by row, how much knowing the agent reduces the
//! absolute error. A region model regresses that gain on `x`.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::discovery::quantile_threshold;
use crate::error::{Error, Result};
use crate::learners::{tune, Grid, LearnerSpec, Metric, Model, TuneOutcome, LOGISTIC_C_GRID};
use crate::matrix::Matrix;
use crate::metrics;
use crate::objective::Grouping;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub region_auc: f64,
    pub region_precision: f64,
    pub region_recall: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partition_accuracy: Option<f64>,
}

/// AUC of `scores` against `truth`, and precision/recall of `scores >= cutoff`.
pub fn region_metrics(scores: &[f64], cutoff: f64, truth: &[bool]) -> Result<EvaluationReport> {
    let region_auc = metrics::auc(scores, truth)?;
    let (mut tp, mut predicted) = (0usize, 0usize);
    for (&s, &t) in scores.iter().zip(truth) {
        if s >= cutoff {
            predicted += 1;
            tp += usize::from(t);
        }
    }
    let positives = truth.iter().filter(|&&t| t).count();
    Ok(EvaluationReport {
        region_auc,
        region_precision: if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 },
        region_recall: tp as f64 / positives as f64,
        partition_accuracy: None,
    })
}

/// Agreement of two groupings, maximized over swapping the predicted labels.
pub fn partition_accuracy(predicted: &Grouping, truth: &Grouping) -> Result<f64> {
    if predicted.n_agents() != truth.n_agents() || truth.n_agents() == 0 {
        return Err(Error::InvalidInput(format!(
            "groupings cover {} and {} agents",
            predicted.n_agents(),
            truth.n_agents()
        )));
    }
    let agree = predicted.0.iter().zip(&truth.0).filter(|(a, b)| a == b).count();
    let acc = agree as f64 / truth.n_agents() as f64;
    Ok(acc.max(1.0 - acc))
}

/// Reorders `grouping`, indexed by `agents`, to follow `target` by name.
pub fn align_grouping(grouping: &Grouping, agents: &[String], target: &[String]) -> Result<Grouping> {
    if grouping.n_agents() != agents.len() {
        return Err(Error::InvalidInput(format!(
            "grouping covers {} agents, vocabulary has {}",
            grouping.n_agents(),
            agents.len()
        )));
    }
    let lookup: HashMap<&str, usize> = agents.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    target
        .iter()
        .map(|a| {
            lookup
                .get(a.as_str())
                .map(|&i| grouping.get(i))
                .ok_or_else(|| Error::InvalidInput(format!("agent `{a}` has no group")))
        })
        .collect::<Result<Vec<u8>>>()
        .map(Grouping)
}

/// Features followed by agent indicators; the last agent's column is dropped.
pub fn agent_design(dataset: &Dataset) -> Matrix {
    let d = dataset.n_features();
    let k = dataset.n_agents() - 1;
    let mut out = Matrix::zeros(dataset.len(), d + k);
    for (i, row) in dataset.features().iter_rows().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out.set(i, j, v);
        }
        let a = dataset.agent_index()[i];
        if a < k {
            out.set(i, d + a, 1.0);
        }
    }
    out
}

/// Sorts agents by coefficient (descending, ties by index) and puts the
/// first `ceil(N / 2)` in group 1.
pub fn split_by_coefficient(coefficients: &[f64]) -> Grouping {
    let n = coefficients.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coefficients[b].total_cmp(&coefficients[a]).then(a.cmp(&b)));
    let mut g = vec![0u8; n];
    for &a in &order[..n.div_ceil(2)] {
        g[a] = 1;
    }
    Grouping(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectBaselineConfig {
    pub beta: f64,
    pub c_grid: Vec<f64>,
    pub region_grid: Vec<LearnerSpec>,
    pub seed: u64,
}

impl DirectBaselineConfig {
    pub fn new(beta: f64, region_grid: Vec<LearnerSpec>, seed: u64) -> Self {
        Self {
            beta,
            c_grid: LOGISTIC_C_GRID.to_vec(),
            region_grid,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectBaseline {
    pub outcome: TuneOutcome,
    pub agent_outcome: TuneOutcome,
    pub region: TuneOutcome,
    /// Top-`beta` cut-off over the pooled train and validation predictions.
    pub cutoff: f64,
    pub test_scores: Vec<f64>,
    /// Agent indicator coefficients; the dropped last agent has 0.
    pub agent_coefficients: Vec<f64>,
    pub grouping: Grouping,
}

pub fn direct_baseline(
    train: &Dataset,
    validation: &Dataset,
    test: &Dataset,
    cfg: &DirectBaselineConfig,
) -> Result<DirectBaseline> {
    if train.n_agents() < 2 {
        return Err(Error::InvalidInput("the direct baseline needs at least 2 agents".into()));
    }
    if !(cfg.beta > 0.0 && cfg.beta <= 1.0) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, 1], got {}", cfg.beta)));
    }
    let c_grid = Grid::logistic(&cfg.c_grid)?;
    let region_grid = Grid::new(cfg.region_grid.clone())?;
    let (ty, vy) = (train.decisions_f64(), validation.decisions_f64());

    let outcome = tune(&c_grid, (train.features(), &ty), (validation.features(), &vy), Metric::Auc, cfg.seed)
        .map_err(|e| e.context("direct baseline: E[Y | X]"))?;
    let (tax, vax) = (agent_design(train), agent_design(validation));
    let agent_outcome = tune(&c_grid, (&tax, &ty), (&vax, &vy), Metric::Auc, cfg.seed)
        .map_err(|e| e.context("direct baseline: E[Y | A, X]"))?;

    let gain = |ds: &Dataset, xa: &Matrix| -> Result<Vec<f64>> {
        let f = outcome.model.predict(ds.features())?;
        let g = agent_outcome.model.predict(xa)?;
        Ok(ds
            .decisions()
            .iter()
            .zip(f.iter().zip(&g))
            .map(|(&y, (&f, &g))| (f64::from(y) - f).abs() - (f64::from(y) - g).abs())
            .collect())
    };
    let (tu, vu) = (gain(train, &tax)?, gain(validation, &vax)?);
    let region = tune(
        &region_grid,
        (train.features(), &tu),
        (validation.features(), &vu),
        Metric::Mse,
        cfg.seed,
    )
    .map_err(|e| e.context("direct baseline: region model"))?;

    let pooled = train.features().vstack(validation.features())?;
    let cutoff = quantile_threshold(&region.model.predict(&pooled)?, cfg.beta);
    let test_scores = region.model.predict(test.features())?;

    let mut agent_coefficients = vec![0.0; train.n_agents()];
    if let Model::Logistic(m) = &agent_outcome.model {
        let d = train.n_features();
        agent_coefficients[..train.n_agents() - 1].copy_from_slice(&m.weights[d..]);
    }
    let grouping = split_by_coefficient(&agent_coefficients);
    Ok(DirectBaseline {
        outcome,
        agent_outcome,
        region,
        cutoff,
        test_scores,
        agent_coefficients,
        grouping,
    })
}

/// Reads the `(row_id, score)` pairs of an external method's CSV in file
/// order. A repeated row id is an error.
pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, e.to_string()),
        ),
        _ => Error::Csv(e),
    })?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("score file lacks a `{name}` column")))
    };
    let (id_col, score_col) = (col("row_id")?, col("score")?);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse_err = |column: &str, message: String| Error::Parse {
            row: i + 1,
            column: column.into(),
            message,
        };
        let id: usize = rec[id_col]
            .trim()
            .parse()
            .map_err(|_| parse_err("row_id", format!("`{}` is not a row id", &rec[id_col])))?;
        let score: f64 = rec[score_col]
            .trim()
            .parse()
            .map_err(|_| parse_err("score", format!("`{}` is not a number", &rec[score_col])))?;
        if !seen.insert(id) {
            return Err(parse_err("row_id", format!("row id {id} appears more than once")));
        }
        out.push((id, score));
    }
    Ok(out)
}

/// Reads an external method's scores and aligns them with `dataset` by row
/// id. Every row of `dataset` needs a score.
pub fn load_scores(path: impl AsRef<Path>, dataset: &Dataset) -> Result<Vec<f64>> {
    let by_id: HashMap<usize, f64> = read_scores(path)?.into_iter().collect();
    dataset
        .row_ids()
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| Error::Schema(format!("score file has no score for row {id}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_grouping_follows_names() {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let g = Grouping(vec![1, 0, 0]);
        let out = align_grouping(&g, &names(&["b", "c", "a"]), &names(&["a", "b", "c"])).unwrap();
        assert_eq!(out, Grouping(vec![0, 1, 0]));
        assert!(align_grouping(&g, &names(&["b", "c", "a"]), &names(&["a", "d"])).is_err());
    }

    #[test]
    fn perfect_and_reversed_scores() {
        let truth = [true, false, true, false, false];
        let s: Vec<f64> = truth.iter().map(|&t| f64::from(u8::from(t))).collect();
        let r = region_metrics(&s, 0.5, &truth).unwrap();
        assert_eq!((r.region_auc, r.region_precision, r.region_recall), (1.0, 1.0, 1.0));
        let rev: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        assert_eq!(region_metrics(&rev, 0.5, &truth).unwrap().region_auc, 0.0);
        assert!(region_metrics(&s, 0.5, &[true; 5]).is_err());
    }

    #[test]
    fn six_rows_with_a_tie() {
        // positives 0.8, 0.5, 0.3; negatives 0.5, 0.2, 0.1
        // pairs won: 3 + (2 + 0.5) + 2 = 7.5 of 9
        let scores = [0.8, 0.5, 0.5, 0.3, 0.2, 0.1];
        let truth = [true, true, false, true, false, false];
        let r = region_metrics(&scores, 0.5, &truth).unwrap();
        assert!((r.region_auc - 7.5 / 9.0).abs() < 1e-15);
        assert!((r.region_precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.region_recall - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn partition_examples() {
        let t = Grouping(vec![1, 1, 0, 0]);
        assert_eq!(partition_accuracy(&t, &t).unwrap(), 1.0);
        assert_eq!(partition_accuracy(&t.complement(), &t).unwrap(), 1.0);
        assert_eq!(partition_accuracy(&Grouping(vec![1, 0, 0, 0]), &t).unwrap(), 0.75);
        assert!(partition_accuracy(&Grouping(vec![1]), &t).is_err());
    }

    proptest::proptest! {
        #[test]
        fn partition_at_least_half(
            bits in proptest::collection::vec((0u8..2, 0u8..2), 1..30),
        ) {
            let p = Grouping(bits.iter().map(|b| b.0).collect());
            let t = Grouping(bits.iter().map(|b| b.1).collect());
            proptest::prop_assert!(partition_accuracy(&p, &t).unwrap() >= 0.5);
        }
    }

    #[test]
    fn odd_split_sizes() {
        let g = split_by_coefficient(&[0.3, -1.0, 0.0, 2.0, 0.3]);
        assert_eq!(g.0.iter().filter(|&&v| v == 1).count(), 3);
        assert_eq!(g, Grouping(vec![1, 0, 0, 1, 1]));
        let even = split_by_coefficient(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(even, Grouping(vec![0, 0, 1, 1]));
    }

    #[test]
    fn design_drops_last_agent() {
        let ds = Dataset::new(
            Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]).unwrap(),
            vec!["x".into()],
            &["a".into(), "b".into(), "c".into()],
            vec![0, 1, 0],
        )
        .unwrap();
        let m = agent_design(&ds);
        assert_eq!(m.cols(), 3);
        assert_eq!(m.row(0), &[1.0, 1.0, 0.0]);
        assert_eq!(m.row(1), &[2.0, 0.0, 1.0]);
        assert_eq!(m.row(2), &[3.0, 0.0, 0.0]);
    }
}
