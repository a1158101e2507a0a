//! The alternating region/grouping loop.
//!
//! 1. Fit `f(x) ≈ E[Y | X]` once.
//! 2. Start from the region of all rows.
//! 3. Repeat: group agents by the sign of their region residual sum, fit
//!    `h` to the grouped residuals `r * G(a)`, and take the top `beta`
//!    fraction of `h` scores as the next region.
//! 4. Stop when the region repeats the previous one, returns to an earlier
//!    region, or the iteration cap is hit.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{kfold_stratified, Dataset, NormalizationStats};
use crate::error::{Error, Result};
use crate::learners::tree::Node;
use crate::learners::{LearnerSpec, Model};
use crate::matrix::Matrix;
use crate::objective::{self, Grouping, Membership};
use crate::rng::derive_seed;

pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoverConfig {
    /// Minimum region fraction, in `(0, 1]`.
    pub beta: f64,
    pub outcome: LearnerSpec,
    pub region: LearnerSpec,
    pub max_iter: usize,
    /// Features seen by `f` but hidden from `h`.
    #[serde(default)]
    pub exclude_features: Vec<String>,
    /// Fit `f`, the grouping and `h` on three disjoint thirds of the rows.
    #[serde(default)]
    pub sample_split: bool,
    pub seed: u64,
}

impl Default for DiscoverConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            outcome: LearnerSpec::Logistic { c: 1.0 },
            region: LearnerSpec::Tree {
                min_samples_leaf: 25,
                max_depth: None,
            },
            max_iter: DEFAULT_MAX_ITER,
            exclude_features: Vec::new(),
            sample_split: false,
            seed: 0,
        }
    }
}

impl DiscoverConfig {
    pub fn validate(&self, n_rows: usize) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::InvalidInput(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        if self.beta * (n_rows as f64) < 1.0 {
            return Err(Error::InvalidInput(format!(
                "beta * n = {} < 1; the region would be empty",
                self.beta * n_rows as f64
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        self.outcome.validate()?;
        self.region.validate()
    }
}

/// `S = {x : h(x) >= threshold}`, where `h` reads the dataset columns listed
/// in `features`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub model: Model,
    pub threshold: f64,
    pub features: Vec<usize>,
    pub n_inputs: usize,
}

impl Region {
    pub fn scores(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                got: x.cols(),
            });
        }
        self.model.predict(&x.select_cols(&self.features))
    }

    pub fn membership(&self, x: &Matrix) -> Result<Membership> {
        Ok(Membership(
            self.scores(x)?.into_iter().map(|s| s >= self.threshold).collect(),
        ))
    }
}

pub fn membership(region: &Region, x: &Matrix) -> Result<Membership> {
    region.membership(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationLimit,
    CycleDetected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Grouping used to build this iteration's targets.
    pub grouping: Grouping,
    pub membership: Membership,
    pub region_size: usize,
    pub q_hat: f64,
    pub l_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub beta: f64,
    pub outcome_model: Model,
    pub region: Region,
    /// Optimal grouping on the returned region.
    pub grouping: Grouping,
    pub agents: Vec<String>,
    /// Iteration 0 is the starting region of all rows.
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    /// Iteration whose region is returned.
    pub selected_iteration: usize,
    /// `l_hat` of the returned region on the training rows.
    pub objective: f64,
}

impl DiscoveryResult {
    pub fn training_membership(&self) -> &Membership {
        &self.history[self.selected_iteration].membership
    }

    pub fn iterations(&self) -> usize {
        self.history.len() - 1
    }
}

/// Index (0-based) of the order statistic used as the threshold:
/// `ceil((1 - beta) n)` in 1-based terms, at least 1.
pub fn threshold_rank(n: usize, beta: f64) -> usize {
    let raw = (1.0 - beta) * n as f64;
    let snapped = if (raw - raw.round()).abs() < 1e-9 {
        raw.round()
    } else {
        raw.ceil()
    };
    (snapped as usize).clamp(1, n) - 1
}

pub fn quantile_threshold(scores: &[f64], beta: f64) -> f64 {
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted[threshold_rank(sorted.len(), beta)]
}

fn region_columns(dataset: &Dataset, exclude: &[String]) -> Result<Vec<usize>> {
    for name in exclude {
        if dataset.feature_index(name).is_none() {
            return Err(Error::InvalidInput(format!("excluded feature `{name}` not in data")));
        }
    }
    let cols: Vec<usize> = (0..dataset.n_features())
        .filter(|&j| !exclude.contains(&dataset.feature_names()[j]))
        .collect();
    if cols.is_empty() {
        return Err(Error::InvalidInput("every feature is excluded from the region model".into()));
    }
    Ok(cols)
}

/// Row index sets for `(f, grouping, h)`: all rows three times, or three
/// disjoint agent-stratified thirds.
fn stage_rows(dataset: &Dataset, cfg: &DiscoverConfig) -> Result<[Vec<usize>; 3]> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    if !cfg.sample_split {
        return Ok([all.clone(), all.clone(), all]);
    }
    let folds = kfold_stratified(dataset, 3, derive_seed(cfg.seed, &[7]))?;
    let pos: HashMap<usize, usize> = dataset.row_ids().iter().enumerate().map(|(i, &r)| (r, i)).collect();
    let part = |k: usize| -> Vec<usize> {
        let mut v: Vec<usize> = folds[k].heldout.row_ids().iter().map(|r| pos[r]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    Ok([part(0), part(1), part(2)])
}

pub fn fit_outcome(dataset: &Dataset, cfg: &DiscoverConfig) -> Result<Model> {
    let rows = stage_rows(dataset, cfg)?;
    let ds = dataset.subset(&rows[0])?;
    cfg.outcome
        .fit(ds.features(), &ds.decisions_f64(), derive_seed(cfg.seed, &[0]))
        .map_err(|e| e.context("fitting outcome model"))
}

pub fn discover(dataset: &Dataset, cfg: &DiscoverConfig) -> Result<DiscoveryResult> {
    cfg.validate(dataset.len())?;
    let f = fit_outcome(dataset, cfg)?;
    discover_with_outcome(dataset, f, cfg)
}

/// Runs the loop with an already fitted outcome model.
pub fn discover_with_outcome(dataset: &Dataset, f: Model, cfg: &DiscoverConfig) -> Result<DiscoveryResult> {
    cfg.validate(dataset.len())?;
    let n = dataset.len();
    let cols = region_columns(dataset, &cfg.exclude_features)?;
    let xh = dataset.features().select_cols(&cols);
    let r = objective::residuals(&f, dataset).map_err(|e| e.context("computing residuals"))?;
    let [_, group_rows, fit_rows] = stage_rows(dataset, cfg)?;
    let group_mask = Membership::from_indices(n, &group_rows);
    let xh_fit = xh.select_rows(&fit_rows);

    let record = |iteration: usize, grouping: Grouping, s: Membership| -> Result<IterationRecord> {
        Ok(IterationRecord {
            iteration,
            q_hat: objective::q_hat(&r, &s, &grouping)?,
            l_hat: objective::l_hat(&r, &s)?,
            region_size: s.count(),
            grouping,
            membership: s,
        })
    };

    let mut current = Membership::all(n);
    let g0 = objective::optimal_grouping(&r, &current)?;
    let mut history = vec![record(0, g0, current.clone())?];
    let mut seen: HashMap<Membership, usize> = HashMap::from([(current.clone(), 0)]);
    let mut regions: Vec<Option<Region>> = vec![None];
    let mut termination = Termination::IterationLimit;

    for t in 1..=cfg.max_iter {
        let ctx = |e: Error| e.context(format!("iteration {t}"));
        let grouping_region = Membership(
            current.as_slice().iter().zip(group_mask.as_slice()).map(|(&a, &b)| a && b).collect(),
        );
        let g = objective::optimal_grouping(&r, &grouping_region).map_err(ctx)?;
        let targets: Vec<f64> = fit_rows
            .iter()
            .map(|&i| r.values()[i] * f64::from(g.get(r.agent_index()[i])))
            .collect();
        let h = cfg
            .region
            .fit(&xh_fit, &targets, derive_seed(cfg.seed, &[1, t as u64]))
            .map_err(|e| ctx(e.context("fitting region model")))?;
        let scores = h.predict(&xh).map_err(ctx)?;
        let threshold = quantile_threshold(&scores, cfg.beta);
        let next = Membership(scores.iter().map(|&s| s >= threshold).collect());
        history.push(record(t, g, next.clone()).map_err(ctx)?);
        regions.push(Some(Region {
            model: h,
            threshold,
            features: cols.clone(),
            n_inputs: dataset.n_features(),
        }));
        if next == current {
            termination = Termination::Converged;
            break;
        }
        if seen.contains_key(&next) {
            termination = Termination::CycleDetected;
            break;
        }
        seen.insert(next.clone(), t);
        current = next;
    }

    let last = history.len() - 1;
    let selected = match termination {
        Termination::CycleDetected => {
            let mut best = 1;
            for rec in &history[1..] {
                if rec.l_hat > history[best].l_hat {
                    best = rec.iteration;
                }
            }
            best
        }
        _ => last,
    };
    let chosen = &history[selected];
    let grouping = objective::optimal_grouping(&r, &chosen.membership)?;
    let objective = chosen.l_hat;
    let region = regions[selected].take().expect("iterations >= 1 carry a region");
    Ok(DiscoveryResult {
        beta: cfg.beta,
        outcome_model: f,
        region,
        grouping,
        agents: dataset.agents().to_vec(),
        history,
        termination,
        selected_iteration: selected,
        objective,
    })
}

fn feature_label(j: usize, names: &[String]) -> String {
    names.get(j).cloned().unwrap_or_else(|| format!("x{j}"))
}

/// Human-readable description of a region. Tree models are printed as
/// indented rules with leaves marked `IN` or `out`; thresholds are shown in
/// original units when normalization statistics are given.
pub fn render_region(
    region: &Region,
    beta: f64,
    feature_names: &[String],
    stats: Option<&NormalizationStats>,
) -> String {
    let mut out = String::new();
    if beta >= 1.0 {
        out.push_str("region: everything (beta = 1, every row is a member)\n");
        return out;
    }
    let show = |j: usize, z: f64| stats.map_or(z, |s| s.invert(j, z));
    match &region.model {
        Model::Tree(t) => {
            let _ = writeln!(out, "region: h(x) >= {:.6}", region.threshold);
            fn walk(
                out: &mut String,
                nodes: &[Node],
                i: usize,
                depth: usize,
                region: &Region,
                names: &[String],
                show: &dyn Fn(usize, f64) -> f64,
            ) {
                let pad = "  ".repeat(depth);
                match &nodes[i] {
                    Node::Leaf { value, n_samples } => {
                        let tag = if *value >= region.threshold { "IN " } else { "out" };
                        let _ = writeln!(out, "{pad}[{tag}] h = {value:.6} (n = {n_samples})");
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                        ..
                    } => {
                        let j = region.features[*feature];
                        let name = feature_label(j, names);
                        let thr = show(j, *threshold);
                        let _ = writeln!(out, "{pad}if {name} <= {thr:.4}:");
                        walk(out, nodes, *left, depth + 1, region, names, show);
                        let _ = writeln!(out, "{pad}else ({name} > {thr:.4}):");
                        walk(out, nodes, *right, depth + 1, region, names, show);
                    }
                }
            }
            walk(&mut out, &t.nodes, 0, 1, region, feature_names, &show);
        }
        Model::Ridge(m) => {
            let _ = writeln!(out, "region: {:.6} + sum(w * z) >= {:.6}", m.intercept, region.threshold);
            for (k, w) in m.weights.iter().enumerate() {
                let j = region.features[k];
                let _ = writeln!(out, "  {:>12.6}  {}", w, feature_label(j, feature_names));
            }
            if stats.is_some() {
                out.push_str("  (weights apply to normalized features)\n");
            }
        }
        Model::Logistic(m) => {
            let _ = writeln!(out, "region: sigmoid({:.6} + sum(w * z)) >= {:.6}", m.intercept, region.threshold);
            for (k, w) in m.weights.iter().enumerate() {
                let j = region.features[k];
                let _ = writeln!(out, "  {:>12.6}  {}", w, feature_label(j, feature_names));
            }
        }
        Model::Forest(fm) => {
            let used: Vec<String> = region
                .model
                .used_features()
                .into_iter()
                .map(|k| feature_label(region.features[k], feature_names))
                .collect();
            let _ = writeln!(
                out,
                "region: mean of {} trees >= {:.6}; features used: {}",
                fm.trees.len(),
                region.threshold,
                used.join(", ")
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::TreeModel;

    #[test]
    fn threshold_rank_rule() {
        assert_eq!(threshold_rank(10, 1.0), 0);
        assert_eq!(threshold_rank(10, 0.2), 7);
        assert_eq!(threshold_rank(10, 0.25), 7);
        assert_eq!(threshold_rank(3, 0.1), 2);
        // 0.7 * 10 is 7.000000000000001 in floating point; snapped to 7
        assert_eq!(threshold_rank(10, 0.3), 6);
    }

    fn constant_region(c: f64, b: f64) -> Region {
        let mut m = crate::learners::ridge::fit_ridge(
            &Matrix::from_rows(&[vec![0.0], vec![1.0]]).unwrap(),
            &[c, c],
            1.0,
        )
        .unwrap();
        m.weights = vec![0.0];
        m.intercept = c;
        Region {
            model: Model::Ridge(m),
            threshold: b,
            features: vec![0],
            n_inputs: 1,
        }
    }

    #[test]
    fn membership_includes_equality() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-2.0], vec![3.0]]).unwrap();
        assert_eq!(constant_region(0.3, 0.3).membership(&x).unwrap().count(), 3);
        assert_eq!(constant_region(0.3, 0.3 + 1e-12).membership(&x).unwrap().count(), 0);
        assert!(matches!(
            constant_region(0.3, 0.3).membership(&Matrix::zeros(1, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn membership_follows_tree_paths() {
        // x0 <= 0.5 -> leaf 0.1; else x1 <= 2 -> leaf 0.4, else leaf 0.9
        let t = TreeModel {
            min_samples_leaf: 1,
            max_depth: None,
            criterion: crate::learners::tree::Criterion::Mse,
            n_features: 2,
            nodes: vec![
                Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2, value: 0.0, n_samples: 5 },
                Node::Leaf { value: 0.1, n_samples: 2 },
                Node::Split { feature: 1, threshold: 2.0, left: 3, right: 4, value: 0.0, n_samples: 3 },
                Node::Leaf { value: 0.4, n_samples: 2 },
                Node::Leaf { value: 0.9, n_samples: 1 },
            ],
        };
        let region = Region {
            model: Model::Tree(t),
            threshold: 0.4,
            features: vec![0, 1],
            n_inputs: 2,
        };
        let x = Matrix::from_rows(&[
            vec![0.0, 9.0],
            vec![0.5, 0.0],
            vec![0.6, 2.0],
            vec![1.0, 2.5],
            vec![3.0, -1.0],
        ])
        .unwrap();
        let m = region.membership(&x).unwrap();
        assert_eq!(m.as_slice(), &[false, false, true, true, true]);
    }

    fn toy_dataset(n: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![((i * 37) % 11) as f64, (i % 3) as f64]).collect();
        let agents: Vec<String> = (0..n).map(|i| format!("a{}", i % 4)).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from((i * 7 + i / 5) % 3 == 0)).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), vec!["u".into(), "v".into()], &agents, y).unwrap()
    }

    #[test]
    fn beta_one_keeps_all_rows() {
        let ds = toy_dataset(60);
        let cfg = DiscoverConfig {
            beta: 1.0,
            ..Default::default()
        };
        let res = discover(&ds, &cfg).unwrap();
        assert_eq!(res.termination, Termination::Converged);
        assert!(res.iterations() <= 2);
        assert!(res.history.iter().all(|h| h.region_size == 60));
    }

    #[test]
    fn rejects_tiny_beta() {
        let ds = toy_dataset(20);
        let cfg = DiscoverConfig {
            beta: 0.01,
            ..Default::default()
        };
        assert!(matches!(discover(&ds, &cfg), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn excluded_feature_never_used() {
        let ds = toy_dataset(90);
        let cfg = DiscoverConfig {
            beta: 0.3,
            region: LearnerSpec::Tree {
                min_samples_leaf: 3,
                max_depth: None,
            },
            exclude_features: vec!["u".into()],
            ..Default::default()
        };
        let res = discover(&ds, &cfg).unwrap();
        assert_eq!(res.region.features, vec![1]);
        let text = render_region(&res.region, 0.3, ds.feature_names(), None);
        assert!(!text.contains("u <="));
    }

    #[test]
    fn render_beta_one() {
        let text = render_region(&constant_region(0.0, 0.0), 1.0, &[], None);
        assert!(text.contains("everything"));
    }
}
