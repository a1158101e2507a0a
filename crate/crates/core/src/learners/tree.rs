//! CART regression/classification trees.
//!
//! Splits are binary `x[feature] <= threshold`, chosen to maximize the
//! impurity decrease. Thresholds are midpoints between consecutive distinct
//! sorted values. Ties in the decrease go to the lowest feature index, then
//! the lowest threshold. Leaves predict the mean target of their rows.

use std::cmp::Ordering;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Gains closer than this are treated as ties.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Sum of squared deviations from the node mean.
    Mse,
    /// Gini impurity; only used when every target is 0 or 1.
    Gini,
}

impl Criterion {
    pub fn for_targets(y: &[f64]) -> Self {
        if y.iter().all(|&v| v == 0.0 || v == 1.0) {
            Criterion::Gini
        } else {
            Criterion::Mse
        }
    }

    /// Node impurity weighted by the node size.
    fn weighted(self, sum: f64, sumsq: f64, n: f64) -> f64 {
        match self {
            Criterion::Mse => (sumsq - sum * sum / n).max(0.0),
            // n * 2p(1-p) with p = sum / n
            Criterion::Gini => (2.0 * (sum - sum * sum / n)).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        value: f64,
        n_samples: usize,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

impl Node {
    pub fn value(&self) -> f64 {
        match self {
            Node::Split { value, .. } | Node::Leaf { value, .. } => *value,
        }
    }

    pub fn n_samples(&self) -> usize {
        match self {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => *n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub criterion: Criterion,
    pub n_features: usize,
    /// Node 0 is the root; children follow in depth-first order.
    pub nodes: Vec<Node>,
}

impl TreeModel {
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.nodes[self.leaf_index(row)].value()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Feature indices used by at least one split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    /// Features considered per split; `None` means all.
    pub max_features: Option<usize>,
}

/// Best split of a node, as found by a left-to-right sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // adjacent floats: keep the split strictly between the two groups
    if m >= b {
        a
    } else {
        m
    }
}

/// Best split over `features` (ascending) for the rows `idx`.
pub(crate) fn best_split(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
    criterion: Criterion,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let sum: f64 = idx.iter().map(|&i| y[i]).sum();
    let sumsq: f64 = idx.iter().map(|&i| y[i] * y[i]).sum();
    let parent = criterion.weighted(sum, sumsq, n as f64);

    let mut best: Option<SplitChoice> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &f in features {
        pairs.clear();
        pairs.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
        let (mut ls, mut lss) = (0.0, 0.0);
        for k in 1..n {
            let (xv, yv) = pairs[k - 1];
            ls += yv;
            lss += yv * yv;
            if k < min_leaf || n - k < min_leaf || !(xv < pairs[k].0) {
                continue;
            }
            let nl = k as f64;
            let nr = (n - k) as f64;
            let left = criterion.weighted(ls, lss, nl);
            let right = criterion.weighted(sum - ls, sumsq - lss, nr);
            let gain = parent - left - right;
            let better = match best {
                None => true,
                Some(b) => gain > b.gain + TIE_TOL * parent.abs().max(1.0),
            };
            if better {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(xv, pairs[k].0),
                    gain,
                });
            }
        }
    }
    best
}

pub(crate) fn grow(
    x: &Matrix,
    y: &[f64],
    rows: Vec<usize>,
    params: GrowParams,
    criterion: Criterion,
    mut rng: Option<&mut Rng>,
) -> TreeModel {
    let mut nodes = Vec::new();
    let d = x.cols();
    // (rows, depth, parent slot to patch, is_left)
    let mut stack: Vec<(Vec<usize>, usize, Option<(usize, bool)>)> = vec![(rows, 0, None)];
    while let Some((idx, depth, parent)) = stack.pop() {
        let n = idx.len();
        let pure = idx.iter().all(|&i| y[i] == y[idx[0]]);
        let mean = if pure {
            y[idx[0]]
        } else {
            idx.iter().map(|&i| y[i]).sum::<f64>() / n as f64
        };
        let id = nodes.len();
        if let Some((p, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                if is_left {
                    *left = id;
                } else {
                    *right = id;
                }
            }
        }
        let depth_ok = params.max_depth.is_none_or(|m| depth < m);
        let choice = if pure || !depth_ok {
            None
        } else {
            let features: Vec<usize> = match (params.max_features, rng.as_deref_mut()) {
                (Some(m), Some(r)) if m < d => {
                    let mut f = sample(r, d, m).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..d).collect(),
            };
            best_split(x, y, &idx, &features, params.min_samples_leaf, criterion)
        };
        match choice {
            None => nodes.push(Node::Leaf {
                value: mean,
                n_samples: n,
            }),
            Some(s) => {
                nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: usize::MAX,
                    right: usize::MAX,
                    value: mean,
                    n_samples: n,
                });
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| x.get(i, s.feature) <= s.threshold);
                // right pushed first so the left subtree is numbered first
                stack.push((r, depth + 1, Some((id, false))));
                stack.push((l, depth + 1, Some((id, true))));
            }
        }
    }
    TreeModel {
        min_samples_leaf: params.min_samples_leaf,
        max_depth: params.max_depth,
        criterion,
        n_features: d,
        nodes,
    }
}

pub(crate) fn check_inputs(x: &Matrix, y: &[f64], min_samples_leaf: usize) -> Result<()> {
    if x.rows() == 0 {
        return Err(Error::NoRows);
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("tree: target length mismatch".into()));
    }
    if min_samples_leaf == 0 {
        return Err(Error::InvalidInput("min_samples_leaf must be positive".into()));
    }
    if min_samples_leaf > x.rows() {
        return Err(Error::InvalidInput(format!(
            "min_samples_leaf {min_samples_leaf} exceeds the {} training rows",
            x.rows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("tree: non-finite target".into()));
    }
    Ok(())
}

pub fn fit_tree(
    x: &Matrix,
    y: &[f64],
    min_samples_leaf: usize,
    max_depth: Option<usize>,
) -> Result<TreeModel> {
    check_inputs(x, y, min_samples_leaf)?;
    let params = GrowParams {
        min_samples_leaf,
        max_depth,
        max_features: None,
    };
    Ok(grow(
        x,
        y,
        (0..x.rows()).collect(),
        params,
        Criterion::for_targets(y),
        None,
    ))
}
