//! Random forests of CART trees on bootstrap samples.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{check_inputs, grow, Criterion, GrowParams, TreeModel};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Number of features drawn at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "value")]
pub enum MaxFeatures {
    /// `ceil(sqrt(d))`.
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().ceil() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_leaf: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(n_trees: usize, min_samples_leaf: usize, seed: u64) -> Self {
        Self {
            n_trees,
            min_samples_leaf,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    /// Tree `t` was grown from the seed `derive_seed(params.seed, [t])`.
    pub trees: Vec<TreeModel>,
}

impl ForestModel {
    /// Mean of the tree predictions, summed in tree order.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        sum / self.trees.len() as f64
    }
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    check_inputs(x, y, params.min_samples_leaf)?;
    if params.n_trees == 0 {
        return Err(Error::InvalidInput("forest needs at least one tree".into()));
    }
    let n = x.rows();
    let criterion = Criterion::for_targets(y);
    let grow_params = GrowParams {
        min_samples_leaf: params.min_samples_leaf,
        max_depth: params.max_depth,
        max_features: Some(params.max_features.resolve(x.cols())),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::derived_rng(params.seed, &[t as u64]);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| r.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(x, y, rows, grow_params, criterion, Some(&mut r))
        })
        .collect();
    Ok(ForestModel {
        params: params.clone(),
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tree::fit_tree;
    use super::*;

    fn toy(n: usize) -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 0.11).cos();
                let c = ((i * 7) % 5) as f64;
                vec![a, b, c]
            })
            .collect();
        let y = rows.iter().map(|r| r[0] + 0.5 * r[2] - r[1] * r[1]).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_tree_without_bootstrap_equals_cart() {
        let (x, y) = toy(60);
        let params = ForestParams {
            n_trees: 1,
            min_samples_leaf: 3,
            max_depth: None,
            max_features: MaxFeatures::All,
            bootstrap: false,
            seed: 11,
        };
        let f = fit_forest(&x, &y, &params).unwrap();
        let t = fit_tree(&x, &y, 3, None).unwrap();
        assert_eq!(f.trees[0], t);
        for r in x.iter_rows() {
            assert_eq!(f.predict(r), t.predict(r));
        }
    }

    #[test]
    fn constant_target_everywhere() {
        let (x, _) = toy(30);
        let f = fit_forest(&x, &[0.25; 30], &ForestParams::new(10, 2, 1)).unwrap();
        assert_eq!(f.predict(&[5.0, -5.0, 2.0]), 0.25);
    }

    #[test]
    fn identical_under_different_pool_sizes() {
        let (x, y) = toy(200);
        let params = ForestParams::new(25, 5, 42);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| fit_forest(&x, &y, &params).unwrap());
        let b = four.install(|| fit_forest(&x, &y, &params).unwrap());
        assert_eq!(a, b);
        for r in x.iter_rows() {
            assert_eq!(a.predict(r).to_bits(), b.predict(r).to_bits());
        }
    }

    #[test]
    fn prediction_is_mean_of_trees() {
        let (x, y) = toy(80);
        let f = fit_forest(&x, &y, &ForestParams::new(7, 4, 3)).unwrap();
        for r in x.iter_rows() {
            let mut s = 0.0;
            for t in &f.trees {
                s += t.predict(r);
            }
            assert_eq!(f.predict(r), s / 7.0);
        }
    }

    #[test]
    fn sqrt_rule() {
        assert_eq!(MaxFeatures::Sqrt.resolve(1), 1);
        assert_eq!(MaxFeatures::Sqrt.resolve(5), 3);
        assert_eq!(MaxFeatures::Sqrt.resolve(9), 3);
        assert_eq!(MaxFeatures::Count(20).resolve(4), 4);
    }
}
