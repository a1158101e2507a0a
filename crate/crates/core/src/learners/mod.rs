//! Supervised learners for the outcome model `f` and the region model `h`.

pub mod forest;
pub mod logistic;
pub mod ridge;
pub mod tree;

use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics;

pub use forest::{fit_forest, ForestModel, ForestParams, MaxFeatures};
pub use logistic::{fit_logistic, LogisticModel};
pub use ridge::{fit_ridge, RidgeModel};
pub use tree::{fit_tree, TreeModel};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Logistic inverse-regularization grid.
pub const LOGISTIC_C_GRID: [f64; 7] = [10.0, 1.0, 0.1, 0.01, 0.001, 1e-4, 1e-5];
pub const RIDGE_ALPHA_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const TREE_LEAF_GRID: [usize; 3] = [10, 25, 100];
pub const FOREST_TREES_GRID: [usize; 3] = [10, 25, 100];

/// A learner kind together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Logistic {
        c: f64,
    },
    Ridge {
        alpha: f64,
    },
    Tree {
        min_samples_leaf: usize,
        #[serde(default)]
        max_depth: Option<usize>,
    },
    Forest {
        n_trees: usize,
        min_samples_leaf: usize,
        #[serde(default)]
        max_depth: Option<usize>,
        #[serde(default)]
        max_features: MaxFeatures,
    },
}

impl LearnerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LearnerSpec::Logistic { .. } => "logistic",
            LearnerSpec::Ridge { .. } => "ridge",
            LearnerSpec::Tree { .. } => "tree",
            LearnerSpec::Forest { .. } => "forest",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        match *self {
            LearnerSpec::Logistic { c } if !(c > 0.0 && c.is_finite()) => {
                bad(format!("logistic C must be positive, got {c}"))
            }
            LearnerSpec::Ridge { alpha } if !(alpha >= 0.0 && alpha.is_finite()) => {
                bad(format!("ridge alpha must be >= 0, got {alpha}"))
            }
            LearnerSpec::Tree {
                min_samples_leaf: 0,
                ..
            }
            | LearnerSpec::Forest {
                min_samples_leaf: 0,
                ..
            } => bad("min_samples_leaf must be positive".into()),
            LearnerSpec::Forest { n_trees: 0, .. } => bad("forest needs at least one tree".into()),
            _ => Ok(()),
        }
    }

    /// Fits on `(x, y)`. `seed` only matters for forests.
    pub fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<Model> {
        self.validate()?;
        Ok(match *self {
            LearnerSpec::Logistic { c } => Model::Logistic(fit_logistic(x, y, c)?),
            LearnerSpec::Ridge { alpha } => Model::Ridge(fit_ridge(x, y, alpha)?),
            LearnerSpec::Tree {
                min_samples_leaf,
                max_depth,
            } => Model::Tree(fit_tree(x, y, min_samples_leaf, max_depth)?),
            LearnerSpec::Forest {
                n_trees,
                min_samples_leaf,
                max_depth,
                max_features,
            } => Model::Forest(fit_forest(
                x,
                y,
                &ForestParams {
                    n_trees,
                    min_samples_leaf,
                    max_depth,
                    max_features,
                    bootstrap: true,
                    seed,
                },
            )?),
        })
    }
}

/// Compact form `kind[:key=value,...]`, e.g. `tree:leaf=25,depth=4`,
/// `ridge:alpha=1`, `forest:trees=100,leaf=25,features=sqrt`, `logistic:c=1`.
/// Omitted keys take the defaults `c = 1`, `alpha = 1`, `leaf = 25`,
/// `trees = 100`.
impl FromStr for LearnerSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut params: Vec<(&str, &str)> = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("expected key=value in learner `{s}`, got `{part}`")))?;
            params.push((k.trim(), v.trim()));
        }
        let allowed: &[&str] = match kind {
            "logistic" => &["c"],
            "ridge" => &["alpha"],
            "tree" => &["leaf", "depth"],
            "forest" => &["trees", "leaf", "depth", "features"],
            _ => {
                return Err(Error::InvalidInput(format!(
                    "unknown learner kind `{kind}` (expected logistic, ridge, tree or forest)"
                )))
            }
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(Error::InvalidInput(format!("`{k}` is not a {kind} parameter")));
        }
        let get = |key: &str| params.iter().rev().find(|(k, _)| *k == key).map(|(_, v)| *v);
        fn num<T: FromStr>(key: &str, v: Option<&str>, default: T) -> Result<T> {
            v.map_or(Ok(default), |v| {
                v.parse()
                    .map_err(|_| Error::InvalidInput(format!("cannot parse `{v}` for `{key}`")))
            })
        }
        let depth = get("depth").map(|v| num("depth", Some(v), 0usize)).transpose()?;
        let spec = match kind {
            "logistic" => LearnerSpec::Logistic { c: num("c", get("c"), 1.0)? },
            "ridge" => LearnerSpec::Ridge {
                alpha: num("alpha", get("alpha"), 1.0)?,
            },
            "tree" => LearnerSpec::Tree {
                min_samples_leaf: num("leaf", get("leaf"), 25)?,
                max_depth: depth,
            },
            _ => LearnerSpec::Forest {
                n_trees: num("trees", get("trees"), 100)?,
                min_samples_leaf: num("leaf", get("leaf"), 25)?,
                max_depth: depth,
                max_features: match get("features") {
                    None | Some("sqrt") => MaxFeatures::Sqrt,
                    Some("all") => MaxFeatures::All,
                    Some(v) => MaxFeatures::Count(num("features", Some(v), 1)?),
                },
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "parameters", rename_all = "snake_case")]
pub enum Model {
    Logistic(LogisticModel),
    Ridge(RidgeModel),
    Tree(TreeModel),
    Forest(ForestModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Logistic(_) => "logistic",
            Model::Ridge(_) => "ridge",
            Model::Tree(_) => "tree",
            Model::Forest(_) => "forest",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Logistic(m) => m.weights.len(),
            Model::Ridge(m) => m.weights.len(),
            Model::Tree(m) => m.n_features,
            Model::Forest(m) => m.trees[0].n_features,
        }
    }

    /// Prediction for one row; the caller guarantees the row length.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Logistic(m) => m.predict(row),
            Model::Ridge(m) => m.predict(row),
            Model::Tree(m) => m.predict(row),
            Model::Forest(m) => m.predict(row),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| self.predict_row(r)).collect())
    }

    /// Hyperparameters the model was fitted with.
    pub fn spec(&self) -> LearnerSpec {
        match self {
            Model::Logistic(m) => LearnerSpec::Logistic { c: m.c },
            Model::Ridge(m) => LearnerSpec::Ridge { alpha: m.alpha },
            Model::Tree(m) => LearnerSpec::Tree {
                min_samples_leaf: m.min_samples_leaf,
                max_depth: m.max_depth,
            },
            Model::Forest(m) => LearnerSpec::Forest {
                n_trees: m.params.n_trees,
                min_samples_leaf: m.params.min_samples_leaf,
                max_depth: m.params.max_depth,
                max_features: m.params.max_features,
            },
        }
    }

    /// Feature indices the model actually depends on.
    pub fn used_features(&self) -> Vec<usize> {
        let nz = |w: &[f64]| (0..w.len()).filter(|&j| w[j] != 0.0).collect();
        match self {
            Model::Logistic(m) => nz(&m.weights),
            Model::Ridge(m) => nz(&m.weights),
            Model::Tree(m) => m.used_features(),
            Model::Forest(m) => {
                let mut f: Vec<usize> = m.trees.iter().flat_map(|t| t.used_features()).collect();
                f.sort_unstable();
                f.dedup();
                f
            }
        }
    }
}

/// Versioned JSON wrapper for saved models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(model: Model) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                doc.format_version
            )));
        }
        Ok(doc)
    }
}

/// Candidate hyperparameters for one learner kind, in priority order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<LearnerSpec>,
}

impl Grid {
    pub fn new(points: Vec<LearnerSpec>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidInput("empty hyperparameter grid".into()))?;
        for p in &points {
            p.validate()?;
            if p.kind() != first.kind() {
                return Err(Error::InvalidInput(format!(
                    "grid mixes learner kinds `{}` and `{}`",
                    first.kind(),
                    p.kind()
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[LearnerSpec] {
        &self.points
    }

    pub fn logistic(cs: &[f64]) -> Result<Self> {
        Self::new(cs.iter().map(|&c| LearnerSpec::Logistic { c }).collect())
    }

    pub fn ridge(alphas: &[f64]) -> Result<Self> {
        Self::new(alphas.iter().map(|&alpha| LearnerSpec::Ridge { alpha }).collect())
    }

    pub fn tree(leaves: &[usize]) -> Result<Self> {
        Self::new(
            leaves
                .iter()
                .map(|&min_samples_leaf| LearnerSpec::Tree {
                    min_samples_leaf,
                    max_depth: None,
                })
                .collect(),
        )
    }

    pub fn forest(trees: &[usize], min_samples_leaf: usize) -> Result<Self> {
        Self::new(
            trees
                .iter()
                .map(|&n_trees| LearnerSpec::Forest {
                    n_trees,
                    min_samples_leaf,
                    max_depth: None,
                    max_features: MaxFeatures::Sqrt,
                })
                .collect(),
        )
    }

    /// The default grid for a learner kind name.
    pub fn default_for(kind: &str) -> Result<Self> {
        match kind {
            "logistic" => Self::logistic(&LOGISTIC_C_GRID),
            "ridge" => Self::ridge(&RIDGE_ALPHA_GRID),
            "tree" => Self::tree(&TREE_LEAF_GRID),
            "forest" => Self::forest(&FOREST_TREES_GRID, 1),
            other => Err(Error::InvalidInput(format!("unknown learner kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Larger is better; targets must be binary.
    Auc,
    /// Smaller is better.
    Mse,
}

impl Metric {
    pub fn score(self, predictions: &[f64], targets: &[f64]) -> Result<f64> {
        match self {
            Metric::Auc => {
                let labels: Vec<bool> = targets.iter().map(|&t| t == 1.0).collect();
                metrics::auc(predictions, &labels)
            }
            Metric::Mse => metrics::mse(predictions, targets),
        }
    }

    fn improves(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Metric::Auc => candidate > incumbent,
            Metric::Mse => candidate < incumbent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub spec: LearnerSpec,
    pub validation_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub metric: Metric,
    pub table: Vec<GridScore>,
    pub selected: usize,
    /// The selected point refit on train and validation rows together.
    pub model: Model,
}

/// Index of the best score; ties keep the earliest point.
pub fn select_best(metric: Metric, scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if metric.improves(s, scores[best]) {
            best = i;
        }
    }
    best
}

/// Fits every grid point on the training rows, scores it on the validation
/// rows, and refits the best point on both.
pub fn tune(
    grid: &Grid,
    train: (&Matrix, &[f64]),
    validation: (&Matrix, &[f64]),
    metric: Metric,
    seed: u64,
) -> Result<TuneOutcome> {
    let (tx, ty) = train;
    let (vx, vy) = validation;
    if vx.rows() == 0 || vy.is_empty() {
        return Err(Error::InvalidInput("tuning needs a non-empty validation set".into()));
    }
    let scores: Vec<f64> = grid
        .points
        .par_iter()
        .map(|spec| {
            let model = spec.fit(tx, ty, seed)?;
            metric.score(&model.predict(vx)?, vy)
        })
        .collect::<Result<_>>()?;
    let selected = select_best(metric, &scores);
    let x_all = tx.vstack(vx)?;
    let y_all: Vec<f64> = ty.iter().chain(vy).copied().collect();
    let model = grid.points[selected].fit(&x_all, &y_all, seed)?;
    Ok(TuneOutcome {
        metric,
        table: grid
            .points
            .iter()
            .zip(scores)
            .map(|(spec, validation_score)| GridScore {
                spec: spec.clone(),
                validation_score,
            })
            .collect(),
        selected,
        model,
    })
}
