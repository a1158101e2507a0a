//! Discovery of regions where decision-makers disagree.
//!
//! Given rows of `(context x, agent a, binary decision y)`, the crate fits an
//! outcome model `f(x) ≈ E[Y | X = x]` and then alternates between grouping the
//! agents by the sign of their mean residual on the current region and fitting
//! a region model `h(x)` to the grouped residuals. The region is the top
//! `beta` fraction of `h` scores.
//!
//! Module map:
//!
//! - [`data`]: datasets, CSV ingestion, normalization, stratified splits.
//! - [`learners`]: logistic/ridge regression, CART trees, random forests, grid tuning.
//! - [`objective`]: residuals, the empirical objective and its partial maximization.
//! - [`discovery`]: the alternating region/grouping loop.
//! - [`tuning`]: permutation-based selection of `beta`.
//! - [`validation`]: held-out significance benchmark, fold stability, `eta` diagnostic.
//! - [`synthgen`]: semi-synthetic data with a known region and counterfactual oracle.
//! - [`baselines`]: the direct-model baseline and region/partition metrics.
//! - [`pipeline`]: split, tune, discover and score in one call.

pub mod baselines;
pub mod data;
pub mod discovery;
mod error;
pub mod learners;
pub mod matrix;
pub mod metrics;
pub mod objective;
pub mod pipeline;
pub mod rng;
pub mod synthgen;
pub mod tuning;
pub mod validation;

pub use data::Dataset;
pub use discovery::{discover, DiscoverConfig, DiscoveryResult, Region, Termination};
pub use error::{Error, ErrorKind, Result};
pub use learners::{LearnerSpec, Model};
pub use matrix::Matrix;
pub use objective::{Grouping, Membership, Residuals};
