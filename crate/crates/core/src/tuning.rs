//! Choice of `beta` by comparison against agent-permuted data.
//!
//! For every candidate `beta`, the observed objective `q_obs` is compared
//! with `T` objectives obtained after shuffling the agent column, which keeps
//! the joint distribution of `(X, Y)` and the agent marginal but breaks any
//! dependence between them. The candidate with the smallest p-value wins.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::discovery::{self, DiscoverConfig, Termination};
use crate::error::{Error, Result};
use crate::metrics;
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_PERMUTATIONS: usize = 40;

/// `0.02, 0.06, ..., 0.42`.
pub fn default_candidates() -> Vec<f64> {
    (0..11).map(|k| (2 + 4 * k) as f64 / 100.0).collect()
}

/// The dataset with its agent column uniformly shuffled.
pub fn permute_agents(dataset: &Dataset, seed: u64) -> Dataset {
    let mut agents = dataset.agent_index().to_vec();
    agents.shuffle(&mut rng_from_seed(seed));
    dataset
        .with_agent_index(agents)
        .expect("a permutation keeps the column length")
}

/// `(1 + #{null >= q_obs}) / (T + 1)`.
pub fn p_value(q_obs: f64, nulls: &[f64]) -> f64 {
    let hits = nulls.iter().filter(|&&q| q >= q_obs).count();
    (1 + hits) as f64 / (nulls.len() + 1) as f64
}

/// Hex sha256 of a value's JSON encoding.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneBetaConfig {
    pub candidates: Vec<f64>,
    pub permutations: usize,
    /// Template for every run; `beta` is overwritten per candidate.
    pub discover: DiscoverConfig,
    pub seed: u64,
}

impl TuneBetaConfig {
    pub fn new(discover: DiscoverConfig, seed: u64) -> Self {
        Self {
            candidates: default_candidates(),
            permutations: DEFAULT_PERMUTATIONS,
            discover,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaRow {
    pub beta: f64,
    pub q_obs: f64,
    pub termination: Termination,
    pub nulls: Vec<f64>,
    pub null_mean: f64,
    pub null_q05: f64,
    pub null_q50: f64,
    pub null_q95: f64,
    pub p_value: f64,
    /// Hash of the discovery configuration shared by the observed and null runs.
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaScan {
    pub permutations: usize,
    pub p_value_rule: String,
    pub rows: Vec<BetaRow>,
    pub selected_beta: f64,
}

impl BetaScan {
    pub fn p_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.p_value).collect()
    }

    pub fn min_p_value(&self) -> f64 {
        self.rows.iter().map(|r| r.p_value).fold(f64::INFINITY, f64::min)
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Smallest p-value; ties go to the smallest `beta`.
pub fn select_beta(rows: &[BetaRow]) -> f64 {
    let mut best = &rows[0];
    for r in &rows[1..] {
        if r.p_value < best.p_value || (r.p_value == best.p_value && r.beta < best.beta) {
            best = r;
        }
    }
    best.beta
}

pub fn tune_beta(dataset: &Dataset, cfg: &TuneBetaConfig) -> Result<BetaScan> {
    if cfg.candidates.is_empty() {
        return Err(Error::InvalidInput("no beta candidates".into()));
    }
    if cfg.permutations == 0 {
        return Err(Error::InvalidInput("need at least one permutation".into()));
    }
    let configs: Vec<DiscoverConfig> = cfg
        .candidates
        .iter()
        .map(|&beta| DiscoverConfig {
            beta,
            ..cfg.discover.clone()
        })
        .collect();
    for c in &configs {
        c.validate(dataset.len())?;
    }
    // f depends on (X, Y) only, so one fit serves every permutation unless
    // the stage split (which is stratified by agent) changes with the labels.
    let shared_f = if cfg.discover.sample_split {
        None
    } else {
        Some(discovery::fit_outcome(dataset, &cfg.discover)?)
    };

    let t = cfg.permutations;
    let jobs: Vec<(usize, Option<usize>)> = (0..configs.len())
        .flat_map(|b| std::iter::once((b, None)).chain((0..t).map(move |p| (b, Some(p)))))
        .collect();
    let results: Vec<(f64, Termination)> = jobs
        .par_iter()
        .map(|&(b, perm)| {
            let data = match perm {
                None => dataset.clone(),
                Some(p) => permute_agents(dataset, derive_seed(cfg.seed, &[b as u64, p as u64])),
            };
            let run = match &shared_f {
                Some(f) => discovery::discover_with_outcome(&data, f.clone(), &configs[b]),
                None => discovery::discover(&data, &configs[b]),
            };
            let label = match perm {
                None => format!("beta = {}, observed data", configs[b].beta),
                Some(p) => format!("beta = {}, permutation {p}", configs[b].beta),
            };
            run.map(|r| (r.objective, r.termination)).map_err(|e| e.context(label))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(configs.len());
    for (b, chunk) in results.chunks(t + 1).enumerate() {
        let (q_obs, termination) = chunk[0];
        let nulls: Vec<f64> = chunk[1..].iter().map(|r| r.0).collect();
        let mut sorted = nulls.clone();
        sorted.sort_by(f64::total_cmp);
        rows.push(BetaRow {
            beta: configs[b].beta,
            q_obs,
            termination,
            null_mean: metrics::mean(&nulls),
            null_q05: quantile(&sorted, 0.05),
            null_q50: quantile(&sorted, 0.5),
            null_q95: quantile(&sorted, 0.95),
            p_value: p_value(q_obs, &nulls),
            nulls,
            config_hash: config_hash(&configs[b])?,
        });
    }
    Ok(BetaScan {
        permutations: t,
        p_value_rule: "(1 + #{null >= q_obs}) / (T + 1)".into(),
        selected_beta: select_beta(&rows),
        rows,
    })
}
