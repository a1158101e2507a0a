//! Held-out significance against random regions, cross-fold stability, and
//! the `eta` misclassification diagnostic.

use std::collections::HashMap;
use std::f64::consts::LN_2;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{kfold_stratified, Dataset, Fold};
use crate::discovery::{discover, DiscoverConfig, DiscoveryResult, Termination};
use crate::error::{Error, Result};
use crate::learners::Model;
use crate::metrics;
use crate::objective::{l_hat, residuals, Grouping, Membership};
use crate::rng::{derive_seed, derived_rng};

pub const DEFAULT_N_RANDOM: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionBenchmark {
    pub l_train: f64,
    pub l_test: f64,
    pub region_size_train: usize,
    pub region_size_test: usize,
    pub n_random: usize,
    pub random_mean: f64,
    /// Population standard deviation over the random regions.
    pub random_std: f64,
    /// `None` when every random region has the same objective.
    pub z_score: Option<f64>,
    /// `l_test > random_mean + 2 * random_std`.
    pub exceeds_two_sd: bool,
}

/// Compares the learned region's `l_hat` on test rows with `n_random`
/// uniformly drawn test subsets of the same size.
pub fn benchmark_region(
    result: &DiscoveryResult,
    f: &Model,
    train: &Dataset,
    test: &Dataset,
    n_random: usize,
    seed: u64,
) -> Result<RegionBenchmark> {
    if n_random < 2 {
        return Err(Error::InvalidInput(format!("n_random must be >= 2, got {n_random}")));
    }
    let r_train = residuals(f, train)?;
    let s_train = result.region.membership(train.features())?;
    let r_test = residuals(f, test)?;
    let s_test = result.region.membership(test.features())?;
    let k = s_test.count();
    if k == 0 {
        return Err(Error::EmptyRegion.context("learned region on test data"));
    }
    let l_train = l_hat(&r_train, &s_train).map_err(|e| e.context("learned region on training data"))?;
    let l_test = l_hat(&r_test, &s_test)?;
    let n = test.len();
    let random: Vec<f64> = (0..n_random)
        .into_par_iter()
        .map(|j| {
            let mut rng = derived_rng(seed, &[j as u64]);
            let idx = sample(&mut rng, n, k).into_vec();
            l_hat(&r_test, &Membership::from_indices(n, &idx))
        })
        .collect::<Result<_>>()?;
    let random_mean = metrics::mean(&random);
    let random_std = metrics::population_std(&random);
    Ok(RegionBenchmark {
        l_train,
        l_test,
        region_size_train: s_train.count(),
        region_size_test: k,
        n_random,
        random_mean,
        random_std,
        z_score: (random_std > 0.0).then(|| (l_test - random_mean) / random_std),
        exceeds_two_sd: l_test > random_mean + 2.0 * random_std,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta: f64,
    /// Samples per agent at which `eta` reaches one half; infinite when
    /// `alpha * beta * omega = 0`.
    pub r_half: f64,
    /// `R > r_half`, i.e. `eta < 1/2`.
    pub below_half: bool,
}

/// `exp(-R alpha^2 beta^2 omega^2 / 2)`, evaluated as `2^(-R / r_half)` with
/// `r_half = 2 ln 2 / (alpha beta omega)^2` so the half point is exact.
pub fn eta_bound(r: f64, alpha: f64, beta: f64, omega: f64) -> Result<EtaReport> {
    for (name, v, cap) in [
        ("R", r, f64::INFINITY),
        ("alpha", alpha, 1.0),
        ("beta", beta, 1.0),
        ("omega", omega, 1.0),
    ] {
        if !(v >= 0.0 && v <= cap) {
            return Err(Error::InvalidInput(format!("{name} = {v} is outside its domain")));
        }
    }
    let p = alpha * beta * omega;
    if p == 0.0 {
        return Ok(EtaReport {
            eta: 1.0,
            r_half: f64::INFINITY,
            below_half: false,
        });
    }
    let r_half = 2.0 * LN_2 / p.powi(2);
    Ok(EtaReport {
        eta: (-r / r_half).exp2(),
        r_half,
        below_half: r > r_half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldoutConsistency {
    /// Points held out at least once and in the region for a strict
    /// majority of the folds that trained on them.
    pub eligible_points: usize,
    /// Sum over eligible points of the fraction of their held-out folds in
    /// which they were selected.
    pub selected_when_heldout: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRegionConsistency {
    pub mean_region_size: f64,
    /// Test points in the region for at least `ceil(0.75 k)` folds, each
    /// weighted by (folds in region) / k.
    pub weighted_consistent_points: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairConsistency {
    /// Agent pairs both present in the region in at least `ceil(0.75 k)` folds.
    pub eligible_pairs: usize,
    /// Eligible pairs with the same relation (same side or opposite sides)
    /// in at least `ceil(0.75 k)` folds.
    pub consistent_pairs: usize,
    pub fraction: f64,
    /// The same fraction with each fold's grouping shuffled across agents.
    pub shuffled_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k: usize,
    pub min_folds: usize,
    pub terminations: Vec<Termination>,
    pub heldout: HeldoutConsistency,
    pub test_region: TestRegionConsistency,
    pub pairs: PairConsistency,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Runs discovery on `k` agent-stratified folds of `train_val` and reports
/// how consistently regions and groupings recur.
pub fn stability(
    train_val: &Dataset,
    test: &Dataset,
    k: usize,
    cfg: &DiscoverConfig,
    seed: u64,
) -> Result<StabilityReport> {
    let folds = kfold_stratified(train_val, k, derive_seed(seed, &[0]))?;
    stability_from_folds(&folds, test, cfg, seed)
}

fn pair_consistency(
    groupings: &[Grouping],
    present: &[Vec<bool>],
    min_folds: usize,
) -> (usize, usize) {
    let n_agents = groupings[0].n_agents();
    let (mut eligible, mut consistent) = (0, 0);
    for a in 0..n_agents {
        for b in a + 1..n_agents {
            let both: Vec<usize> = (0..groupings.len()).filter(|&f| present[f][a] && present[f][b]).collect();
            if both.len() < min_folds {
                continue;
            }
            eligible += 1;
            let same = both.iter().filter(|&&f| groupings[f].get(a) == groupings[f].get(b)).count();
            if same.max(both.len() - same) >= min_folds {
                consistent += 1;
            }
        }
    }
    (eligible, consistent)
}

pub fn stability_from_folds(
    folds: &[Fold],
    test: &Dataset,
    cfg: &DiscoverConfig,
    seed: u64,
) -> Result<StabilityReport> {
    let k = folds.len();
    if k < 2 {
        return Err(Error::InvalidInput(format!("stability needs k >= 2 folds, got {k}")));
    }
    let min_folds = (0.75 * k as f64).ceil() as usize;
    let runs: Vec<DiscoveryResult> = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| discover(&fold.train, cfg).map_err(|e| e.context(format!("fold {i}"))))
        .collect::<Result<_>>()?;

    // per original row id: (train folds, in region while training, held-out folds, selected while held out)
    let mut points: HashMap<usize, [usize; 4]> = HashMap::new();
    let mut test_hits = vec![0usize; test.len()];
    let mut test_sizes = Vec::with_capacity(k);
    let mut present: Vec<Vec<bool>> = Vec::with_capacity(k);
    let n_agents = test.n_agents();
    for (fold, run) in folds.iter().zip(&runs) {
        let train_m = run.training_membership();
        let held_m = run.region.membership(fold.heldout.features())?;
        let test_m = run.region.membership(test.features())?;
        let mut here = vec![false; n_agents];
        for (i, &id) in fold.train.row_ids().iter().enumerate() {
            let e = points.entry(id).or_default();
            e[0] += 1;
            if train_m.as_slice()[i] {
                e[1] += 1;
                here[fold.train.agent_index()[i]] = true;
            }
        }
        for (i, &id) in fold.heldout.row_ids().iter().enumerate() {
            let e = points.entry(id).or_default();
            e[2] += 1;
            if held_m.as_slice()[i] {
                e[3] += 1;
                here[fold.heldout.agent_index()[i]] = true;
            }
        }
        for (i, &inside) in test_m.as_slice().iter().enumerate() {
            if inside {
                test_hits[i] += 1;
                here[test.agent_index()[i]] = true;
            }
        }
        test_sizes.push(test_m.count() as f64);
        present.push(here);
    }

    let mut ids: Vec<usize> = points.keys().copied().collect();
    ids.sort_unstable();
    let (mut eligible, mut selected) = (0usize, 0.0);
    for id in ids {
        let [tr, tr_in, ho, ho_in] = points[&id];
        if ho >= 1 && tr >= 1 && 2 * tr_in > tr {
            eligible += 1;
            selected += ho_in as f64 / ho as f64;
        }
    }

    let mean_region_size = metrics::mean(&test_sizes);
    let weighted: f64 = test_hits
        .iter()
        .filter(|&&h| h >= min_folds)
        .map(|&h| h as f64 / k as f64)
        .sum();

    let groupings: Vec<Grouping> = runs.iter().map(|r| r.grouping.clone()).collect();
    let (pairs, consistent) = pair_consistency(&groupings, &present, min_folds);
    let shuffled: Vec<Grouping> = groupings
        .iter()
        .enumerate()
        .map(|(f, g)| {
            let mut labels = g.0.clone();
            labels.shuffle(&mut derived_rng(seed, &[1, f as u64]));
            Grouping(labels)
        })
        .collect();
    let (_, shuffled_consistent) = pair_consistency(&shuffled, &present, min_folds);

    Ok(StabilityReport {
        k,
        min_folds,
        terminations: runs.iter().map(|r| r.termination).collect(),
        heldout: HeldoutConsistency {
            eligible_points: eligible,
            selected_when_heldout: selected,
            fraction: ratio(selected, eligible as f64),
        },
        test_region: TestRegionConsistency {
            mean_region_size,
            weighted_consistent_points: weighted,
            fraction: ratio(weighted, mean_region_size),
        },
        pairs: PairConsistency {
            eligible_pairs: pairs,
            consistent_pairs: consistent,
            fraction: ratio(consistent as f64, pairs as f64),
            shuffled_fraction: ratio(shuffled_consistent as f64, pairs as f64),
        },
    })
}
