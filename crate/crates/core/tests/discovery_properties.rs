use proptest::prelude::*;
use regionvar::data::normalize;
use regionvar::discovery::{discover, threshold_rank, DiscoverConfig, Termination};
use regionvar::objective::{l_hat, optimal_grouping, q_hat, residuals};
use regionvar::synthgen::{generate, RegionRule, SyntheticConfig};
use regionvar::{Dataset, LearnerSpec, Matrix, Membership};

fn synthetic(n_rows: usize, n_agents: usize, seed: u64) -> Dataset {
    let cfg = SyntheticConfig::two_group(n_rows, n_agents, RegionRule::drug_possession(), seed);
    normalize(&generate(&cfg).unwrap().0).0
}

fn random_dataset(values: &[f64], agents: &[usize], decisions: &[bool]) -> Dataset {
    let n = decisions.len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![values[2 * i], values[2 * i + 1]]).collect();
    let labels: Vec<String> = agents[..n].iter().map(|a| format!("a{a}")).collect();
    Dataset::new(
        Matrix::from_rows(&rows).unwrap(),
        vec!["u".into(), "v".into()],
        &labels,
        decisions.iter().map(|&d| u8::from(d)).collect(),
    )
    .unwrap()
}

fn ridge(beta: f64, seed: u64) -> DiscoverConfig {
    DiscoverConfig {
        beta,
        region: LearnerSpec::Ridge { alpha: 1.0 },
        seed,
        ..Default::default()
    }
}

fn check_invariants(ds: &Dataset, cfg: &DiscoverConfig) {
    let res = discover(ds, cfg).unwrap();
    let n = ds.len();
    let r = residuals(&res.outcome_model, ds).unwrap();

    assert_eq!(res.history[0].membership, Membership::all(n));
    if !cfg.sample_split {
        assert_eq!(res.history[1].grouping, optimal_grouping(&r, &Membership::all(n)).unwrap());
    }
    for rec in &res.history[1..] {
        assert!(rec.region_size >= n - threshold_rank(n, cfg.beta));
        assert!(rec.q_hat <= rec.l_hat + 1e-12);
    }
    assert!(res.iterations() <= cfg.max_iter);
    if res.termination == Termination::Converged {
        let last = res.history.len() - 1;
        assert_eq!(res.history[last].membership, res.history[last - 1].membership);
    }

    let s = res.training_membership();
    assert_eq!(s, &res.region.membership(ds.features()).unwrap());
    assert_eq!(res.grouping, optimal_grouping(&r, s).unwrap());
    assert_eq!(res.objective, l_hat(&r, s).unwrap());
    assert_eq!(res.objective, q_hat(&r, s, &res.grouping).unwrap());
}

#[test]
fn invariants_on_synthetic_data() {
    let ds = synthetic(900, 8, 3);
    check_invariants(&ds, &ridge(0.2, 3));
    check_invariants(&ds, &DiscoverConfig { seed: 3, ..Default::default() });
    check_invariants(
        &ds,
        &DiscoverConfig {
            sample_split: true,
            ..ridge(0.3, 3)
        },
    );
}

#[test]
fn continuous_scores_select_exact_count() {
    let values: Vec<f64> = (0..1200).map(|i| ((i * 7919) % 1009) as f64 / 100.0 + (i % 7) as f64 * 0.013).collect();
    let agents: Vec<usize> = (0..600).map(|i| (i * 13) % 6).collect();
    let decisions: Vec<bool> = (0..600).map(|i| (i * 31 + i / 7) % 5 < 2).collect();
    let ds = random_dataset(&values, &agents, &decisions);
    let res = discover(&ds, &ridge(0.2, 4)).unwrap();
    let n = ds.len();
    for rec in &res.history[1..] {
        assert_eq!(rec.region_size, n - threshold_rank(n, 0.2));
    }
}

#[test]
fn same_seed_same_result_across_thread_counts() {
    let ds = synthetic(900, 8, 5);
    let cfg = DiscoverConfig {
        region: LearnerSpec::Forest {
            n_trees: 20,
            min_samples_leaf: 20,
            max_depth: None,
            max_features: Default::default(),
        },
        seed: 5,
        ..Default::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| discover(&ds, &cfg).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, discover(&ds, &cfg).unwrap());
}

#[test]
fn excluded_features_never_enter_the_region() {
    let ds = synthetic(900, 8, 6);
    let excluded = "drug_possession".to_string();
    let j = ds.feature_index(&excluded).unwrap();
    let cfg = DiscoverConfig {
        exclude_features: vec![excluded.clone()],
        seed: 6,
        ..Default::default()
    };
    let res = discover(&ds, &cfg).unwrap();
    assert!(!res.region.features.contains(&j));
    let used: Vec<usize> = res
        .region
        .model
        .used_features()
        .iter()
        .map(|&k| res.region.features[k])
        .collect();
    assert!(!used.contains(&j));
    let text = regionvar::discovery::render_region(&res.region, cfg.beta, ds.feature_names(), None);
    assert!(!text.contains(&excluded));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn invariants_on_random_data(
        values in proptest::collection::vec(-3.0f64..3.0, 240),
        agents in proptest::collection::vec(0usize..5, 120),
        decisions in proptest::collection::vec(any::<bool>(), 40..120),
        beta in 0.1f64..0.9,
        tree in any::<bool>(),
        seed in 0u64..1000,
    ) {
        prop_assume!(decisions.iter().any(|&d| d) && decisions.iter().any(|&d| !d));
        let ds = random_dataset(&values, &agents, &decisions);
        let cfg = if tree {
            DiscoverConfig {
                beta,
                region: LearnerSpec::Tree { min_samples_leaf: 5, max_depth: None },
                seed,
                ..Default::default()
            }
        } else {
            ridge(beta, seed)
        };
        check_invariants(&ds, &cfg);
    }
}
