//! Semi-synthetic data with a known region of disagreement.
//!
//! Every group of agents follows a logistic policy
//! `logit p_g(x) = base(x) + c_g * 1{x in S*}`, so groups agree outside the
//! region `S*` and differ inside it. Cases are assigned to agents uniformly
//! at random. The truth object stores the region, the agent groups and every
//! group's probability on every row, which is enough to evaluate the
//! population objective without sampling.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::logistic::{fit_logistic, sigmoid};
use crate::matrix::Matrix;
use crate::objective::{Grouping, Membership};
use crate::rng::{derived_rng, Rng};

pub const ALTERNATIVE_COEFFICIENT: f64 = 1.5;

/// Names of the fully synthetic features, in column order.
pub const SYNTHETIC_FEATURES: [&str; 6] = [
    "age",
    "priors",
    "juv_fel",
    "juv_misd",
    "drug_possession",
    "misdemeanor",
];

/// Draws the fully synthetic feature table:
///
/// - `age`: `round(clip(Normal(34, 11), 18, 75))`
/// - `priors`: `Poisson(3)`
/// - `juv_fel`: `Poisson(0.1)`
/// - `juv_misd`: `Poisson(0.15)`
/// - `drug_possession`: `Bernoulli(0.2)`
/// - `misdemeanor`: `Bernoulli(0.36)`
pub fn synthetic_features(n: usize, rng: &mut Rng) -> Matrix {
    let age = Normal::new(34.0, 11.0).expect("valid normal");
    let priors = Poisson::new(3.0).expect("valid poisson");
    let juv_fel = Poisson::new(0.1).expect("valid poisson");
    let juv_misd = Poisson::new(0.15).expect("valid poisson");
    let drug = Bernoulli::new(0.2).expect("valid bernoulli");
    let misd = Bernoulli::new(0.36).expect("valid bernoulli");
    let mut data = Vec::with_capacity(n * SYNTHETIC_FEATURES.len());
    for _ in 0..n {
        let a: f64 = age.sample(rng);
        data.push(a.clamp(18.0, 75.0).round());
        data.push(priors.sample(rng));
        data.push(juv_fel.sample(rng));
        data.push(juv_misd.sample(rng));
        data.push(f64::from(u8::from(drug.sample(rng))));
        data.push(f64::from(u8::from(misd.sample(rng))));
    }
    Matrix::new(n, SYNTHETIC_FEATURES.len(), data).expect("shape matches")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
        }
    }

    fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
            CmpOp::Lt => a < b,
            CmpOp::Gt => a > b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predicate {
    pub feature: String,
    pub op: CmpOp,
    pub value: f64,
}

/// A conjunction of feature comparisons, e.g. `misdemeanor == 1 && age <= 35`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RegionRule {
    pub predicates: Vec<Predicate>,
}

impl RegionRule {
    /// All drug possession charges.
    pub fn drug_possession() -> Self {
        "drug_possession == 1".parse().expect("valid preset")
    }

    /// Misdemeanor charges for individuals aged 35 or younger.
    pub fn misdemeanor_young() -> Self {
        "misdemeanor == 1 && age <= 35".parse().expect("valid preset")
    }

    /// A preset name (`drug`, `misdemeanor`) or a rule expression.
    pub fn from_name_or_expr(s: &str) -> Result<Self> {
        match s.trim() {
            "drug" | "drug_possession" => Ok(Self::drug_possession()),
            "misdemeanor" | "misdemeanor_young" => Ok(Self::misdemeanor_young()),
            expr => expr.parse(),
        }
    }

    /// Row-wise evaluation; every referenced feature must be present.
    pub fn evaluate(&self, x: &Matrix, names: &[String]) -> Result<Vec<bool>> {
        let cols: Vec<(usize, &Predicate)> = self
            .predicates
            .iter()
            .map(|p| {
                names
                    .iter()
                    .position(|n| n == &p.feature)
                    .map(|j| (j, p))
                    .ok_or_else(|| Error::InvalidInput(format!("region rule uses unknown feature `{}`", p.feature)))
            })
            .collect::<Result<_>>()?;
        Ok(x.iter_rows()
            .map(|row| cols.iter().all(|(j, p)| p.op.holds(row[*j], p.value)))
            .collect())
    }
}

impl FromStr for RegionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let predicates = s
            .split("&&")
            .map(|part| {
                let part = part.trim();
                // two-character operators first so `<=` is not read as `<`
                for op in [CmpOp::Eq, CmpOp::Ne, CmpOp::Le, CmpOp::Ge, CmpOp::Lt, CmpOp::Gt] {
                    if let Some((lhs, rhs)) = part.split_once(op.symbol()) {
                        let feature = lhs.trim();
                        let value: f64 = rhs.trim().parse().map_err(|_| {
                            Error::InvalidInput(format!("region rule `{part}`: `{}` is not a number", rhs.trim()))
                        })?;
                        if feature.is_empty() {
                            break;
                        }
                        return Ok(Predicate {
                            feature: feature.to_string(),
                            op,
                            value,
                        });
                    }
                }
                Err(Error::InvalidInput(format!("cannot parse region predicate `{part}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegionRule { predicates })
    }
}

impl fmt::Display for RegionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .predicates
            .iter()
            .map(|p| format!("{} {} {}", p.feature, p.op.symbol(), p.value))
            .collect();
        f.write_str(&parts.join(" && "))
    }
}

impl TryFrom<String> for RegionRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RegionRule> for String {
    fn from(r: RegionRule) -> String {
        r.to_string()
    }
}

/// The base logistic policy shared by every group outside the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasePolicy {
    pub feature_names: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl BasePolicy {
    /// Coefficients for [`SYNTHETIC_FEATURES`], giving an average decision
    /// rate a little above one half.
    pub fn synthetic_default() -> Self {
        Self {
            feature_names: SYNTHETIC_FEATURES.iter().map(|s| s.to_string()).collect(),
            weights: vec![-0.035, 0.15, 0.4, 0.3, 0.3, -0.3],
            intercept: 0.0,
        }
    }

    /// Logistic fit of `decisions` on the seed features.
    pub fn fit(features: &Matrix, feature_names: &[String], decisions: &[f64], c: f64) -> Result<Self> {
        let m = fit_logistic(features, decisions, c)?;
        Ok(Self {
            feature_names: feature_names.to_vec(),
            weights: m.weights,
            intercept: m.intercept,
        })
    }

    pub fn logit(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Rows to draw when the features are synthetic.
    pub n_rows: usize,
    pub n_agents: usize,
    pub rule: RegionRule,
    /// Additive logit term inside the region, one per group.
    pub group_coefficients: Vec<f64>,
    pub seed: u64,
}

impl SyntheticConfig {
    /// Two groups with coefficients `(0, 1.5)`.
    pub fn two_group(n_rows: usize, n_agents: usize, rule: RegionRule, seed: u64) -> Self {
        Self {
            n_rows,
            n_agents,
            rule,
            group_coefficients: vec![0.0, ALTERNATIVE_COEFFICIENT],
            seed,
        }
    }

    /// `n_groups` coefficients equally spaced on `[-1.5, 1.5]`.
    pub fn multigroup(n_rows: usize, n_agents: usize, n_groups: usize, rule: RegionRule, seed: u64) -> Result<Self> {
        if n_groups < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 groups, got {n_groups}")));
        }
        Ok(Self {
            n_rows,
            n_agents,
            rule,
            group_coefficients: spread_coefficients(n_groups, ALTERNATIVE_COEFFICIENT),
            seed,
        })
    }

    pub fn n_groups(&self) -> usize {
        self.group_coefficients.len()
    }
}

/// `n` equally spaced values from `-max` to `max`.
pub fn spread_coefficients(n: usize, max: f64) -> Vec<f64> {
    (0..n)
        .map(|i| -max + 2.0 * max * i as f64 / (n - 1) as f64)
        .collect()
}

/// Group of agent `i` among `n_agents` split into `n_groups` contiguous blocks.
pub fn agent_group(i: usize, n_agents: usize, n_groups: usize) -> usize {
    i * n_groups / n_agents
}

pub fn agent_names(n_agents: usize) -> Vec<String> {
    let width = (n_agents.saturating_sub(1)).to_string().len().max(2);
    (0..n_agents).map(|i| format!("agent_{i:0width$}")).collect()
}

/// Ground truth for a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub rule: RegionRule,
    pub base: BasePolicy,
    pub group_coefficients: Vec<f64>,
    pub agents: Vec<String>,
    pub agent_groups: Vec<usize>,
    /// `S*` membership per row.
    pub region: Membership,
    /// `probabilities[i][g] = P(Y = 1 | x_i, group g)`.
    pub probabilities: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SyntheticTruth {
    pub fn n_groups(&self) -> usize {
        self.group_coefficients.len()
    }

    pub fn region_fraction(&self) -> f64 {
        self.region.count() as f64 / self.region.len() as f64
    }

    /// Agent grouping of a two-group truth, with the larger coefficient as group 1.
    pub fn binary_grouping(&self) -> Result<Grouping> {
        if self.n_groups() != 2 {
            return Err(Error::InvalidInput(format!(
                "binary grouping needs 2 groups, truth has {}",
                self.n_groups()
            )));
        }
        let high = usize::from(self.group_coefficients[1] >= self.group_coefficients[0]);
        Ok(Grouping(self.agent_groups.iter().map(|&g| u8::from(g == high)).collect()))
    }

    /// `E[Y | X = x_i]` under uniform assignment.
    pub fn outcome_mean(&self, row: usize) -> f64 {
        let n = self.agents.len() as f64;
        self.agent_groups.iter().map(|&g| self.probabilities[row][g]).sum::<f64>() / n
    }

    /// Mean policy probability per group, inside and outside the region:
    /// `[[outside, inside]; n_groups]`.
    pub fn policy_means(&self) -> Vec<[f64; 2]> {
        (0..self.n_groups())
            .map(|g| {
                let mut acc = [[0.0, 0.0]; 2];
                for (p, &inside) in self.probabilities.iter().zip(self.region.as_slice()) {
                    let k = usize::from(inside);
                    acc[k][0] += p[g];
                    acc[k][1] += 1.0;
                }
                [acc[0][0] / acc[0][1], acc[1][0] / acc[1][1]]
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Population objective `Q(S, G)` from the stored probabilities.
///
/// Contexts are weighted by their empirical frequency among the generated
/// rows and agents are assigned uniformly, so
/// `Q = (1/N) * sum_{a: G(a) = 1} mean_{x in S} [p_{g(a)}(x) - mean_a' p_{g(a')}(x)]`.
pub fn counterfactual_q(truth: &SyntheticTruth, s: &Membership, g: &Grouping) -> Result<f64> {
    if s.len() != truth.probabilities.len() {
        return Err(Error::InvalidInput("membership length differs from the truth rows".into()));
    }
    if g.n_agents() != truth.agents.len() {
        return Err(Error::InvalidInput("grouping covers a different agent set".into()));
    }
    let rows = s.indices();
    if rows.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n_agents = truth.agents.len() as f64;
    let mut total = 0.0;
    for &i in &rows {
        let mean = truth.outcome_mean(i);
        for (a, &grp) in truth.agent_groups.iter().enumerate() {
            if g.get(a) == 1 {
                total += truth.probabilities[i][grp] - mean;
            }
        }
    }
    Ok(total / (n_agents * rows.len() as f64))
}

fn validate(cfg: &SyntheticConfig) -> Result<()> {
    if cfg.n_agents == 0 {
        return Err(Error::InvalidInput("need at least one agent".into()));
    }
    if cfg.group_coefficients.is_empty() {
        return Err(Error::InvalidInput("need at least one group coefficient".into()));
    }
    if cfg.group_coefficients.len() > cfg.n_agents {
        return Err(Error::InvalidInput(format!(
            "{} groups cannot be filled by {} agents",
            cfg.group_coefficients.len(),
            cfg.n_agents
        )));
    }
    Ok(())
}

/// Generates decisions for a given feature table.
pub fn generate_from_features(
    features: Matrix,
    feature_names: Vec<String>,
    base: &BasePolicy,
    cfg: &SyntheticConfig,
) -> Result<(Dataset, SyntheticTruth)> {
    validate(cfg)?;
    if base.feature_names != feature_names {
        return Err(Error::InvalidInput("base policy features differ from the feature table".into()));
    }
    let n = features.rows();
    if n == 0 {
        return Err(Error::NoRows);
    }
    let region = cfg.rule.evaluate(&features, &feature_names)?;
    let inside = region.iter().filter(|&&b| b).count();
    if inside == 0 || inside == n {
        return Err(Error::InvalidInput(format!(
            "region rule `{}` selects {inside} of {n} rows; it must be neither empty nor full",
            cfg.rule
        )));
    }
    let n_groups = cfg.n_groups();
    let agents = agent_names(cfg.n_agents);
    let agent_groups: Vec<usize> = (0..cfg.n_agents).map(|i| agent_group(i, cfg.n_agents, n_groups)).collect();
    let probabilities: Vec<Vec<f64>> = features
        .iter_rows()
        .zip(&region)
        .map(|(row, &r)| {
            let z = base.logit(row);
            cfg.group_coefficients
                .iter()
                .map(|&c| sigmoid(z + if r { c } else { 0.0 }))
                .collect()
        })
        .collect();
    let mut assign_rng = derived_rng(cfg.seed, &[1]);
    let mut decide_rng = derived_rng(cfg.seed, &[2]);
    let agent_index: Vec<usize> = (0..n).map(|_| assign_rng.random_range(0..cfg.n_agents)).collect();
    let decisions: Vec<u8> = agent_index
        .iter()
        .zip(&probabilities)
        .map(|(&a, p)| u8::from(decide_rng.random::<f64>() < p[agent_groups[a]]))
        .collect();
    let dataset = Dataset::with_vocabulary(features, feature_names, agents.clone(), agent_index, decisions)?;
    let truth = SyntheticTruth {
        rule: cfg.rule.clone(),
        base: base.clone(),
        group_coefficients: cfg.group_coefficients.clone(),
        agents,
        agent_groups,
        region: Membership(region),
        probabilities,
        seed: cfg.seed,
    };
    Ok((dataset, truth))
}

/// Generates fully synthetic features and decisions under the default base policy.
pub fn generate(cfg: &SyntheticConfig) -> Result<(Dataset, SyntheticTruth)> {
    validate(cfg)?;
    let features = synthetic_features(cfg.n_rows, &mut derived_rng(cfg.seed, &[0]));
    let names = SYNTHETIC_FEATURES.iter().map(|s| s.to_string()).collect();
    generate_from_features(features, names, &BasePolicy::synthetic_default(), cfg)
}

/// [`generate`] with `n_groups` coefficients equally spaced on `[-1.5, 1.5]`.
pub fn generate_multigroup(
    n_rows: usize,
    n_agents: usize,
    n_groups: usize,
    rule: RegionRule,
    seed: u64,
) -> Result<(Dataset, SyntheticTruth)> {
    generate(&SyntheticConfig::multigroup(n_rows, n_agents, n_groups, rule, seed)?)
}

/// A finite data-generating process: enumerable contexts, an assignment
/// distribution `pi(a | x)` that may depend on the context, and one decision
/// probability per (context, agent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDgp {
    pub context_probs: Vec<f64>,
    /// `assignment[x][a] = pi(a | x)`.
    pub assignment: Vec<Vec<f64>>,
    /// `policies[x][a] = P(Y(a) = 1 | x)`.
    pub policies: Vec<Vec<f64>>,
}

/// Rows sampled from a [`DiscreteDgp`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSample {
    pub context: Vec<usize>,
    pub agent: Vec<usize>,
    pub decision: Vec<u8>,
}

impl DiscreteDgp {
    /// A random process with `n_contexts` contexts and `n_agents` agents.
    pub fn random(n_contexts: usize, n_agents: usize, rng: &mut Rng) -> Self {
        let normalize = |v: Vec<f64>| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let context_probs = normalize((0..n_contexts).map(|_| rng.random_range(0.5..1.5)).collect());
        let assignment = (0..n_contexts)
            .map(|_| normalize((0..n_agents).map(|_| rng.random_range(0.2..1.0)).collect()))
            .collect();
        let policies = (0..n_contexts)
            .map(|_| (0..n_agents).map(|_| rng.random_range(0.05..0.95)).collect())
            .collect();
        Self {
            context_probs,
            assignment,
            policies,
        }
    }

    pub fn n_contexts(&self) -> usize {
        self.context_probs.len()
    }

    pub fn n_agents(&self) -> usize {
        self.assignment[0].len()
    }

    /// `E[Y | X = x] = sum_a pi(a | x) p_a(x)`.
    pub fn outcome_mean(&self, x: usize) -> f64 {
        self.assignment[x].iter().zip(&self.policies[x]).map(|(p, q)| p * q).sum()
    }

    /// `Q(S, G) = sum_{a: G(a)=1} P(A=a | X in S) E[Y(a) - Y(pi) | A=a, X in S]`,
    /// with `S` given as a set of contexts.
    pub fn counterfactual_q(&self, in_region: &[bool], g: &Grouping) -> Result<f64> {
        let p_s: f64 = (0..self.n_contexts())
            .filter(|&x| in_region[x])
            .map(|x| self.context_probs[x])
            .sum();
        if p_s == 0.0 {
            return Err(Error::EmptyRegion);
        }
        let mut q = 0.0;
        for x in (0..self.n_contexts()).filter(|&x| in_region[x]) {
            let m = self.outcome_mean(x);
            for a in (0..self.n_agents()).filter(|&a| g.get(a) == 1) {
                q += self.context_probs[x] * self.assignment[x][a] * (self.policies[x][a] - m);
            }
        }
        Ok(q / p_s)
    }

    pub fn sample(&self, n: usize, rng: &mut Rng) -> DiscreteSample {
        let pick = |weights: &[f64], u: f64| {
            let mut acc = 0.0;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    return i;
                }
            }
            weights.len() - 1
        };
        let mut out = DiscreteSample {
            context: Vec::with_capacity(n),
            agent: Vec::with_capacity(n),
            decision: Vec::with_capacity(n),
        };
        for _ in 0..n {
            let x = pick(&self.context_probs, rng.random());
            let a = pick(&self.assignment[x], rng.random());
            let y = u8::from(rng.random::<f64>() < self.policies[x][a]);
            out.context.push(x);
            out.agent.push(a);
            out.decision.push(y);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_parsing() {
        let r: RegionRule = "misdemeanor == 1 && age <= 35".parse().unwrap();
        assert_eq!(r.predicates.len(), 2);
        assert_eq!(r.predicates[1].op, CmpOp::Le);
        assert_eq!(r.to_string(), "misdemeanor == 1 && age <= 35");
        let lt: RegionRule = "age < 30".parse().unwrap();
        assert_eq!(lt.predicates[0].op, CmpOp::Lt);
        assert!("age ~ 3".parse::<RegionRule>().is_err());
        assert!("age <= x".parse::<RegionRule>().is_err());
    }

    #[test]
    fn rule_evaluation() {
        let names: Vec<String> = vec!["age".into(), "misdemeanor".into()];
        let x = Matrix::from_rows(&[vec![30.0, 1.0], vec![36.0, 1.0], vec![20.0, 0.0], vec![35.0, 1.0]]).unwrap();
        let m = RegionRule::misdemeanor_young().evaluate(&x, &names).unwrap();
        assert_eq!(m, vec![true, false, false, true]);
        assert!(RegionRule::drug_possession().evaluate(&x, &names).is_err());
    }

    #[test]
    fn coefficient_spread() {
        assert_eq!(spread_coefficients(2, 1.5), vec![-1.5, 1.5]);
        assert_eq!(spread_coefficients(3, 1.5), vec![-1.5, 0.0, 1.5]);
        let mut sizes = [0usize; 10];
        for i in 0..40 {
            sizes[agent_group(i, 40, 10)] += 1;
        }
        assert_eq!(sizes, [4; 10]);
    }

    #[test]
    fn agent_names_are_padded() {
        assert_eq!(agent_names(3), vec!["agent_00", "agent_01", "agent_02"]);
        assert_eq!(agent_names(120)[7], "agent_007");
    }

    #[test]
    fn deterministic_and_consistent() {
        let cfg = SyntheticConfig::two_group(800, 10, RegionRule::drug_possession(), 5);
        let (a, ta) = generate(&cfg).unwrap();
        let (b, tb) = generate(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let c = generate(&SyntheticConfig { seed: 6, ..cfg }).unwrap().0;
        assert_ne!(a, c);
        assert_eq!(ta.agent_groups, vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1]);
        let back = SyntheticTruth::from_json(&ta.to_json().unwrap()).unwrap();
        assert_eq!(back, ta);
    }

    #[test]
    fn single_group_objective_is_zero() {
        let cfg = SyntheticConfig {
            group_coefficients: vec![0.0],
            ..SyntheticConfig::two_group(300, 6, RegionRule::drug_possession(), 1)
        };
        let (_, t) = generate(&cfg).unwrap();
        let q = counterfactual_q(&t, &t.region, &Grouping(vec![1, 0, 1, 0, 1, 1])).unwrap();
        assert!(q.abs() < 1e-15);
    }

    #[test]
    fn two_group_closed_form() {
        // every row shares one context, so p1 and p0 are single numbers
        let names = vec!["drug_possession".to_string(), "k".to_string()];
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![f64::from(u8::from(i < 5)), 0.0]).collect();
        let base = BasePolicy {
            feature_names: names.clone(),
            weights: vec![0.0, 0.0],
            intercept: -0.2,
        };
        let cfg = SyntheticConfig::two_group(0, 4, RegionRule::drug_possession(), 3);
        let (_, t) = generate_from_features(Matrix::from_rows(&rows).unwrap(), names, &base, &cfg).unwrap();
        let p0 = sigmoid(-0.2);
        let p1 = sigmoid(1.3);
        let upper = t.binary_grouping().unwrap();
        let q = counterfactual_q(&t, &t.region, &upper).unwrap();
        assert!((q - 0.5 * (p1 - (p1 + p0) / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_region_errors() {
        let cfg = SyntheticConfig::two_group(200, 4, "age >= 0".parse().unwrap(), 1);
        assert!(generate(&cfg).is_err());
        let cfg = SyntheticConfig::two_group(200, 4, "age < 0".parse().unwrap(), 1);
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn policy_means_monotone_in_coefficient() {
        let cfg = SyntheticConfig {
            group_coefficients: vec![-1.0, 0.0, 0.5, 1.5],
            ..SyntheticConfig::two_group(500, 8, RegionRule::misdemeanor_young(), 2)
        };
        let (_, t) = generate(&cfg).unwrap();
        let means = t.policy_means();
        for w in means.windows(2) {
            assert!(w[0][1] < w[1][1]);
            assert!((w[0][0] - w[1][0]).abs() < 1e-15);
        }
    }
}
