//! Residuals, the empirical objective `q_hat(S, G)`, the optimal grouping and
//! its partial maximization `l_hat(S)`.
//!
//! All objective values are computed from per-agent residual sums over the
//! region, each accumulated in row order and then combined in agent-index
//! order. With that order fixed, `q_hat` at the optimal grouping is exactly
//! the largest `q_hat` over all groupings and exactly equals `l_hat`, because
//! rounded addition is monotone in each argument.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::learners::Model;

/// Per-row `y - f(x)` aligned with a dataset's agent column.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    values: Vec<f64>,
    agent_index: Vec<usize>,
    n_agents: usize,
}

impl Residuals {
    /// `r_i = y_i - scores_i`. Scores outside `[0, 1]` are rejected, not clipped.
    pub fn from_scores(dataset: &Dataset, scores: &[f64]) -> Result<Self> {
        if scores.len() != dataset.len() {
            return Err(Error::InvalidInput(format!(
                "{} scores for {} rows",
                scores.len(),
                dataset.len()
            )));
        }
        let values = scores
            .iter()
            .zip(dataset.decisions())
            .enumerate()
            .map(|(row, (&s, &y))| {
                if (0.0..=1.0).contains(&s) {
                    Ok(f64::from(y) - s)
                } else {
                    Err(Error::ScoreOutOfRange { row, score: s })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            values,
            agent_index: dataset.agent_index().to_vec(),
            n_agents: dataset.n_agents(),
        })
    }

    /// Builds residuals directly; used by tests and by callers with their
    /// own outcome estimates.
    pub fn from_parts(values: Vec<f64>, agent_index: Vec<usize>, n_agents: usize) -> Result<Self> {
        if values.len() != agent_index.len() {
            return Err(Error::InvalidInput("residual and agent lengths differ".into()));
        }
        if let Some(&a) = agent_index.iter().find(|&&a| a >= n_agents) {
            return Err(Error::InvalidInput(format!("agent index {a} out of range")));
        }
        if let Some(v) = values.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::InvalidInput(format!("residual {v} outside [-1, 1]")));
        }
        Ok(Self {
            values,
            agent_index,
            n_agents,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn agent_index(&self) -> &[usize] {
        &self.agent_index
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Residuals of `f` on `dataset`.
pub fn residuals(f: &Model, dataset: &Dataset) -> Result<Residuals> {
    let scores = f.predict(dataset.features())?;
    Residuals::from_scores(dataset, &scores)
}

/// Per-row region indicator. Serialized as a string of `0`/`1` characters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Membership(pub Vec<bool>);

impl Serialize for Membership {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let bits: String = self.0.iter().map(|&b| if b { '1' } else { '0' }).collect();
        serializer.serialize_str(&bits)
    }
}

impl<'de> Deserialize<'de> for Membership {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let bits = String::deserialize(deserializer)?;
        bits.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!("bad membership bit `{other}`"))),
            })
            .collect::<std::result::Result<Vec<bool>, _>>()
            .map(Membership)
    }
}

impl Membership {
    pub fn all(n: usize) -> Self {
        Membership(vec![true; n])
    }

    pub fn from_indices(n: usize, idx: &[usize]) -> Self {
        let mut m = vec![false; n];
        for &i in idx {
            m[i] = true;
        }
        Membership(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&i| self.0[i]).collect()
    }
}

/// Binary label per agent index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Grouping(pub Vec<u8>);

impl Grouping {
    pub fn n_agents(&self) -> usize {
        self.0.len()
    }

    pub fn get(&self, agent: usize) -> u8 {
        self.0[agent]
    }

    pub fn complement(&self) -> Grouping {
        Grouping(self.0.iter().map(|&g| 1 - g).collect())
    }

    /// `(agent id, label)` pairs for reports.
    pub fn labelled(&self, agents: &[String]) -> Vec<(String, u8)> {
        agents.iter().cloned().zip(self.0.iter().copied()).collect()
    }
}

/// Per-agent `q_hat(S, 1{A = a})` and which agents have no rows in `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBiases {
    pub bias: Vec<f64>,
    pub absent: Vec<bool>,
    pub region_size: usize,
}

fn check(r: &Residuals, s: &Membership) -> Result<usize> {
    if s.len() != r.len() {
        return Err(Error::InvalidInput(format!(
            "membership has {} rows, residuals {}",
            s.len(),
            r.len()
        )));
    }
    match s.count() {
        0 => Err(Error::EmptyRegion),
        n => Ok(n),
    }
}

/// Residual sum and row count per agent over the region, accumulated in row order.
pub fn agent_region_sums(r: &Residuals, s: &Membership) -> (Vec<f64>, Vec<usize>) {
    let mut sums = vec![0.0; r.n_agents];
    let mut counts = vec![0usize; r.n_agents];
    for ((&v, &a), &inside) in r.values.iter().zip(&r.agent_index).zip(s.as_slice()) {
        if inside {
            sums[a] += v;
            counts[a] += 1;
        }
    }
    (sums, counts)
}

pub fn q_hat(r: &Residuals, s: &Membership, g: &Grouping) -> Result<f64> {
    let n = check(r, s)?;
    if g.n_agents() != r.n_agents {
        return Err(Error::InvalidInput(format!(
            "grouping covers {} agents, data has {}",
            g.n_agents(),
            r.n_agents
        )));
    }
    let (sums, _) = agent_region_sums(r, s);
    let mut total = 0.0;
    for (a, &sum) in sums.iter().enumerate() {
        if g.get(a) == 1 {
            total += sum;
        }
    }
    Ok(total / n as f64)
}

pub fn per_agent_bias(r: &Residuals, s: &Membership) -> Result<AgentBiases> {
    let n = check(r, s)?;
    let (sums, counts) = agent_region_sums(r, s);
    Ok(AgentBiases {
        bias: sums.iter().map(|&v| v / n as f64).collect(),
        absent: counts.iter().map(|&c| c == 0).collect(),
        region_size: n,
    })
}

/// `G(a) = 1` iff the agent's region bias is `>= 0`; absent agents get 1.
pub fn optimal_grouping(r: &Residuals, s: &Membership) -> Result<Grouping> {
    check(r, s)?;
    let (sums, _) = agent_region_sums(r, s);
    Ok(Grouping(sums.iter().map(|&v| u8::from(v >= 0.0)).collect()))
}

/// `sum_a max(0, sum of r over a's region rows) / |S|`.
pub fn l_hat(r: &Residuals, s: &Membership) -> Result<f64> {
    let n = check(r, s)?;
    let (sums, _) = agent_region_sums(r, s);
    let mut total = 0.0;
    for &v in &sums {
        total += v.max(0.0);
    }
    Ok(total / n as f64)
}
