//! Datasets of `(features, agent, decision)` rows: CSV ingestion, normalization
//! and per-agent stratified splitting.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// Rows of context features, the agent that decided, and the binary decision.
///
/// Agent ids are opaque strings mapped to dense indices. A dataset carries the
/// full agent vocabulary of its source, so subsets produced by splitting keep
/// indices aligned with their parent even when an agent has no rows in the
/// subset. `row_ids` records each row's position in the originating file.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    feature_names: Vec<String>,
    agents: Vec<String>,
    agent_index: Vec<usize>,
    decisions: Vec<u8>,
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from per-row agent labels. The agent vocabulary is
    /// ordered by first appearance.
    pub fn new(
        features: Matrix,
        feature_names: Vec<String>,
        agent_labels: &[String],
        decisions: Vec<u8>,
    ) -> Result<Self> {
        let mut lookup: HashMap<&str, usize> = HashMap::new();
        let mut agents = Vec::new();
        let agent_index = agent_labels
            .iter()
            .map(|a| {
                *lookup.entry(a.as_str()).or_insert_with(|| {
                    agents.push(a.clone());
                    agents.len() - 1
                })
            })
            .collect();
        Self::with_vocabulary(features, feature_names, agents, agent_index, decisions)
    }

    /// Builds a dataset whose rows reference an explicit agent vocabulary.
    pub fn with_vocabulary(
        features: Matrix,
        feature_names: Vec<String>,
        agents: Vec<String>,
        agent_index: Vec<usize>,
        decisions: Vec<u8>,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::NoRows);
        }
        if agent_index.len() != n || decisions.len() != n {
            return Err(Error::InvalidInput(format!(
                "per-row lengths differ: {n} feature rows, {} agents, {} decisions",
                agent_index.len(),
                decisions.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(Error::InvalidInput(format!(
                "{} feature names for {} feature columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some(i) = decisions.iter().position(|&d| d > 1) {
            return Err(Error::InvalidInput(format!(
                "decision at row {} is {}, expected 0 or 1",
                i + 1,
                decisions[i]
            )));
        }
        if let Some(&a) = agent_index.iter().find(|&&a| a >= agents.len()) {
            return Err(Error::InvalidInput(format!(
                "agent index {a} outside vocabulary of {}",
                agents.len()
            )));
        }
        Ok(Self {
            row_ids: (0..n).collect(),
            features,
            feature_names,
            agents,
            agent_index,
            decisions,
        })
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|f| f == name)
    }

    /// The agent vocabulary; position = dense agent index.
    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_index(&self) -> &[usize] {
        &self.agent_index
    }

    pub fn decisions(&self) -> &[u8] {
        &self.decisions
    }

    pub fn decisions_f64(&self) -> Vec<f64> {
        self.decisions.iter().map(|&d| d as f64).collect()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Row counts per agent index (agents without rows count 0).
    pub fn agent_row_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.agents.len()];
        for &a in &self.agent_index {
            counts[a] += 1;
        }
        counts
    }

    /// Rows at `idx`, in the given order. The vocabulary is kept.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::NoRows);
        }
        Ok(Self {
            features: self.features.select_rows(idx),
            feature_names: self.feature_names.clone(),
            agents: self.agents.clone(),
            agent_index: idx.iter().map(|&i| self.agent_index[i]).collect(),
            decisions: idx.iter().map(|&i| self.decisions[i]).collect(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
        })
    }

    /// Rows of `self` followed by rows of `other`; both must share a vocabulary.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.agents != other.agents || self.feature_names != other.feature_names {
            return Err(Error::InvalidInput(
                "concat: datasets differ in agent vocabulary or feature names".into(),
            ));
        }
        let mut out = self.clone();
        out.features = self.features.vstack(&other.features)?;
        out.agent_index.extend_from_slice(&other.agent_index);
        out.decisions.extend_from_slice(&other.decisions);
        out.row_ids.extend_from_slice(&other.row_ids);
        Ok(out)
    }

    /// Same rows with the agent column replaced.
    pub fn with_agent_index(&self, agent_index: Vec<usize>) -> Result<Self> {
        if agent_index.len() != self.len() {
            return Err(Error::InvalidInput("agent column length mismatch".into()));
        }
        let mut out = self.clone();
        out.agent_index = agent_index;
        Ok(out)
    }

    pub fn with_features(&self, features: Matrix, feature_names: Vec<String>) -> Result<Self> {
        if features.rows() != self.len() || features.cols() != feature_names.len() {
            return Err(Error::InvalidInput("feature matrix shape mismatch".into()));
        }
        let mut out = self.clone();
        out.features = features;
        out.feature_names = feature_names;
        Ok(out)
    }

    pub fn with_row_ids(mut self, row_ids: Vec<usize>) -> Result<Self> {
        if row_ids.len() != self.len() {
            return Err(Error::InvalidInput("row id length mismatch".into()));
        }
        self.row_ids = row_ids;
        Ok(self)
    }
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub agent_col: String,
    pub decision_col: String,
    pub feature_cols: Vec<String>,
}

impl CsvSchema {
    fn validate(&self) -> Result<()> {
        if self.feature_cols.is_empty() {
            return Err(Error::Schema("at least one feature column is required".into()));
        }
        let mut seen = std::collections::HashSet::new();
        let all = [&self.agent_col, &self.decision_col]
            .into_iter()
            .chain(self.feature_cols.iter());
        for c in all {
            if !seen.insert(c.as_str()) {
                return Err(Error::Schema(format!("column `{c}` is assigned more than one role")));
            }
        }
        Ok(())
    }
}

fn parse_decision(cell: &str, row: usize, column: &str) -> Result<u8> {
    let err = |message: String| Error::Parse {
        row,
        column: column.to_string(),
        message,
    };
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| err(format!("cannot parse `{cell}` as a decision")))?;
    if v == 0.0 {
        Ok(0)
    } else if v == 1.0 {
        Ok(1)
    } else {
        Err(err(format!("decision value `{cell}` is not 0 or 1")))
    }
}

/// Reads a headered UTF-8 CSV. Row numbers in errors are 1-based data rows
/// (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    schema.validate()?;
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in {}", path.display())))
    };
    let agent_col = find(&schema.agent_col)?;
    let decision_col = find(&schema.decision_col)?;
    let feature_cols = schema
        .feature_cols
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;

    let mut values = Vec::new();
    let mut agents = Vec::new();
    let mut decisions = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 1;
        for (&col, name) in feature_cols.iter().zip(&schema.feature_cols) {
            let cell = record.get(col).unwrap_or("");
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: name.clone(),
                message: format!("cannot parse `{cell}` as a number"),
            })?;
            values.push(v);
        }
        agents.push(record.get(agent_col).unwrap_or("").trim().to_string());
        decisions.push(parse_decision(
            record.get(decision_col).unwrap_or(""),
            row,
            &schema.decision_col,
        )?);
    }
    if decisions.is_empty() {
        return Err(Error::NoRows);
    }
    let features = Matrix::new(decisions.len(), feature_cols.len(), values)?;
    Dataset::new(features, schema.feature_cols.clone(), &agents, decisions)
}

/// Writes features, then the agent and decision columns. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv(
    dataset: &Dataset,
    path: impl AsRef<Path>,
    agent_col: &str,
    decision_col: &str,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = dataset.feature_names.iter().map(String::as_str).collect();
    header.push(agent_col);
    header.push(decision_col);
    w.write_record(&header)?;
    for i in 0..dataset.len() {
        let mut rec: Vec<String> = dataset.features.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(dataset.agents[dataset.agent_index[i]].clone());
        rec.push(dataset.decisions[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Per-feature statistics returned by [`normalize`]. `std` is the population
/// standard deviation (divide by n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Features with zero variance; these were mapped to all-zeros.
    pub degenerate: Vec<String>,
    pub warnings: Vec<String>,
}

impl NormalizationStats {
    /// Maps a normalized value of feature `j` back to original units.
    pub fn invert(&self, j: usize, z: f64) -> f64 {
        if self.std[j] > 0.0 {
            z * self.std[j] + self.mean[j]
        } else {
            self.mean[j]
        }
    }

    /// Standardizes `dataset` with these statistics (e.g. test rows with
    /// training statistics). Degenerate features map to zero.
    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.feature_names != self.feature_names {
            return Err(Error::Schema(format!(
                "features {:?} do not match the normalization features {:?}",
                dataset.feature_names, self.feature_names
            )));
        }
        let mut out = dataset.features.clone();
        for i in 0..out.rows() {
            for j in 0..out.cols() {
                let v = out.get(i, j);
                let z = if self.std[j] > 0.0 { (v - self.mean[j]) / self.std[j] } else { 0.0 };
                out.set(i, j, z);
            }
        }
        let mut normalized = dataset.clone();
        normalized.features = out;
        Ok(normalized)
    }
}

/// Standardizes every feature to mean 0 and population std 1.
pub fn normalize(dataset: &Dataset) -> (Dataset, NormalizationStats) {
    let x = dataset.features();
    let n = x.rows() as f64;
    let mut out = x.clone();
    let mut stats = NormalizationStats {
        feature_names: dataset.feature_names.clone(),
        mean: Vec::with_capacity(x.cols()),
        std: Vec::with_capacity(x.cols()),
        degenerate: Vec::new(),
        warnings: Vec::new(),
    };
    for j in 0..x.cols() {
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        // rounding noise on a constant column is far below this
        let degenerate = !(std > 1e-12 * mean.abs().max(1.0));
        for (i, v) in col.iter().enumerate() {
            out.set(i, j, if degenerate { 0.0 } else { (v - mean) / std });
        }
        if degenerate {
            let name = &dataset.feature_names[j];
            stats.degenerate.push(name.clone());
            stats
                .warnings
                .push(format!("feature `{name}` has zero variance; mapped to zeros"));
        }
        stats.mean.push(mean);
        stats.std.push(if degenerate { 0.0 } else { std });
    }
    let mut normalized = dataset.clone();
    normalized.features = out;
    (normalized, stats)
}

/// Train/validation/test fractions with per-agent minimum counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub fractions: [f64; 3],
    pub min_per_agent: [usize; 3],
    pub seed: u64,
}

impl SplitSpec {
    /// 60/20/20 with at least one row per agent in each part.
    pub fn standard(seed: u64) -> Self {
        Self {
            fractions: [0.6, 0.2, 0.2],
            min_per_agent: [1, 1, 1],
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.fractions.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::InvalidInput("split fractions must be nonnegative".into()));
        }
        let total: f64 = self.fractions.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "split fractions sum to {total}, expected 1"
            )));
        }
        Ok(())
    }
}

/// Per-part row counts for one agent of size `n`.
///
/// The minimums are reserved first. The remaining rows are distributed in
/// proportion to each part's shortfall `max(0, fraction * n - min)`, using
/// largest remainders (ties go to the earlier part).
pub fn allocate_counts(n: usize, spec: &SplitSpec) -> Option<[usize; 3]> {
    let reserved: usize = spec.min_per_agent.iter().sum();
    if reserved > n {
        return None;
    }
    let rest = n - reserved;
    let mut counts = spec.min_per_agent;
    if rest == 0 {
        return Some(counts);
    }
    let weights: Vec<f64> = (0..3)
        .map(|k| (spec.fractions[k] * n as f64 - spec.min_per_agent[k] as f64).max(0.0))
        .collect();
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if total > 0.0 {
        weights.iter().map(|w| w / total * rest as f64).collect()
    } else {
        // fractions give nothing beyond the minimums; follow the fractions
        spec.fractions.iter().map(|f| f * rest as f64).collect()
    };
    let mut assigned = 0;
    for k in 0..3 {
        let q = quotas[k].floor() as usize;
        counts[k] += q;
        assigned += q;
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    let mut left = rest - assigned.min(rest);
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    Some(counts)
}

/// Row counts per agent and part, emitted alongside splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub agents: Vec<String>,
    /// `counts[a] = [train, validation, test]`.
    pub counts: Vec<[usize; 3]>,
    pub totals: [usize; 3],
}

/// Result of [`split_stratified`]. A part is `None` when no agent contributes
/// rows to it (e.g. a zero fraction with a zero minimum).
#[derive(Debug, Clone)]
pub struct Split {
    pub parts: [Option<Dataset>; 3],
    pub report: SplitReport,
}

impl Split {
    fn part(&self, k: usize, name: &str) -> Result<&Dataset> {
        self.parts[k]
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("{name} split is empty")))
    }

    pub fn train(&self) -> Result<&Dataset> {
        self.part(0, "train")
    }

    pub fn validation(&self) -> Result<&Dataset> {
        self.part(1, "validation")
    }

    pub fn test(&self) -> Result<&Dataset> {
        self.part(2, "test")
    }
}

/// Splits rows into train/validation/test, stratified by agent.
///
/// For each agent the rows are shuffled with a seed derived from
/// `(spec.seed, agent index)` and cut according to [`allocate_counts`].
/// Output datasets keep the original row order.
pub fn split_stratified(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut by_agent: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_agents()];
    for (i, &a) in dataset.agent_index.iter().enumerate() {
        by_agent[a].push(i);
    }
    let mut parts: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut counts = Vec::with_capacity(by_agent.len());
    for (a, rows) in by_agent.iter_mut().enumerate() {
        if rows.is_empty() {
            counts.push([0, 0, 0]);
            continue;
        }
        let c = allocate_counts(rows.len(), spec).ok_or_else(|| Error::InfeasibleSplit {
            agent: dataset.agents[a].clone(),
            message: format!(
                "{} rows cannot satisfy minimums {:?}",
                rows.len(),
                spec.min_per_agent
            ),
        })?;
        let mut r = rng::derived_rng(spec.seed, &[a as u64]);
        rows.shuffle(&mut r);
        parts[0].extend_from_slice(&rows[..c[0]]);
        parts[1].extend_from_slice(&rows[c[0]..c[0] + c[1]]);
        parts[2].extend_from_slice(&rows[c[0] + c[1]..]);
        counts.push(c);
    }
    let totals = [parts[0].len(), parts[1].len(), parts[2].len()];
    let mut out: [Option<Dataset>; 3] = [None, None, None];
    for (k, idx) in parts.iter_mut().enumerate() {
        if !idx.is_empty() {
            idx.sort_unstable();
            out[k] = Some(dataset.subset(idx)?);
        }
    }
    Ok(Split {
        parts: out,
        report: SplitReport {
            agents: dataset.agents.clone(),
            counts,
            totals,
        },
    })
}

/// One cross-validation fold: rows used for fitting and rows held out.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train: Dataset,
    pub heldout: Dataset,
}

/// `k` folds stratified by agent. Each agent's shuffled rows are dealt
/// round-robin into the `k` held-out portions. An agent with fewer than `k`
/// rows has its rows reused across held-out portions so that every portion
/// contains at least one of its rows; these are the only rows held out in
/// more than one fold.
pub fn kfold_stratified(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k-fold needs k >= 2, got {k}")));
    }
    let mut by_agent: Vec<Vec<usize>> = vec![Vec::new(); dataset.n_agents()];
    for (i, &a) in dataset.agent_index.iter().enumerate() {
        by_agent[a].push(i);
    }
    let mut heldout: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (a, rows) in by_agent.iter_mut().enumerate() {
        if rows.is_empty() {
            continue;
        }
        let mut r = rng::derived_rng(seed, &[a as u64]);
        rows.shuffle(&mut r);
        if rows.len() >= k {
            for (j, &row) in rows.iter().enumerate() {
                heldout[j % k].push(row);
            }
        } else {
            for (f, part) in heldout.iter_mut().enumerate() {
                part.push(rows[f % rows.len()]);
            }
        }
    }
    heldout
        .into_iter()
        .enumerate()
        .map(|(f, mut ho)| {
            ho.sort_unstable();
            let mut in_ho = vec![false; dataset.len()];
            for &i in &ho {
                in_ho[i] = true;
            }
            let tr: Vec<usize> = (0..dataset.len()).filter(|&i| !in_ho[i]).collect();
            Ok(Fold {
                train: dataset
                    .subset(&tr)
                    .map_err(|e| e.context(format!("fold {f} training rows")))?,
                heldout: dataset.subset(&ho)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn schema(features: &[&str]) -> CsvSchema {
        CsvSchema {
            agent_col: "agent".into(),
            decision_col: "y".into(),
            feature_cols: features.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn toy(n: usize, n_agents: usize) -> Dataset {
        let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
        let agents: Vec<String> = (0..n).map(|i| format!("a{}", i % n_agents)).collect();
        let y = (0..n).map(|i| (i % 2) as u8).collect();
        Dataset::new(x, vec!["x".into()], &agents, y).unwrap()
    }

    #[test]
    fn load_three_rows() {
        let f = write_file("age,agent,y\n30,a,1\n41,b,0\n25,a,1\n");
        let d = load_csv(f.path(), &schema(&["age"])).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_features(), 1);
        assert_eq!(d.n_agents(), 2);
        assert_eq!(d.agent_index(), &[0, 1, 0]);
        assert_eq!(d.features().column(0), vec![30.0, 41.0, 25.0]);
    }

    #[test]
    fn bad_decision_names_row() {
        let f = write_file("age,agent,y\n1,a,0\n2,a,1\n3,b,0\n4,b,1\n5,a,2\n");
        let err = load_csv(f.path(), &schema(&["age"])).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => {
                assert_eq!(row, 5);
                assert_eq!(column, "y");
            }
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn header_only_is_no_rows() {
        let f = write_file("age,agent,y\n");
        let err = load_csv(f.path(), &schema(&["age"])).unwrap_err();
        assert!(matches!(err, Error::NoRows));
        assert_eq!(err.to_string(), "no rows");
    }

    #[test]
    fn unparseable_cell_and_missing_file() {
        let f = write_file("age,agent,y\n1,a,0\nxx,a,1\n");
        match load_csv(f.path(), &schema(&["age"])).unwrap_err() {
            Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (2, "age")),
            e => panic!("{e}"),
        }
        assert!(matches!(
            load_csv("/nonexistent/file.csv", &schema(&["age"])),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn duplicate_roles_rejected() {
        let f = write_file("age,agent,y\n1,a,0\n");
        let s = CsvSchema {
            agent_col: "agent".into(),
            decision_col: "y".into(),
            feature_cols: vec!["age".into(), "y".into()],
        };
        assert!(matches!(load_csv(f.path(), &s), Err(Error::Schema(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let f = write_file("u,v,agent,y\n0.1,1e-7,a,1\n3.141592653589793,-2.5,b,0\n");
        let s = schema(&["u", "v"]);
        let d = load_csv(f.path(), &s).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, out.path(), "agent", "y").unwrap();
        let back = load_csv(out.path(), &s).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn normalize_symmetric_and_degenerate() {
        let x = Matrix::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let d = Dataset::new(
            x,
            vec!["a".into(), "c".into()],
            &["p".into(), "p".into(), "q".into()],
            vec![0, 1, 0],
        )
        .unwrap();
        let (n, stats) = normalize(&d);
        assert_eq!(stats.mean[0], 2.0);
        // population std of [1,2,3] is sqrt(2/3)
        assert!((stats.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let col = n.features().column(0);
        assert!((col[0] + col[2]).abs() < 1e-15);
        assert_eq!(col[1], 0.0);
        assert_eq!(n.features().column(1), vec![0.0; 3]);
        assert_eq!(stats.degenerate, vec!["c".to_string()]);
        assert_eq!(stats.warnings.len(), 1);
        for i in 0..3 {
            assert!((stats.invert(0, col[i]) - d.features().get(i, 0)).abs() < 1e-12);
        }
        assert_eq!(stats.apply(&d).unwrap(), n);
        let renamed = d.with_features(d.features().clone(), vec!["a".into(), "b".into()]).unwrap();
        assert!(stats.apply(&renamed).is_err());
    }

    #[test]
    fn four_rows_standard_fractions() {
        let spec = SplitSpec {
            fractions: [0.375, 0.125, 0.5],
            min_per_agent: [1, 1, 2],
            seed: 1,
        };
        assert_eq!(allocate_counts(4, &spec), Some([1, 1, 2]));
        assert_eq!(allocate_counts(3, &spec), None);
        // 8 rows: quotas exactly 3/1/4
        assert_eq!(allocate_counts(8, &spec), Some([3, 1, 4]));
    }

    #[test]
    fn standard_split_counts() {
        let spec = SplitSpec::standard(0);
        assert_eq!(allocate_counts(10, &spec), Some([6, 2, 2]));
        assert_eq!(allocate_counts(3, &spec), Some([1, 1, 1]));
        let c = allocate_counts(7, &spec).unwrap();
        assert_eq!(c.iter().sum::<usize>(), 7);
        assert!(c.iter().all(|&v| v >= 1));
    }

    #[test]
    fn identity_split_keeps_everything_in_train() {
        let d = toy(12, 3);
        let spec = SplitSpec {
            fractions: [1.0, 0.0, 0.0],
            min_per_agent: [1, 0, 0],
            seed: 3,
        };
        assert_eq!(allocate_counts(4, &spec), Some([4, 0, 0]));
        let split = split_stratified(&d, &spec).unwrap();
        assert_eq!(split.train().unwrap().row_ids(), d.row_ids());
        assert!(split.parts[1].is_none() && split.parts[2].is_none());
        assert!(split.validation().is_err());
    }

    #[test]
    fn infeasible_split_names_agent() {
        let d = toy(7, 3); // agent a0 has 3 rows, a1 2, a2 2
        let err = split_stratified(&d, &SplitSpec::standard(0)).unwrap_err();
        match err {
            Error::InfeasibleSplit { agent, .. } => assert_eq!(agent, "a1"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn split_is_deterministic_and_seed_sensitive() {
        let d = toy(60, 4);
        let spec = SplitSpec::standard(11);
        let s1 = split_stratified(&d, &spec).unwrap();
        let s2 = split_stratified(&d, &spec).unwrap();
        assert_eq!(s1.parts, s2.parts);
        let s3 = split_stratified(&d, &SplitSpec::standard(12)).unwrap();
        assert_ne!(s1.train().unwrap().row_ids(), s3.train().unwrap().row_ids());
        assert_eq!(s1.report.counts, s3.report.counts);
        assert_eq!(s1.report.totals, [36, 12, 12]);
    }

    #[test]
    fn kfold_gives_each_agent_a_heldout_row() {
        let d = toy(30, 4);
        let folds = kfold_stratified(&d, 4, 2).unwrap();
        assert_eq!(folds.len(), 4);
        let mut seen = vec![0; d.len()];
        for f in &folds {
            assert_eq!(f.train.len() + f.heldout.len(), d.len());
            for &r in f.heldout.row_ids() {
                seen[r] += 1;
            }
            let counts = f.heldout.agent_row_counts();
            assert!(counts.iter().all(|&c| c >= 1));
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    proptest::proptest! {
        #[test]
        fn split_partitions_rows(
            n_agents in 1usize..6,
            sizes in proptest::collection::vec(3usize..20, 6),
            seed in 0u64..1000,
        ) {
            let mut agents = Vec::new();
            for a in 0..n_agents {
                for _ in 0..sizes[a] {
                    agents.push(format!("g{a}"));
                }
            }
            let n = agents.len();
            let x = Matrix::new(n, 1, (0..n).map(|i| i as f64).collect()).unwrap();
            let d = Dataset::new(x, vec!["x".into()], &agents, vec![0; n]).unwrap();
            let split = split_stratified(&d, &SplitSpec::standard(seed)).unwrap();
            let mut all: Vec<usize> = split.parts.iter().flatten()
                .flat_map(|p| p.row_ids().to_vec()).collect();
            all.sort_unstable();
            proptest::prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            for c in &split.report.counts {
                proptest::prop_assert!(c.iter().all(|&v| v >= 1));
            }
        }

        #[test]
        fn normalize_is_idempotent(values in proptest::collection::vec(-1e3f64..1e3, 3..50)) {
            let n = values.len();
            let x = Matrix::new(n, 1, values).unwrap();
            let d = Dataset::new(x, vec!["x".into()], &vec!["a".to_string(); n], vec![0; n]).unwrap();
            let (once, s) = normalize(&d);
            if s.degenerate.is_empty() {
                let (twice, _) = normalize(&once);
                for (a, b) in once.features().as_slice().iter().zip(twice.features().as_slice()) {
                    proptest::prop_assert!((a - b).abs() < 1e-9);
                }
                let col = once.features().column(0);
                proptest::prop_assert!(crate::metrics::mean(&col).abs() < 1e-9);
            }
        }
    }
}
