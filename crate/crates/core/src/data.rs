//! Dataset representation, CSV ingestion and train/validation/test splitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: row has a different number of columns than the first row")]
    MalformedRow { line: u64 },
    #[error("line {line}, column {col}: feature is not a number")]
    NonNumericFeature { line: u64, col: usize },
    #[error("line {line}: regression target is not a number")]
    NonNumericTarget { line: u64 },
    #[error("target column not present")]
    MissingTarget,
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("too few samples to split: {0}")]
    TooFewSamples(String),
    #[error("expected a {expected:?} dataset")]
    WrongTask { expected: TaskKind },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Classification,
    Regression,
}

/// Feature count plus optional human-readable names.
///
/// `value_labels` maps a feature index to display strings for integer-coded
/// categorical values (code `k` renders as `value_labels[i][k]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub p: usize,
    #[serde(default)]
    pub names: Option<Vec<String>>,
    #[serde(default)]
    pub target_name: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub value_labels: BTreeMap<usize, Vec<String>>,
}

impl FeatureSchema {
    pub fn generic(p: usize) -> Self {
        FeatureSchema { p, names: None, target_name: None, value_labels: BTreeMap::new() }
    }

    pub fn named<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self> {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let schema =
            FeatureSchema { p: names.len(), names: Some(names), target_name: None, value_labels: BTreeMap::new() };
        schema.validate()?;
        Ok(schema)
    }

    pub fn with_target_name(mut self, name: impl Into<String>) -> Self {
        self.target_name = Some(name.into());
        self
    }

    pub fn with_value_labels(mut self, feature: usize, labels: Vec<String>) -> Self {
        self.value_labels.insert(feature, labels);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(names) = &self.names {
            if names.len() != self.p {
                return Err(DataError::InvalidSchema(format!("{} names for {} features", names.len(), self.p)));
            }
            let mut seen = HashSet::new();
            for n in names {
                if n.is_empty() {
                    return Err(DataError::InvalidSchema("empty feature name".into()));
                }
                if !seen.insert(n.as_str()) {
                    return Err(DataError::InvalidSchema(format!("duplicate feature name {n:?}")));
                }
            }
        }
        if let Some(&i) = self.value_labels.keys().find(|&&i| i >= self.p) {
            return Err(DataError::InvalidSchema(format!("value labels for feature {i} >= p")));
        }
        Ok(())
    }
}

/// Targets of a dataset. Class labels are opaque strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    Labels { labels: Vec<String>, label_set: Vec<String> },
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Labels { labels, .. } => labels.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Targets::Labels { .. } => TaskKind::Classification,
            Targets::Values(_) => TaskKind::Regression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetRef<'a> {
    Label(&'a str),
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularDataset {
    schema: FeatureSchema,
    rows: Vec<Vec<f64>>,
    targets: Targets,
}

/// Sorts labels numerically when all of them parse as numbers, otherwise
/// lexicographically.
pub fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse::<f64>().ok()).collect();
    if numeric.is_some() {
        labels.sort_by(|a, b| {
            let x: f64 = a.trim().parse().unwrap();
            let y: f64 = b.trim().parse().unwrap();
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    } else {
        labels.sort();
    }
}

impl TabularDataset {
    pub fn classification(schema: FeatureSchema, rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let mut label_set: Vec<String> = {
            let mut seen = HashSet::new();
            labels.iter().filter(|l| seen.insert(l.as_str())).cloned().collect()
        };
        sort_labels(&mut label_set);
        Self::classification_with_label_set(schema, rows, labels, label_set)
    }

    /// Keeps `label_set` (and its order) even if some labels are absent.
    pub fn classification_with_label_set(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        labels: Vec<String>,
        label_set: Vec<String>,
    ) -> Result<Self> {
        let ds = TabularDataset { schema, rows, targets: Targets::Labels { labels, label_set } };
        ds.validate()?;
        Ok(ds)
    }

    pub fn regression(schema: FeatureSchema, rows: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        let ds = TabularDataset { schema, rows, targets: Targets::Values(values) };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        self.schema.validate()?;
        if self.rows.len() != self.targets.len() {
            return Err(DataError::InvalidDataset(format!(
                "{} rows but {} targets",
                self.rows.len(),
                self.targets.len()
            )));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != self.schema.p) {
            return Err(DataError::InvalidDataset(format!(
                "row {i} has {} features, expected {}",
                self.rows[i].len(),
                self.schema.p
            )));
        }
        if let Targets::Labels { labels, label_set } = &self.targets {
            let set: HashSet<&str> = label_set.iter().map(String::as_str).collect();
            if set.len() != label_set.len() {
                return Err(DataError::InvalidDataset("label set has duplicates".into()));
            }
            if let Some(l) = labels.iter().find(|l| !set.contains(l.as_str())) {
                return Err(DataError::InvalidDataset(format!("label {l:?} not in label set")));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self) -> usize {
        self.schema.p
    }

    pub fn task(&self) -> TaskKind {
        self.targets.task()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &Targets {
        &self.targets
    }

    pub fn target(&self, i: usize) -> TargetRef<'_> {
        match &self.targets {
            Targets::Labels { labels, .. } => TargetRef::Label(&labels[i]),
            Targets::Values(v) => TargetRef::Value(v[i]),
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        match &self.targets {
            Targets::Labels { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Values(v) => Some(v),
            Targets::Labels { .. } => None,
        }
    }

    /// Ordered label space; empty for regression.
    pub fn label_set(&self) -> &[String] {
        match &self.targets {
            Targets::Labels { label_set, .. } => label_set,
            Targets::Values(_) => &[],
        }
    }

    pub fn with_schema(mut self, schema: FeatureSchema) -> Result<Self> {
        self.schema = schema;
        self.validate()?;
        Ok(self)
    }

    /// Same targets, new feature matrix.
    pub fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<Self> {
        let ds = TabularDataset { schema: self.schema.clone(), rows, targets: self.targets.clone() };
        ds.validate()?;
        Ok(ds)
    }

    /// Same features, new labels; the label space is kept.
    pub fn with_labels(&self, labels: Vec<String>) -> Result<Self> {
        let label_set = self.label_set().to_vec();
        if self.task() != TaskKind::Classification {
            return Err(DataError::WrongTask { expected: TaskKind::Classification });
        }
        Self::classification_with_label_set(self.schema.clone(), self.rows.clone(), labels, label_set)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if self.task() != TaskKind::Regression {
            return Err(DataError::WrongTask { expected: TaskKind::Regression });
        }
        Self::regression(self.schema.clone(), self.rows.clone(), values)
    }

    /// Rows at `indices`, in that order. The label space is kept.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let targets = match &self.targets {
            Targets::Labels { labels, label_set } => Targets::Labels {
                labels: indices.iter().map(|&i| labels[i].clone()).collect(),
                label_set: label_set.clone(),
            },
            Targets::Values(v) => Targets::Values(indices.iter().map(|&i| v[i]).collect()),
        };
        TabularDataset { schema: self.schema.clone(), rows, targets }
    }

    /// Appends `other`; label spaces are merged (self's order first).
    pub fn concat(&self, other: &TabularDataset) -> Result<Self> {
        if self.p() != other.p() || self.task() != other.task() {
            return Err(DataError::InvalidDataset("cannot concatenate incompatible datasets".into()));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let targets = match (&self.targets, &other.targets) {
            (Targets::Labels { labels: a, label_set: sa }, Targets::Labels { labels: b, label_set: sb }) => {
                let mut label_set = sa.clone();
                for l in sb {
                    if !label_set.contains(l) {
                        label_set.push(l.clone());
                    }
                }
                Targets::Labels { labels: a.iter().chain(b).cloned().collect(), label_set }
            }
            (Targets::Values(a), Targets::Values(b)) => Targets::Values(a.iter().chain(b).copied().collect()),
            _ => unreachable!(),
        };
        Ok(TabularDataset { schema: self.schema.clone(), rows, targets })
    }

    /// Most frequent label; ties go to the label earliest in the label set.
    pub fn majority_label(&self) -> Option<&str> {
        let Targets::Labels { labels, label_set } = &self.targets else {
            return None;
        };
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for l in labels {
            *counts.entry(l).or_default() += 1;
        }
        let mut best: Option<(&str, usize)> = None;
        for l in label_set {
            let c = counts.get(l.as_str()).copied().unwrap_or(0);
            if c > 0 && best.is_none_or(|(_, b)| c > b) {
                best = Some((l, c));
            }
        }
        best.map(|(l, _)| l)
    }

    pub fn target_mean(&self) -> Option<f64> {
        let v = self.values()?;
        if v.is_empty() {
            return None;
        }
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }

    /// Per-class sample counts in label-set order.
    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let Targets::Labels { labels, label_set } = &self.targets else {
            return Vec::new();
        };
        label_set.iter().map(|l| (l.clone(), labels.iter().filter(|x| *x == l).count())).collect()
    }

    /// Per-feature (min, max); `None` on an empty dataset.
    pub fn feature_bounds(&self) -> Option<Vec<(f64, f64)>> {
        if self.rows.is_empty() {
            return None;
        }
        let mut b = vec![(f64::INFINITY, f64::NEG_INFINITY); self.p()];
        for r in &self.rows {
            for (j, &v) in r.iter().enumerate() {
                b[j].0 = b[j].0.min(v);
                b[j].1 = b[j].1.max(v);
            }
        }
        Some(b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Bare integers are 0-based column indices, anything else is a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

pub fn load_csv(
    path: impl AsRef<Path>,
    task: TaskKind,
    target: &TargetColumn,
    has_header: bool,
) -> Result<TabularDataset> {
    read_csv(File::open(path)?, task, target, has_header)
}

pub fn read_csv<R: Read>(reader: R, task: TaskKind, target: &TargetColumn, has_header: bool) -> Result<TabularDataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(reader);

    let mut records = rdr.records();
    let mut header: Option<Vec<String>> = None;
    let mut width: Option<usize> = None;
    let mut target_idx: Option<usize> = None;
    let mut rows = Vec::new();
    let mut raw_targets: Vec<(u64, String)> = Vec::new();

    for rec in records.by_ref() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        match width {
            None => width = Some(rec.len()),
            Some(w) if w != rec.len() => return Err(DataError::MalformedRow { line }),
            _ => {}
        }
        if has_header && header.is_none() {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let t = match target_idx {
            Some(t) => t,
            None => {
                let t = resolve_target(target, header.as_deref(), rec.len())?;
                target_idx = Some(t);
                t
            }
        };
        let mut row = Vec::with_capacity(rec.len() - 1);
        for (col, cell) in rec.iter().enumerate() {
            if col == t {
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumericFeature { line, col: col + 1 })?;
            row.push(v);
        }
        rows.push(row);
        raw_targets.push((line, rec[t].to_string()));
    }

    let ncols = width.unwrap_or(0);
    let t = match (target_idx, ncols) {
        (Some(t), _) => Some(t),
        (None, 0) => None,
        (None, n) => Some(resolve_target(target, header.as_deref(), n)?),
    };
    let p = if ncols == 0 { 0 } else { ncols - 1 };
    let mut schema = FeatureSchema::generic(p);
    if let (Some(h), Some(t)) = (header, t) {
        schema.target_name = Some(h[t].clone());
        schema.names = Some(h.into_iter().enumerate().filter(|(i, _)| *i != t).map(|(_, s)| s).collect());
    }

    match task {
        TaskKind::Classification => {
            TabularDataset::classification(schema, rows, raw_targets.into_iter().map(|(_, s)| s).collect())
        }
        TaskKind::Regression => {
            let values = raw_targets
                .into_iter()
                .map(|(line, s)| s.parse::<f64>().map_err(|_| DataError::NonNumericTarget { line }))
                .collect::<Result<Vec<_>>>()?;
            TabularDataset::regression(schema, rows, values)
        }
    }
}

fn resolve_target(target: &TargetColumn, header: Option<&[String]>, ncols: usize) -> Result<usize> {
    match target {
        TargetColumn::Index(i) if *i < ncols => Ok(*i),
        TargetColumn::Index(_) => Err(DataError::MissingTarget),
        TargetColumn::Name(name) => {
            header.and_then(|h| h.iter().position(|c| c == name)).ok_or(DataError::MissingTarget)
        }
    }
}

/// Writes features followed by the target as the last column. Numbers use the
/// shortest representation that parses back to the same `f64`.
pub fn write_csv<W: Write>(ds: &TabularDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().quote_style(csv::QuoteStyle::Necessary).from_writer(writer);
    let names: Vec<String> = match &ds.schema.names {
        Some(n) => n.clone(),
        None => (1..=ds.p()).map(|i| format!("x{i}")).collect(),
    };
    let mut header = names;
    header.push(ds.schema.target_name.clone().unwrap_or_else(|| "y".into()));
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec: Vec<String> = ds.rows[i].iter().map(|v| v.to_string()).collect();
        rec.push(match ds.target(i) {
            TargetRef::Label(l) => l.to_string(),
            TargetRef::Value(v) => v.to_string(),
        });
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &TabularDataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, File::create(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// (train, validation, test)
    pub fractions: [f64; 3],
    pub seed: u64,
    #[serde(default)]
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64, seed: u64) -> Self {
        SplitSpec { fractions: [train, validation, test], seed, stratified: false }
    }

    pub fn stratified(mut self, yes: bool) -> Self {
        self.stratified = yes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::InvalidSplit(format!("fractions sum to {sum}")));
        }
        if self.fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(DataError::InvalidSplit("each fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `n` items over `fractions`, with every
/// part at least one. Remainder ties go to the earlier part.
fn apportion(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for (c, e) in counts.iter_mut().zip(&exact) {
        *c = e.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = n.saturating_sub(counts.iter().sum());
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    for i in 0..3 {
        while counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
            if counts[donor] <= 1 {
                break;
            }
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    counts
}

pub fn split_indices(ds: &TabularDataset, spec: &SplitSpec) -> Result<SplitIndices> {
    spec.validate()?;
    let mut rng = rng::seeded(rng::derive(spec.seed, "split"));
    let mut parts: [Vec<usize>; 3] = Default::default();

    let groups: Vec<Vec<usize>> = if spec.stratified {
        let Targets::Labels { labels, label_set } = &ds.targets else {
            return Err(DataError::WrongTask { expected: TaskKind::Classification });
        };
        label_set
            .iter()
            .map(|l| (0..ds.n()).filter(|&i| &labels[i] == l).collect::<Vec<_>>())
            .filter(|g: &Vec<usize>| !g.is_empty())
            .collect()
    } else {
        vec![(0..ds.n()).collect()]
    };

    for mut group in groups {
        if group.len() < 3 {
            return Err(DataError::TooFewSamples(format!(
                "{} samples cannot fill three non-empty splits",
                group.len()
            )));
        }
        group.shuffle(&mut rng);
        let counts = apportion(group.len(), &spec.fractions);
        let mut it = group.into_iter();
        for (part, c) in parts.iter_mut().zip(counts) {
            part.extend(it.by_ref().take(c));
        }
    }
    if spec.stratified {
        for part in parts.iter_mut() {
            part.shuffle(&mut rng);
        }
    }
    let [train, validation, test] = parts;
    Ok(SplitIndices { train, validation, test })
}

pub fn split(ds: &TabularDataset, spec: &SplitSpec) -> Result<(TabularDataset, TabularDataset, TabularDataset)> {
    let idx = split_indices(ds, spec)?;
    Ok((ds.subset(&idx.train), ds.subset(&idx.validation), ds.subset(&idx.test)))
}
