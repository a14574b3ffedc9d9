//! Reference learners: majority class, k-nearest neighbours, least squares and
//! multinomial logistic regression.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{TabularDataset, TaskKind};
use crate::exec::Exec;
use crate::parse::PredictionValue;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("{kind:?} cannot be fit on a {task:?} dataset")]
    WrongTask { kind: BaselineKind, task: TaskKind },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
}

pub type Result<T> = std::result::Result<T, BaselineError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Mcc,
    KnnClassifier,
    KnnRegressor,
    Linear,
    Logistic,
}

impl BaselineKind {
    pub fn task(self) -> TaskKind {
        match self {
            BaselineKind::Mcc | BaselineKind::KnnClassifier | BaselineKind::Logistic => TaskKind::Classification,
            BaselineKind::KnnRegressor | BaselineKind::Linear => TaskKind::Regression,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    Mean,
    Median,
}

fn d_k() -> usize {
    3
}
fn d_power() -> f64 {
    2.0
}
fn d_agg() -> Aggregator {
    Aggregator::Mean
}
fn d_lr() -> f64 {
    0.1
}
fn d_iters() -> usize {
    1000
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSpec {
    pub kind: BaselineKind,
    #[serde(default = "d_k")]
    pub k: usize,
    #[serde(default = "d_power")]
    pub minkowski_power: f64,
    #[serde(default = "d_agg")]
    pub aggregator: Aggregator,
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_iters")]
    pub iterations: usize,
    /// z-score features with training statistics before fitting.
    #[serde(default = "d_true")]
    pub standardize: bool,
}

impl BaselineSpec {
    pub fn new(kind: BaselineKind) -> Self {
        BaselineSpec {
            kind,
            k: d_k(),
            minkowski_power: d_power(),
            aggregator: d_agg(),
            learning_rate: d_lr(),
            iterations: d_iters(),
            standardize: true,
        }
    }

    pub fn knn(kind: BaselineKind, k: usize, power: f64) -> Self {
        BaselineSpec { k, minkowski_power: power, ..Self::new(kind) }
    }

    pub fn with_aggregator(mut self, a: Aggregator) -> Self {
        self.aggregator = a;
        self
    }

    pub fn with_standardize(mut self, yes: bool) -> Self {
        self.standardize = yes;
        self
    }

    /// Short label used in reports, e.g. `knn_classifier(k=3,p=2)`.
    pub fn label(&self) -> String {
        match self.kind {
            BaselineKind::KnnClassifier => format!("knn_classifier(k={},p={})", self.k, self.minkowski_power),
            BaselineKind::KnnRegressor => {
                format!("knn_regressor(k={},p={},{:?})", self.k, self.minkowski_power, self.aggregator).to_lowercase()
            }
            other => format!("{other:?}").to_lowercase(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Scaler {
    mean: Vec<f64>,
    sd: Vec<f64>,
}

impl Scaler {
    fn fit(rows: &[Vec<f64>], p: usize) -> Self {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; p];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut sd = vec![0.0; p];
        for r in rows {
            for j in 0..p {
                sd[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        let sd = sd.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Scaler { mean, sd }
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, v)| (v - self.mean[j]) / self.sd[j]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Params {
    Mcc(String),
    KnnLabels {
        rows: Vec<Vec<f64>>,
        labels: Vec<String>,
    },
    KnnValues {
        rows: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
    /// Weights on (scaled) features, then intercept.
    Linear {
        w: Vec<f64>,
        b: f64,
    },
    Logistic {
        w: Vec<Vec<f64>>,
        b: Vec<f64>,
        labels: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedBaseline {
    spec: BaselineSpec,
    p: usize,
    scaler: Option<Scaler>,
    params: Params,
    training_loss: Vec<f64>,
}

pub fn minkowski(a: &[f64], b: &[f64], power: f64) -> f64 {
    if power == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if power == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(power)).sum::<f64>().powf(1.0 / power)
    }
}

pub fn fit(spec: &BaselineSpec, train: &TabularDataset) -> Result<FittedBaseline> {
    if train.task() != spec.kind.task() {
        return Err(BaselineError::WrongTask { kind: spec.kind, task: train.task() });
    }
    if train.n() == 0 {
        return Err(BaselineError::EmptyTrainingSet);
    }
    let p = train.p();
    let uses_scaler = spec.standardize && !matches!(spec.kind, BaselineKind::Mcc);
    let scaler = uses_scaler.then(|| Scaler::fit(train.rows(), p));
    let rows: Vec<Vec<f64>> = match &scaler {
        Some(s) => train.rows().iter().map(|r| s.apply(r)).collect(),
        None => train.rows().to_vec(),
    };
    let mut training_loss = Vec::new();
    let params = match spec.kind {
        BaselineKind::Mcc => Params::Mcc(train.majority_label().expect("non-empty").to_string()),
        BaselineKind::KnnClassifier | BaselineKind::KnnRegressor => {
            if spec.k == 0 {
                return Err(BaselineError::InvalidHyperparameter("k must be at least 1".into()));
            }
            if !(spec.minkowski_power >= 1.0) {
                return Err(BaselineError::InvalidHyperparameter("Minkowski power must be >= 1".into()));
            }
            match train.labels() {
                Some(l) => Params::KnnLabels { rows, labels: l.to_vec() },
                None => Params::KnnValues { rows, values: train.values().unwrap().to_vec() },
            }
        }
        BaselineKind::Linear => {
            let (w, b) = least_squares(&rows, train.values().unwrap(), true);
            Params::Linear { w, b }
        }
        BaselineKind::Logistic => {
            if !(spec.learning_rate > 0.0) {
                return Err(BaselineError::InvalidHyperparameter("learning rate must be positive".into()));
            }
            let (w, b, loss) = softmax_regression(
                &rows,
                train.labels().unwrap(),
                train.label_set(),
                spec.learning_rate,
                spec.iterations,
            );
            training_loss = loss;
            Params::Logistic { w, b, labels: train.label_set().to_vec() }
        }
    };
    Ok(FittedBaseline { spec: spec.clone(), p, scaler, params, training_loss })
}

/// Ordinary least squares via the normal equations; the intercept is 0 when
/// `intercept` is false. A growing diagonal jitter is added only if the Gram
/// matrix is not positive definite.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64], intercept: bool) -> (Vec<f64>, f64) {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    let q = p + usize::from(intercept);
    let x = DMatrix::from_fn(n, q, |i, j| if j < p { rows[i][j] } else { 1.0 });
    let yv = DVector::from_column_slice(y);
    let gram = x.transpose() * &x;
    let rhs = x.transpose() * yv;
    let scale = (gram.trace() / q.max(1) as f64).max(1.0);
    let mut jitter = 0.0;
    let sol = loop {
        let mut g = gram.clone();
        for i in 0..q {
            g[(i, i)] += jitter;
        }
        if let Some(ch) = g.cholesky() {
            break ch.solve(&rhs);
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
    };
    let b = if intercept { sol[p] } else { 0.0 };
    (sol.as_slice()[..p].to_vec(), b)
}

fn softmax(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    for v in z.iter_mut() {
        *v /= s;
    }
}

fn logits(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter().zip(b).map(|(wc, bc)| bc + wc.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()).collect()
}

/// Full-batch gradient descent on mean softmax cross-entropy. Returns the
/// weights and the loss before each step plus the final loss.
fn softmax_regression(
    rows: &[Vec<f64>],
    labels: &[String],
    label_set: &[String],
    lr: f64,
    iterations: usize,
) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let c = label_set.len();
    let p = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let y: Vec<usize> = labels.iter().map(|l| label_set.iter().position(|s| s == l).unwrap()).collect();
    let mut w = vec![vec![0.0; p]; c];
    let mut b = vec![0.0; c];
    let mut history = Vec::with_capacity(iterations + 1);
    for step in 0..=iterations {
        let mut gw = vec![vec![0.0; p]; c];
        let mut gb = vec![0.0; c];
        let mut loss = 0.0;
        for (x, &yi) in rows.iter().zip(&y) {
            let mut z = logits(&w, &b, x);
            softmax(&mut z);
            loss -= z[yi].max(1e-300).ln();
            for k in 0..c {
                let g = z[k] - f64::from(u8::from(k == yi));
                gb[k] += g;
                for j in 0..p {
                    gw[k][j] += g * x[j];
                }
            }
        }
        history.push(loss / n);
        if step == iterations {
            break;
        }
        for k in 0..c {
            b[k] -= lr * gb[k] / n;
            for j in 0..p {
                w[k][j] -= lr * gw[k][j] / n;
            }
        }
    }
    (w, b, history)
}

/// Indices of the k nearest rows, nearest first. Distance ties go to the
/// lower index.
pub fn nearest(rows: &[Vec<f64>], query: &[f64], k: usize, power: f64) -> Vec<(f64, usize)> {
    let mut d: Vec<(f64, usize)> = rows.iter().enumerate().map(|(i, r)| (minkowski(r, query, power), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    let k = k.min(d.len());
    if k < d.len() {
        d.select_nth_unstable_by(k, cmp);
        d.truncate(k);
    }
    d.sort_by(cmp);
    d
}

/// Majority vote over neighbours given nearest first; a tie goes to the tied
/// label whose nearest member ranks first.
fn vote<'a>(neighbours: impl Iterator<Item = &'a str> + Clone) -> &'a str {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    for l in neighbours.clone() {
        match counts.iter_mut().find(|(x, _)| *x == l) {
            Some(e) => e.1 += 1,
            None => counts.push((l, 1)),
        }
    }
    let best = counts.iter().map(|c| c.1).max().unwrap_or(0);
    // counts is in first-appearance order, i.e. by nearest member
    counts.iter().find(|c| c.1 == best).map(|c| c.0).expect("k >= 1")
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

impl FittedBaseline {
    pub fn spec(&self) -> &BaselineSpec {
        &self.spec
    }

    /// Mean cross-entropy before each gradient step (logistic only).
    pub fn training_loss(&self) -> &[f64] {
        &self.training_loss
    }

    /// Linear weights and intercept in the original feature space.
    pub fn linear_weights(&self) -> Option<(Vec<f64>, f64)> {
        let Params::Linear { w, b } = &self.params else {
            return None;
        };
        match &self.scaler {
            None => Some((w.clone(), *b)),
            Some(s) => {
                let w_orig: Vec<f64> = w.iter().zip(&s.sd).map(|(wj, sd)| wj / sd).collect();
                let b_orig = b - w_orig.iter().zip(&s.mean).map(|(wj, m)| wj * m).sum::<f64>();
                Some((w_orig, b_orig))
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<PredictionValue> {
        if row.len() != self.p {
            return Err(BaselineError::DimensionMismatch { expected: self.p, got: row.len() });
        }
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.apply(row);
                &scaled[..]
            }
            None => row,
        };
        let k = self.spec.k;
        let power = self.spec.minkowski_power;
        Ok(match &self.params {
            Params::Mcc(l) => PredictionValue::Label(l.clone()),
            Params::KnnLabels { rows, labels } => {
                let nn = nearest(rows, x, k, power);
                PredictionValue::Label(vote(nn.iter().map(|&(_, i)| labels[i].as_str())).to_string())
            }
            Params::KnnValues { rows, values } => {
                let mut ys: Vec<f64> = nearest(rows, x, k, power).iter().map(|&(_, i)| values[i]).collect();
                PredictionValue::Value(match self.spec.aggregator {
                    Aggregator::Mean => ys.iter().sum::<f64>() / ys.len() as f64,
                    Aggregator::Median => median(&mut ys),
                })
            }
            Params::Linear { w, b } => PredictionValue::Value(b + w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()),
            Params::Logistic { w, b, labels } => {
                let z = logits(w, b, x);
                let best = z.iter().enumerate().fold(0, |best, (i, v)| if *v > z[best] { i } else { best });
                PredictionValue::Label(labels[best].clone())
            }
        })
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<PredictionValue>> {
        self.predict_with(x, Exec::default())
    }

    pub fn predict_with(&self, x: &[Vec<f64>], exec: Exec) -> Result<Vec<PredictionValue>> {
        exec.try_map(x, |_, row| self.predict_row(row))
    }
}

pub fn predict(model: &FittedBaseline, x: &[Vec<f64>]) -> Result<Vec<PredictionValue>> {
    model.predict(x)
}
