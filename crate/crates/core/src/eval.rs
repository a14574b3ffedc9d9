//! Metrics, calibration profiles and decision-boundary agreement.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::TaskKind;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least one sample")]
    Empty,
    #[error("truth is constant, RAE is undefined")]
    ConstantTruth,
    #[error("label {0:?} is not in the label set")]
    UnknownLabel(String),
    #[error("binary metrics need exactly two classes, found {0}")]
    NotBinary(usize),
}

pub type Result<T> = std::result::Result<T, EvalError>;

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(EvalError::LengthMismatch(a, b));
    }
    if a == 0 {
        return Err(EvalError::Empty);
    }
    Ok(())
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((s / pred.len() as f64).sqrt())
}

pub fn rae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let den: f64 = truth.iter().map(|t| (t - mean).abs()).sum();
    if den == 0.0 {
        return Err(EvalError::ConstantTruth);
    }
    let num: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(num / den)
}

/// Classification values are percentages; regression values are raw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub task: TaskKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recall: Option<f64>,
    pub invalid_rate: f64,
    pub fallback_count: usize,
    pub n: usize,
}

impl MetricReport {
    /// Records how many predictions came from the fallback.
    pub fn with_fallbacks(mut self, count: usize) -> Self {
        self.fallback_count = count;
        self.invalid_rate = if self.n == 0 { 0.0 } else { count as f64 / self.n as f64 };
        self
    }

    /// The headline number: accuracy for classification, RAE (or RMSE when
    /// RAE is undefined) for regression.
    pub fn primary(&self) -> Option<f64> {
        match self.task {
            TaskKind::Classification => self.accuracy,
            TaskKind::Regression => self.rae.or(self.rmse),
        }
    }
}

pub fn regression_metrics(pred: &[f64], truth: &[f64]) -> Result<MetricReport> {
    let rmse = rmse(pred, truth)?;
    let rae = match rae(pred, truth) {
        Ok(v) => Some(v),
        Err(EvalError::ConstantTruth) => None,
        Err(e) => return Err(e),
    };
    Ok(MetricReport {
        task: TaskKind::Regression,
        accuracy: None,
        rmse: Some(rmse),
        rae,
        f1: None,
        precision: None,
        recall: None,
        invalid_rate: 0.0,
        fallback_count: 0,
        n: pred.len(),
    })
}

pub fn accuracy<S: AsRef<str>>(pred: &[S], truth: &[S]) -> Result<f64> {
    check_len(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(a, b)| a.as_ref() == b.as_ref()).count();
    Ok(100.0 * hits as f64 / pred.len() as f64)
}

/// Accuracy over `label_set`, plus precision/recall/F1 for `positive` when
/// the task is binary. A predictor that never outputs the positive class has
/// precision 0.
pub fn classification_metrics<S: AsRef<str>>(
    pred: &[S],
    truth: &[S],
    label_set: &[String],
    positive: Option<&str>,
) -> Result<MetricReport> {
    check_len(pred.len(), truth.len())?;
    for l in pred.iter().chain(truth) {
        if !label_set.iter().any(|s| s == l.as_ref()) {
            return Err(EvalError::UnknownLabel(l.as_ref().to_string()));
        }
    }
    let acc = accuracy(pred, truth)?;
    let (mut precision, mut recall, mut f1) = (None, None, None);
    if let Some(pos) = positive {
        if label_set.len() != 2 {
            return Err(EvalError::NotBinary(label_set.len()));
        }
        if !label_set.iter().any(|s| s == pos) {
            return Err(EvalError::UnknownLabel(pos.to_string()));
        }
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fneg = 0usize;
        for (p, t) in pred.iter().zip(truth) {
            match (p.as_ref() == pos, t.as_ref() == pos) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        let pr = if tp + fp == 0 { 0.0 } else { 100.0 * tp as f64 / (tp + fp) as f64 };
        let rc = if tp + fneg == 0 { 0.0 } else { 100.0 * tp as f64 / (tp + fneg) as f64 };
        let f = if pr + rc == 0.0 { 0.0 } else { 2.0 * pr * rc / (pr + rc) };
        precision = Some(pr);
        recall = Some(rc);
        f1 = Some(f);
    }
    Ok(MetricReport {
        task: TaskKind::Classification,
        accuracy: Some(acc),
        rmse: None,
        rae: None,
        f1,
        precision,
        recall,
        invalid_rate: 0.0,
        fallback_count: 0,
        n: pred.len(),
    })
}

/// Percentage of positions where the two prediction vectors agree.
pub fn boundary_similarity<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<f64> {
    accuracy(a, b)
}

#[derive(Debug, Error)]
pub enum CalibrationError<E> {
    #[error("invalid calibration setup: {0}")]
    Invalid(String),
    #[error("sampler failed: {0}")]
    Sampler(E),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    /// Number of inputs falling in the bin.
    pub count: usize,
    /// Root mean square of the per-input prediction standard deviations.
    pub pred_std: f64,
    /// Same aggregation applied to the known noise level, if supplied.
    pub reference_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationProfile {
    pub repeats: usize,
    pub bins: Vec<CalibrationBin>,
    /// Sample standard deviation of the repeated predictions, per input.
    pub point_std: Vec<f64>,
}

impl CalibrationProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("lo,hi,count,pred_std,reference_std\n");
        for b in &self.bins {
            let r = b.reference_std.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{},{}", b.lo, b.hi, b.count, b.pred_std, r);
        }
        s
    }
}

pub fn sample_std(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Draws `repeats` predictions for every input via `sampler(x, repeat)` and
/// summarizes their spread over `bins` equal-width bins of x.
pub fn calibration_profile<F, E>(
    mut sampler: F,
    xs: &[f64],
    repeats: usize,
    bins: usize,
    sigma: Option<&dyn Fn(f64) -> f64>,
) -> std::result::Result<CalibrationProfile, CalibrationError<E>>
where
    F: FnMut(f64, usize) -> std::result::Result<f64, E>,
{
    if repeats < 2 {
        return Err(CalibrationError::Invalid("repeats must be at least 2".into()));
    }
    if bins == 0 || xs.is_empty() {
        return Err(CalibrationError::Invalid("need at least one input and one bin".into()));
    }
    let mut point_std = Vec::with_capacity(xs.len());
    let mut draws = Vec::with_capacity(repeats);
    for &x in xs {
        draws.clear();
        for r in 0..repeats {
            draws.push(sampler(x, r).map_err(CalibrationError::Sampler)?);
        }
        point_std.push(sample_std(&draws));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / bins as f64;
    let mut acc = vec![(0usize, 0.0f64, 0.0f64); bins];
    for (&x, s) in xs.iter().zip(&point_std) {
        let b = if width > 0.0 { (((x - lo) / width) as usize).min(bins - 1) } else { 0 };
        acc[b].0 += 1;
        acc[b].1 += s * s;
        if let Some(f) = sigma {
            acc[b].2 += f(x).powi(2);
        }
    }
    let bins = acc
        .into_iter()
        .enumerate()
        .map(|(i, (count, ss, rs))| {
            let c = count.max(1) as f64;
            CalibrationBin {
                lo: lo + width * i as f64,
                hi: lo + width * (i + 1) as f64,
                count,
                pred_std: (ss / c).sqrt(),
                reference_std: sigma.map(|_| (rs / c).sqrt()),
            }
        })
        .collect();
    Ok(CalibrationProfile { repeats, bins, point_std })
}
