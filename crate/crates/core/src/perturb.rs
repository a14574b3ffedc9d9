//! Label corruption, outlier injection, feature noise, Gaussian augmentation
//! and ridge augmentation.

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{TabularDataset, TaskKind};
use crate::exec::Exec;
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum PerturbError {
    #[error("operation requires a {expected:?} dataset")]
    WrongTask { expected: TaskKind },
    #[error("target standard deviation is zero")]
    DegenerateTargets,
    #[error("label corruption needs at least two labels")]
    TooFewLabels,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, PerturbError>;

/// `round(fraction * n)` with halves rounded up.
pub fn corruption_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) + 0.5).floor() as usize
}

fn check_fraction(fraction: f64) -> Result<()> {
    if (0.0..=1.0).contains(&fraction) {
        Ok(())
    } else {
        Err(PerturbError::InvalidParameter(format!("fraction {fraction} outside [0, 1]")))
    }
}

/// Distinct row indices (sorted) selected for corruption.
pub fn corruption_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = corruption_count(n, fraction).min(n);
    let mut rng = rng::seeded(rng::derive(seed, "corrupt-rows"));
    let mut idx = index::sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    idx
}

fn labels_of(ds: &TabularDataset) -> Result<(&[String], &[String])> {
    match (ds.labels(), ds.task()) {
        (Some(l), TaskKind::Classification) => Ok((l, ds.label_set())),
        _ => Err(PerturbError::WrongTask { expected: TaskKind::Classification }),
    }
}

/// Replaces the labels of `round(fraction * n)` rows with a uniform draw over
/// the other labels.
pub fn corrupt_labels_random(ds: &TabularDataset, fraction: f64, seed: u64) -> Result<TabularDataset> {
    check_fraction(fraction)?;
    let (labels, label_set) = labels_of(ds)?;
    if label_set.len() < 2 {
        return Err(PerturbError::TooFewLabels);
    }
    let mut out = labels.to_vec();
    let mut rng = rng::seeded(rng::derive(seed, "corrupt-random"));
    for i in corruption_indices(ds.n(), fraction, seed) {
        let current = label_set.iter().position(|l| *l == labels[i]).unwrap();
        let mut k = rng.random_range(0..label_set.len() - 1);
        if k >= current {
            k += 1;
        }
        out[i] = label_set[k].clone();
    }
    Ok(ds.with_labels(out).expect("labels drawn from the label set"))
}

fn shift_labels(ds: &TabularDataset, indices: &[usize], steps: usize) -> Result<TabularDataset> {
    let (labels, label_set) = labels_of(ds)?;
    let c = label_set.len();
    if c < 2 {
        return Err(PerturbError::TooFewLabels);
    }
    let mut out = labels.to_vec();
    for &i in indices {
        let current = label_set.iter().position(|l| *l == labels[i]).unwrap();
        out[i] = label_set[(current + steps) % c].clone();
    }
    Ok(ds.with_labels(out).expect("labels drawn from the label set"))
}

/// Maps each selected label to the next one in label-set order (cyclic).
pub fn corrupt_labels_systematic(ds: &TabularDataset, fraction: f64, seed: u64) -> Result<TabularDataset> {
    check_fraction(fraction)?;
    shift_labels(ds, &corruption_indices(ds.n(), fraction, seed), 1)
}

/// Undoes [`corrupt_labels_systematic`] given the same fraction and seed.
pub fn restore_systematic(ds: &TabularDataset, fraction: f64, seed: u64) -> Result<TabularDataset> {
    check_fraction(fraction)?;
    let c = ds.label_set().len();
    shift_labels(ds, &corruption_indices(ds.n(), fraction, seed), c.saturating_sub(1))
}

/// Replaces the targets of `round(fraction * n)` rows with values 3 to 6
/// standard deviations from the mean (random side), strictly outside the
/// observed target range.
pub fn inject_outliers(ds: &TabularDataset, fraction: f64, seed: u64) -> Result<TabularDataset> {
    check_fraction(fraction)?;
    let y = ds.values().ok_or(PerturbError::WrongTask { expected: TaskKind::Regression })?;
    let idx = corruption_indices(ds.n(), fraction, seed);
    if idx.is_empty() {
        return Ok(ds.clone());
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sd == 0.0 {
        return Err(PerturbError::DegenerateTargets);
    }
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // Distance-from-mean window, pushed past the data when the data already
    // reaches 3 sd on that side.
    let window = |edge: f64| {
        let lo = (3.0 * sd).max(edge);
        let hi = if 6.0 * sd > lo { 6.0 * sd } else { lo + 3.0 * sd };
        (lo, hi)
    };
    let up = window(max - mean);
    let down = window(mean - min);

    let mut rng = rng::seeded(rng::derive(seed, "outliers"));
    let mut out = y.to_vec();
    for i in idx {
        let positive: bool = rng.random();
        let (lo, hi) = if positive { up } else { down };
        let d = lo + (hi - lo) * rng.random::<f64>();
        out[i] = if positive {
            let v = mean + d;
            if v > max {
                v
            } else {
                max + sd * 1e-9
            }
        } else {
            let v = mean - d;
            if v < min {
                v
            } else {
                min - sd * 1e-9
            }
        };
    }
    Ok(ds.with_values(out).expect("same length"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// Standard normal direction rescaled so its max-abs equals epsilon.
    GaussianLinf,
    /// Every coordinate is +epsilon or -epsilon.
    SignedConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

fn noise_vector(kind: NoiseKind, epsilon: f64, p: usize, rng: &mut rng::Rng) -> Vec<f64> {
    match kind {
        NoiseKind::SignedConstant => (0..p).map(|_| if rng.random::<bool>() { epsilon } else { -epsilon }).collect(),
        NoiseKind::GaussianLinf => {
            let z: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
            let m = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if m == 0.0 {
                return vec![0.0; p];
            }
            // v / m lies in [-1, 1] exactly, so the product never exceeds epsilon
            z.into_iter().map(|v| epsilon * (v / m)).collect()
        }
    }
}

pub fn perturb_features(x: &[Vec<f64>], spec: &NoiseSpec) -> Result<Vec<Vec<f64>>> {
    perturb_features_with(x, spec, Exec::default())
}

/// Adds an independent perturbation to each row; row i always draws from the
/// same stream, whatever the execution mode.
pub fn perturb_features_with(x: &[Vec<f64>], spec: &NoiseSpec, exec: Exec) -> Result<Vec<Vec<f64>>> {
    if !(spec.epsilon >= 0.0) {
        return Err(PerturbError::InvalidParameter("epsilon must be non-negative".into()));
    }
    let seed = rng::derive(spec.seed, "feature-noise");
    Ok(exec.map(x, |i, row| {
        if spec.epsilon == 0.0 {
            return row.clone();
        }
        let mut rng = rng::item_rng(seed, i as u64);
        let delta = noise_vector(spec.kind, spec.epsilon, row.len(), &mut rng);
        row.iter().zip(delta).map(|(v, d)| v + d).collect()
    }))
}

/// Original rows followed by `copies` noisy duplicates of each row (copy-major
/// order). Noise is Gaussian rescaled onto the L-infinity sphere of radius
/// `epsilon`; with `clamp`, every output value is clipped into the range.
pub fn augment_gaussian(
    ds: &TabularDataset,
    epsilon: f64,
    copies: usize,
    clamp: Option<(f64, f64)>,
    seed: u64,
) -> Result<TabularDataset> {
    if copies == 0 {
        return Err(PerturbError::InvalidParameter("copies must be at least 1".into()));
    }
    let mut rows: Vec<Vec<f64>> = ds.rows().to_vec();
    let mut index: Vec<usize> = (0..ds.n()).collect();
    for c in 0..copies {
        let spec = NoiseSpec { kind: NoiseKind::GaussianLinf, epsilon, seed: rng::derive(seed, &format!("aug{c}")) };
        rows.extend(perturb_features(ds.rows(), &spec)?);
        index.extend(0..ds.n());
    }
    if let Some((lo, hi)) = clamp {
        for r in rows.iter_mut() {
            for v in r.iter_mut() {
                *v = v.clamp(lo, hi);
            }
        }
    }
    let targeted = ds.subset(&index);
    Ok(targeted.with_rows(rows).expect("same shape"))
}

/// Appends `sqrt(lambda) * e_i` for each feature i with target 0, so that
/// ordinary least squares on the result is ridge regression on the input.
pub fn ridge_augment(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if !(lambda >= 0.0) {
        return Err(PerturbError::InvalidParameter("lambda must be non-negative".into()));
    }
    if x.len() != y.len() {
        return Err(PerturbError::InvalidParameter("x and y lengths differ".into()));
    }
    let p = x.first().map_or(0, Vec::len);
    let s = lambda.sqrt();
    let mut xa = x.to_vec();
    let mut ya = y.to_vec();
    for i in 0..p {
        let mut row = vec![0.0; p];
        row[i] = s;
        xa.push(row);
        ya.push(0.0);
    }
    Ok((xa, ya))
}
