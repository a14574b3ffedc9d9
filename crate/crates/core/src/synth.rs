//! Synthetic data: regression function families, 2-D classification shapes,
//! Gaussian pretext clusters, heteroscedastic calibration data and grids.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureSchema, TabularDataset};
use crate::exec::Exec;
use crate::rng::{self, Rng};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("grids are only defined for 1 or 2 dimensions, got {0}")]
    UnsupportedDim(usize),
}

pub type Result<T> = std::result::Result<T, SynthError>;

/// Bounds of the hypercube the normalization is anchored to.
pub const DOMAIN: (f64, f64) = (-10.0, 10.0);
/// Normalized functions map `DOMAIN^p` onto this interval.
pub const NORMALIZED_RANGE: (f64, f64) = (-9.0, 9.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    Linear,
    Quadratic,
    Exponential,
    Cosine,
    L1norm,
    Piecewise,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 6] = [
        FunctionKind::Linear,
        FunctionKind::Quadratic,
        FunctionKind::Exponential,
        FunctionKind::Cosine,
        FunctionKind::L1norm,
        FunctionKind::Piecewise,
    ];

    /// Per-coordinate term; every raw function is the mean of this over coordinates.
    fn term(self, x: f64) -> f64 {
        match self {
            FunctionKind::Linear => x,
            FunctionKind::Quadratic => x * x,
            FunctionKind::Exponential => (0.2 * x).exp(),
            FunctionKind::Cosine => (0.5 * std::f64::consts::PI * x).cos(),
            FunctionKind::L1norm => x.abs(),
            FunctionKind::Piecewise => piecewise_term(x),
        }
    }

    /// Exact (min, max) of the raw function over `DOMAIN^p`. Since each raw
    /// function averages one term over coordinates, this does not depend on p.
    pub fn raw_range(self) -> (f64, f64) {
        match self {
            FunctionKind::Linear => (-10.0, 10.0),
            FunctionKind::Quadratic => (0.0, 100.0),
            FunctionKind::Exponential => ((-2.0f64).exp(), 2.0f64.exp()),
            FunctionKind::Cosine => (-1.0, 1.0),
            FunctionKind::L1norm => (0.0, 10.0),
            FunctionKind::Piecewise => (-11.0, 11.0),
        }
    }
}

/// x-1 below -3, 0 on [-3, 3), x+1 from 3 up.
fn piecewise_term(x: f64) -> f64 {
    if x < -3.0 {
        x - 1.0
    } else if x < 3.0 {
        0.0
    } else {
        x + 1.0
    }
}

pub fn eval_function(kind: FunctionKind, x: &[f64], normalize: bool) -> f64 {
    let raw = x.iter().map(|&v| kind.term(v)).sum::<f64>() / x.len() as f64;
    if normalize {
        let (m, big_m) = kind.raw_range();
        let (lo, hi) = NORMALIZED_RANGE;
        lo + (hi - lo) * (raw - m) / (big_m - m)
    } else {
        raw
    }
}

fn default_low() -> f64 {
    DOMAIN.0
}
fn default_high() -> f64 {
    DOMAIN.1
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionGenSpec {
    #[serde(rename = "function")]
    pub kind: FunctionKind,
    pub p: usize,
    pub n: usize,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default = "default_low")]
    pub low: f64,
    #[serde(default = "default_high")]
    pub high: f64,
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub seed: u64,
}

impl RegressionGenSpec {
    pub fn new(kind: FunctionKind, p: usize, n: usize, sigma: f64, seed: u64) -> Self {
        RegressionGenSpec { kind, p, n, sigma, low: DOMAIN.0, high: DOMAIN.1, normalize: true, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(SynthError::InvalidSpec("p must be at least 1".into()));
        }
        if !(self.low < self.high) {
            return Err(SynthError::InvalidSpec("low must be below high".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(SynthError::InvalidSpec("sigma must be non-negative".into()));
        }
        Ok(())
    }
}

fn normal(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn gen_regression(spec: &RegressionGenSpec) -> Result<TabularDataset> {
    gen_regression_with(spec, Exec::default())
}

pub fn gen_regression_with(spec: &RegressionGenSpec, exec: Exec) -> Result<TabularDataset> {
    spec.validate()?;
    let unif = Uniform::new(spec.low, spec.high).expect("validated bounds");
    let samples: Vec<(Vec<f64>, f64)> = exec.map_range(spec.n, |i| {
        let mut rng = rng::item_rng(spec.seed, i as u64);
        let x: Vec<f64> = (0..spec.p).map(|_| unif.sample(&mut rng)).collect();
        let mut y = eval_function(spec.kind, &x, spec.normalize);
        if spec.sigma > 0.0 {
            y += spec.sigma * normal(&mut rng);
        }
        (x, y)
    });
    let (rows, ys) = samples.into_iter().unzip();
    Ok(TabularDataset::regression(FeatureSchema::generic(spec.p), rows, ys).expect("consistent shapes"))
}

/// Noise standard deviation of the calibration data at `x`: grows linearly
/// from 0 at -10 to 2 at 10.
pub fn heteroscedastic_sigma(x: f64) -> f64 {
    (x + 10.0) / 10.0
}

/// 1-D data on [-10, 10] with `y = f(x) + N(0, sigma(x)^2)`, f normalized.
pub fn gen_heteroscedastic(kind: FunctionKind, n: usize, seed: u64) -> TabularDataset {
    let unif = Uniform::new_inclusive(DOMAIN.0, DOMAIN.1).unwrap();
    let (rows, ys): (Vec<Vec<f64>>, Vec<f64>) = Exec::default()
        .map_range(n, |i| {
            let mut rng = rng::item_rng(seed, i as u64);
            let x = unif.sample(&mut rng);
            let y = eval_function(kind, &[x], true) + heteroscedastic_sigma(x) * normal(&mut rng);
            (vec![x], y)
        })
        .into_iter()
        .unzip();
    TabularDataset::regression(FeatureSchema::generic(1), rows, ys).expect("consistent shapes")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassShape {
    Blobs,
    Circles,
    TwoCircles,
    Moons,
    NineClusters,
}

impl ClassShape {
    pub fn classes(self) -> usize {
        match self {
            ClassShape::Blobs => 4,
            ClassShape::Circles | ClassShape::TwoCircles | ClassShape::Moons => 2,
            ClassShape::NineClusters => 9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShapeSpec {
    pub shape: ClassShape,
    pub n: usize,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Rejection-samples `k` points in `[lo, hi]^p` at least `min_sep` apart.
/// Gives up on the separation constraint after a bounded number of tries.
fn spread_centers(rng: &mut Rng, k: usize, p: usize, lo: f64, hi: f64, min_sep: f64) -> Vec<Vec<f64>> {
    let unif = Uniform::new_inclusive(lo, hi).unwrap();
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut tries = 0;
    while centers.len() < k {
        let c: Vec<f64> = (0..p).map(|_| unif.sample(rng)).collect();
        tries += 1;
        let ok = centers.iter().all(|o| {
            let d2: f64 = o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= min_sep
        });
        if ok || tries > 10_000 {
            centers.push(c);
        }
    }
    centers
}

pub fn gen_classification(spec: &ClassShapeSpec) -> Result<TabularDataset> {
    if !(spec.noise >= 0.0) {
        return Err(SynthError::InvalidSpec("noise must be non-negative".into()));
    }
    let c = spec.shape.classes();
    let blob_centers = match spec.shape {
        ClassShape::Blobs => {
            let mut rng = rng::seeded(rng::derive(spec.seed, "blob-centers"));
            spread_centers(&mut rng, c, 2, DOMAIN.0, DOMAIN.1, 4.0 + 6.0 * spec.noise)
        }
        _ => Vec::new(),
    };
    let pi = std::f64::consts::PI;
    let samples: Vec<(Vec<f64>, String)> = Exec::default().map_range(spec.n, |i| {
        let class = i % c;
        let mut rng = rng::item_rng(spec.seed, i as u64);
        let (x, y) = match spec.shape {
            ClassShape::Blobs => (blob_centers[class][0], blob_centers[class][1]),
            ClassShape::NineClusters => {
                let col = (class % 3) as f64 - 1.0;
                let row = (class / 3) as f64 - 1.0;
                (6.0 * col, 6.0 * row)
            }
            ClassShape::Circles => {
                let t = rng.random::<f64>() * 2.0 * pi;
                let r = if class == 0 { 1.0 } else { 0.5 };
                (r * t.cos(), r * t.sin())
            }
            ClassShape::TwoCircles => {
                // Two concentric pairs side by side; outer rings are class 0.
                let t = rng.random::<f64>() * 2.0 * pi;
                let cx = if rng.random::<bool>() { -1.5 } else { 1.5 };
                let r = if class == 0 { 1.0 } else { 0.5 };
                (cx + r * t.cos(), r * t.sin())
            }
            ClassShape::Moons => {
                let t = rng.random::<f64>() * pi;
                if class == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                }
            }
        };
        let (nx, ny) =
            if spec.noise > 0.0 { (spec.noise * normal(&mut rng), spec.noise * normal(&mut rng)) } else { (0.0, 0.0) };
        (vec![x + nx, y + ny], class.to_string())
    });
    let (rows, labels): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    let label_set = (0..c).map(|k| k.to_string()).collect();
    Ok(TabularDataset::classification_with_label_set(FeatureSchema::generic(2), rows, labels, label_set)
        .expect("consistent shapes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretextTarget {
    Labels(Vec<String>),
    Range(f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretextSpec {
    pub p: usize,
    pub target: PretextTarget,
    /// Box the cluster centers are drawn from (per coordinate).
    pub bounds: (f64, f64),
    pub cluster_std: f64,
    pub samples_per_cluster: usize,
    /// Sample count for regression pretexts.
    pub regression_samples: usize,
    pub seed: u64,
}

impl PretextSpec {
    pub fn new(p: usize, target: PretextTarget, seed: u64) -> Self {
        PretextSpec {
            p,
            target,
            bounds: DOMAIN,
            cluster_std: 1.0,
            samples_per_cluster: 100,
            regression_samples: 200,
            seed,
        }
    }

    /// Matches the feature count, label space or target range and the
    /// feature bounding box of `ds`.
    pub fn for_dataset(ds: &TabularDataset, seed: u64) -> Self {
        let target = match ds.values() {
            Some(v) => {
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                PretextTarget::Range(lo, hi)
            }
            None => PretextTarget::Labels(ds.label_set().to_vec()),
        };
        let mut spec = PretextSpec::new(ds.p(), target, seed);
        if let Some(b) = ds.feature_bounds() {
            let lo = b.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
            let hi = b.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                spec.bounds = (lo, hi);
            }
        }
        spec
    }
}

pub fn gen_pretext(spec: &PretextSpec) -> Result<TabularDataset> {
    if spec.p == 0 {
        return Err(SynthError::InvalidSpec("p must be at least 1".into()));
    }
    let (lo, hi) = spec.bounds;
    if !(lo < hi) {
        return Err(SynthError::InvalidSpec("empty feature bounds".into()));
    }
    let schema = FeatureSchema::generic(spec.p);
    match &spec.target {
        PretextTarget::Labels(labels) => {
            if labels.is_empty() {
                return Err(SynthError::InvalidSpec("empty label set".into()));
            }
            let mut rng = rng::seeded(rng::derive(spec.seed, "pretext-centers"));
            let centers = spread_centers(&mut rng, labels.len(), spec.p, lo, hi, 2.0 * spec.cluster_std);
            let total = labels.len() * spec.samples_per_cluster;
            let samples: Vec<(Vec<f64>, String)> = Exec::default().map_range(total, |i| {
                let k = i / spec.samples_per_cluster;
                let mut rng = rng::item_rng(spec.seed, i as u64);
                let x = centers[k].iter().map(|c| c + spec.cluster_std * normal(&mut rng)).collect();
                (x, labels[k].clone())
            });
            let (rows, ys): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
            TabularDataset::classification_with_label_set(schema, rows, ys, labels.clone())
                .map_err(|e| SynthError::InvalidSpec(e.to_string()))
        }
        &PretextTarget::Range(ylo, yhi) => {
            if !(ylo < yhi) {
                return Err(SynthError::InvalidSpec("empty target range".into()));
            }
            let mid = 0.5 * (lo + hi);
            let sd = (hi - lo) / 6.0;
            let unif = Uniform::new(ylo, yhi).unwrap();
            let samples: Vec<(Vec<f64>, f64)> = Exec::default().map_range(spec.regression_samples, |i| {
                let mut rng = rng::item_rng(spec.seed, i as u64);
                let x = (0..spec.p).map(|_| mid + sd * normal(&mut rng)).collect();
                let mut y = unif.sample(&mut rng);
                while y <= ylo {
                    y = unif.sample(&mut rng);
                }
                (x, y)
            });
            let (rows, ys): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
            Ok(TabularDataset::regression(schema, rows, ys).expect("consistent shapes"))
        }
    }
}

/// Evenly spaced points on `[low, high]^p`. For p = 2, `count` is the total
/// number of points and must be a perfect square; the grid is row-major in
/// (x1, x2).
pub fn gen_grid(p: usize, low: f64, high: f64, count: usize) -> Result<Vec<Vec<f64>>> {
    if !(low < high) {
        return Err(SynthError::InvalidSpec("low must be below high".into()));
    }
    let axis = |m: usize| -> Vec<f64> {
        (0..m).map(|i| if i == m - 1 { high } else { low + (high - low) * i as f64 / (m - 1) as f64 }).collect()
    };
    match p {
        1 => {
            if count < 2 {
                return Err(SynthError::InvalidSpec("need at least 2 grid points".into()));
            }
            Ok(axis(count).into_iter().map(|v| vec![v]).collect())
        }
        2 => {
            let m = (count as f64).sqrt().round() as usize;
            if m * m != count || m < 2 {
                return Err(SynthError::InvalidSpec(format!("{count} is not a square of at least 4")));
            }
            let a = axis(m);
            Ok(a.iter().flat_map(|&x| a.iter().map(move |&y| vec![x, y])).collect())
        }
        _ => Err(SynthError::UnsupportedDim(p)),
    }
}

const MC_CHUNK: usize = 4096;

/// Monte-Carlo (min, max) of a normalized function over `DOMAIN^p`. Samples
/// are drawn in fixed-size chunks, one RNG stream per chunk.
pub fn monte_carlo_range(kind: FunctionKind, p: usize, samples: usize, seed: u64, exec: Exec) -> (f64, f64) {
    let unif = Uniform::new_inclusive(DOMAIN.0, DOMAIN.1).unwrap();
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts = exec.map_range(chunks, |c| {
        let mut rng = rng::item_rng(seed, c as u64);
        let len = MC_CHUNK.min(samples - c * MC_CHUNK);
        let mut x = vec![0.0; p];
        let mut acc = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..len {
            x.iter_mut().for_each(|v| *v = unif.sample(&mut rng));
            let y = eval_function(kind, &x, true);
            acc = (acc.0.min(y), acc.1.max(y));
        }
        acc
    });
    parts.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_formulas() {
        assert_eq!(eval_function(FunctionKind::Piecewise, &[5.0], false), 6.0);
        assert_eq!(eval_function(FunctionKind::Piecewise, &[0.0], false), 0.0);
        assert_eq!(eval_function(FunctionKind::Piecewise, &[-5.0], false), -6.0);
        assert_eq!(eval_function(FunctionKind::Cosine, &[0.0, 0.0], false), 1.0);
        assert_eq!(eval_function(FunctionKind::Linear, &[1.0, 2.0, 6.0], false), 3.0);
        assert_eq!(eval_function(FunctionKind::Quadratic, &[1.0, 3.0], false), 5.0);
        assert_eq!(eval_function(FunctionKind::L1norm, &[-1.0, 3.0], false), 2.0);
        assert!((eval_function(FunctionKind::Exponential, &[5.0], false) - 1f64.exp()).abs() < 1e-15);
    }

    #[test]
    fn normalized_endpoints_hit_range() {
        for kind in FunctionKind::ALL {
            let (m, big_m) = kind.raw_range();
            for p in [1, 3] {
                // points attaining the raw extremes
                let argmin = match kind {
                    FunctionKind::Linear | FunctionKind::Exponential | FunctionKind::Piecewise => -10.0,
                    FunctionKind::Quadratic | FunctionKind::L1norm => 0.0,
                    FunctionKind::Cosine => 2.0,
                };
                let argmax = match kind {
                    FunctionKind::Cosine => 0.0,
                    _ => 10.0,
                };
                assert!((eval_function(kind, &vec![argmin; p], false) - m).abs() < 1e-12);
                assert!((eval_function(kind, &vec![argmax; p], false) - big_m).abs() < 1e-12);
                assert!((eval_function(kind, &vec![argmin; p], true) + 9.0).abs() < 1e-12);
                assert!((eval_function(kind, &vec![argmax; p], true) - 9.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn piecewise_jumps_at_three() {
        let eps = 1e-9;
        let left = eval_function(FunctionKind::Piecewise, &[3.0 - eps], false);
        let right = eval_function(FunctionKind::Piecewise, &[3.0], false);
        assert!((right - left - 4.0).abs() < 1e-6);
        let left = eval_function(FunctionKind::Piecewise, &[-3.0 - eps], false);
        let right = eval_function(FunctionKind::Piecewise, &[-3.0], false);
        assert!((right - left - 4.0).abs() < 1e-6);
        // continuous elsewhere, e.g. at 0 and 7
        for x in [0.0, 7.0, -7.0] {
            let a = eval_function(FunctionKind::Piecewise, &[x - eps], false);
            let b = eval_function(FunctionKind::Piecewise, &[x + eps], false);
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_noise_regression_is_exact_and_deterministic() {
        let spec = RegressionGenSpec::new(FunctionKind::Cosine, 3, 50, 0.0, 11);
        let ds = gen_regression(&spec).unwrap();
        for (x, y) in ds.rows().iter().zip(ds.values().unwrap()) {
            assert_eq!(*y, eval_function(FunctionKind::Cosine, x, true));
            assert!(x.iter().all(|v| (-10.0..10.0).contains(v)));
        }
        assert_eq!(ds, gen_regression(&spec).unwrap());
        assert_eq!(ds, gen_regression_with(&spec, Exec::Sequential).unwrap());
    }

    #[test]
    fn regression_residual_std() {
        let spec = RegressionGenSpec::new(FunctionKind::Linear, 2, 10_000, 1.0, 5);
        let ds = gen_regression(&spec).unwrap();
        let r: Vec<f64> = ds
            .rows()
            .iter()
            .zip(ds.values().unwrap())
            .map(|(x, y)| y - eval_function(FunctionKind::Linear, x, true))
            .collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let sd = (r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r.len() - 1) as f64).sqrt();
        assert!((0.95..=1.05).contains(&sd), "{sd}");
    }

    #[test]
    fn invalid_regression_specs() {
        let mut spec = RegressionGenSpec::new(FunctionKind::Linear, 1, 5, 0.1, 0);
        spec.low = 3.0;
        spec.high = 3.0;
        assert!(gen_regression(&spec).is_err());
        let spec = RegressionGenSpec::new(FunctionKind::Linear, 1, 5, -1.0, 0);
        assert!(gen_regression(&spec).is_err());
    }

    #[test]
    fn heteroscedastic_noise_grows() {
        assert_eq!(heteroscedastic_sigma(-10.0), 0.0);
        assert_eq!(gen_heteroscedastic(FunctionKind::Linear, 0, 1).n(), 0);
        let ds = gen_heteroscedastic(FunctionKind::Quadratic, 20_000, 9);
        let resid: Vec<f64> = ds
            .rows()
            .iter()
            .zip(ds.values().unwrap())
            .filter(|(x, _)| x[0] >= 9.0)
            .map(|(x, y)| y - eval_function(FunctionKind::Quadratic, x, true))
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let sd = (resid.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
        assert!((0.9 * 1.95..=1.1 * 1.95).contains(&sd), "{sd}");
    }

    #[test]
    fn class_counts_and_balance() {
        for shape in [
            ClassShape::Blobs,
            ClassShape::Circles,
            ClassShape::TwoCircles,
            ClassShape::Moons,
            ClassShape::NineClusters,
        ] {
            let ds = gen_classification(&ClassShapeSpec { shape, n: 2000, noise: 0.1, seed: 3 }).unwrap();
            assert_eq!(ds.p(), 2);
            let counts = ds.class_counts();
            assert_eq!(counts.len(), shape.classes());
            let min = counts.iter().map(|c| c.1).min().unwrap();
            let max = counts.iter().map(|c| c.1).max().unwrap();
            assert!(max - min <= 1);
        }
        let ds = gen_classification(&ClassShapeSpec { shape: ClassShape::NineClusters, n: 2000, noise: 0.5, seed: 0 })
            .unwrap();
        assert!(ds.class_counts().iter().all(|(_, c)| *c == 222 || *c == 223));
    }

    #[test]
    fn grid_endpoints() {
        let g = gen_grid(1, -10.0, 10.0, 200).unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[0], vec![-10.0]);
        assert_eq!(g[199], vec![10.0]);
        assert!((g[1][0] - g[0][0] - 20.0 / 199.0).abs() < 1e-12);
        assert_eq!(gen_grid(1, 2.0, 5.0, 2).unwrap(), vec![vec![2.0], vec![5.0]]);
        let g2 = gen_grid(2, -10.0, 10.0, 2500).unwrap();
        assert_eq!(g2.len(), 2500);
        let mut xs: Vec<f64> = g2.iter().map(|p| p[0]).collect();
        xs.dedup();
        assert_eq!(xs.len(), 50);
        assert_eq!(gen_grid(3, 0.0, 1.0, 8), Err(SynthError::UnsupportedDim(3)));
        assert!(gen_grid(2, 0.0, 1.0, 10).is_err());
        assert!(gen_grid(1, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn pretext_shapes() {
        let labels = vec!["a".to_string(), "b".into(), "c".into()];
        let ds = gen_pretext(&PretextSpec::new(2, PretextTarget::Labels(labels.clone()), 4)).unwrap();
        assert_eq!(ds.n(), 300);
        assert_eq!(ds.label_set(), &labels[..]);
        assert!(ds.class_counts().iter().all(|(_, c)| *c == 100));
        let ds = gen_pretext(&PretextSpec::new(3, PretextTarget::Range(-9.0, 9.0), 4)).unwrap();
        assert_eq!(ds.p(), 3);
        assert!(ds.values().unwrap().iter().all(|y| *y > -9.0 && *y < 9.0));
        assert!(gen_pretext(&PretextSpec::new(0, PretextTarget::Range(0.0, 1.0), 0)).is_err());
        assert!(gen_pretext(&PretextSpec::new(1, PretextTarget::Labels(vec![]), 0)).is_err());
        assert!(gen_pretext(&PretextSpec::new(1, PretextTarget::Range(1.0, 1.0), 0)).is_err());
    }
}
