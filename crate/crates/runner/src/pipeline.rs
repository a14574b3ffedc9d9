//! The experiment pipeline: split, perturb, serialize, fine-tune per grid
//! point, select on validation, predict test with retries, score, persist.

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use lift_backends::{Backend, BoundModel, FineTuneSpec, HttpBackend, JobRecord, MemorizerBackend, ModelHandle};
use lift_core::baselines::{self, BaselineKind, FittedBaseline};
use lift_core::data::{self, TabularDataset, TaskKind};
use lift_core::eval::{self, MetricReport};
use lift_core::parse::{infer_with_retry, ParseContext, Prediction, PredictionValue};
use lift_core::perturb::{self, NoiseSpec};
use lift_core::prompts::{self, BoundTemplate, PromptError, PromptTemplate, PromptedExample};
use lift_core::synth::{self, PretextSpec};
use lift_core::{rng, Exec};

use crate::config::{BackendConfig, DatasetSource, ExperimentConfig, Mode, PerturbOp};
use crate::error::RunnerError;
use crate::report;

pub type Result<T> = std::result::Result<T, RunnerError>;

/// Builds a fresh backend for each repeat so sampling can be re-seeded.
pub trait BackendFactory: Sync {
    fn create(&self, seed: u64, template: &PromptTemplate) -> Result<Arc<dyn Backend>>;
}

impl BackendFactory for BackendConfig {
    fn create(&self, seed: u64, template: &PromptTemplate) -> Result<Arc<dyn Backend>> {
        Ok(match self {
            BackendConfig::Memorizer { seed: base } => Arc::new(MemorizerBackend::with_separators(
                rng::derive(*base ^ seed, "memorizer"),
                &template.qa_separator,
                &template.end_token,
            )),
            BackendConfig::Http(cfg) => Arc::new(HttpBackend::new(cfg.clone())),
        })
    }
}

/// Hands out the same backend instance every time (for scripted tests).
pub struct SharedBackend(pub Arc<dyn Backend>);

impl BackendFactory for SharedBackend {
    fn create(&self, _seed: u64, _template: &PromptTemplate) -> Result<Arc<dyn Backend>> {
        Ok(Arc::clone(&self.0))
    }
}

/// Used when a config has no backend (baseline mode).
pub struct NoBackend;

impl BackendFactory for NoBackend {
    fn create(&self, _seed: u64, _template: &PromptTemplate) -> Result<Arc<dyn Backend>> {
        Err(RunnerError::Config("this mode needs a backend".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub label: String,
    pub spec: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jobs: Vec<JobRecord>,
    pub validation: MetricReport,
    /// Accuracy (classification) or RAE (regression) on validation.
    pub validation_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub repeat: usize,
    pub index: usize,
    pub truth: PredictionValue,
    pub prediction: PredictionValue,
    pub valid: bool,
    pub attempts: usize,
    pub used_fallback: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raw_texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_prompts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub grid: Vec<GridPoint>,
    pub selected: usize,
    pub test: MetricReport,
    /// In-context mode: fewest training examples that fit in any test prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_prompts: Option<usize>,
    pub predictions: Vec<SamplePrediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub metric: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub cell: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub dataset: String,
    pub method: String,
    pub mode: Mode,
    pub task: TaskKind,
    pub config_hash: String,
    pub split_seed: u64,
    pub n_train: usize,
    pub n_validation: usize,
    pub n_test: usize,
    pub repeats: Vec<RepeatOutcome>,
    pub summary: Summary,
    pub timing: Timing,
}

impl ExperimentResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}

/// Result JSON with the `timing` block removed, for reproducibility checks.
pub fn without_timing(json: &str) -> Result<String> {
    let mut v: serde_json::Value = serde_json::from_str(json).map_err(|e| RunnerError::Invalid(e.to_string()))?;
    if let Some(o) = v.as_object_mut() {
        o.remove("timing");
    }
    Ok(serde_json::to_string_pretty(&v).expect("value serializes"))
}

pub fn load_dataset(src: &DatasetSource) -> Result<TabularDataset> {
    let ds = match src {
        DatasetSource::Csv { path, task, target, has_header, .. } => data::load_csv(path, *task, target, *has_header)?,
        DatasetSource::SynthClassification(spec) => synth::gen_classification(spec)?,
        DatasetSource::SynthRegression(spec) => synth::gen_regression(spec)?,
    };
    match src.schema_override(ds.p())? {
        Some(schema) => Ok(ds.with_schema(schema)?),
        None => Ok(ds),
    }
}

/// A dataset already divided into train, validation and test.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: TabularDataset,
    pub validation: TabularDataset,
    pub test: TabularDataset,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Split> {
    let ds = load_dataset(&cfg.dataset)?;
    let (train, validation, test) = data::split(&ds, &cfg.split)?;
    Ok(Split { train, validation, test })
}

pub fn apply_perturbations(ds: &TabularDataset, ops: &[PerturbOp], seed: u64, exec: Exec) -> Result<TabularDataset> {
    let mut cur = ds.clone();
    for (k, op) in ops.iter().enumerate() {
        let s = rng::derive(seed, &format!("perturb{k}"));
        cur = match op {
            PerturbOp::CorruptRandom { fraction } => perturb::corrupt_labels_random(&cur, *fraction, s)?,
            PerturbOp::CorruptSystematic { fraction } => perturb::corrupt_labels_systematic(&cur, *fraction, s)?,
            PerturbOp::Outliers { fraction } => perturb::inject_outliers(&cur, *fraction, s)?,
            PerturbOp::FeatureNoise { kind, epsilon } => {
                let spec = NoiseSpec { kind: *kind, epsilon: *epsilon, seed: s };
                cur.with_rows(perturb::perturb_features_with(cur.rows(), &spec, exec)?)?
            }
            PerturbOp::AugmentGaussian { epsilon, copies, clamp } => {
                perturb::augment_gaussian(&cur, *epsilon, *copies, *clamp, s)?
            }
        };
    }
    Ok(cur)
}

pub fn fallback_value(train: &TabularDataset) -> Result<PredictionValue> {
    match train.task() {
        TaskKind::Classification => train
            .majority_label()
            .map(|l| PredictionValue::Label(l.to_string()))
            .ok_or_else(|| RunnerError::Invalid("empty training set".into())),
        TaskKind::Regression => train
            .target_mean()
            .map(PredictionValue::Value)
            .ok_or_else(|| RunnerError::Invalid("empty training set".into())),
    }
}

fn truths(ds: &TabularDataset) -> Vec<PredictionValue> {
    match (ds.labels(), ds.values()) {
        (Some(l), _) => l.iter().cloned().map(PredictionValue::Label).collect(),
        (_, Some(v)) => v.iter().copied().map(PredictionValue::Value).collect(),
        _ => Vec::new(),
    }
}

/// Scores predictions against `ds`; `positive` enables binary metrics.
pub fn score(
    ds: &TabularDataset,
    preds: &[PredictionValue],
    fallbacks: usize,
    positive: Option<&str>,
) -> Result<MetricReport> {
    let r = match ds.task() {
        TaskKind::Classification => {
            let p: Vec<&str> = preds.iter().map(|v| v.as_label().unwrap_or("")).collect();
            let t: Vec<&str> = ds.labels().unwrap().iter().map(String::as_str).collect();
            let positive = positive.filter(|_| ds.label_set().len() == 2);
            eval::classification_metrics(&p, &t, ds.label_set(), positive)?
        }
        TaskKind::Regression => {
            let p: Vec<f64> = preds.iter().map(|v| v.as_value().unwrap_or(f64::NAN)).collect();
            eval::regression_metrics(&p, ds.values().unwrap())?
        }
    };
    Ok(r.with_fallbacks(fallbacks))
}

fn headline(task: TaskKind, r: &MetricReport) -> f64 {
    match task {
        TaskKind::Classification => r.accuracy.unwrap_or(0.0),
        TaskKind::Regression => r.rae.or(r.rmse).unwrap_or(f64::INFINITY),
    }
}

/// Index of the best grid point; ties go to the earliest.
pub fn select(task: TaskKind, metrics: &[f64]) -> usize {
    let mut best = 0;
    for (i, &m) in metrics.iter().enumerate().skip(1) {
        let better = match task {
            TaskKind::Classification => m > metrics[best],
            TaskKind::Regression => m < metrics[best],
        };
        if better {
            best = i;
        }
    }
    best
}

enum Model {
    Lm { backend: Arc<dyn Backend>, handle: ModelHandle },
    Icl { backend: Arc<dyn Backend>, handle: ModelHandle, pool: Vec<PromptedExample>, max_chars: usize },
    Baseline(FittedBaseline),
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    bound: BoundTemplate,
    parse: ParseContext,
    fallback: PredictionValue,
}

impl Ctx<'_> {
    fn predict_one(&self, model: &Model, row: &[f64], seed: u64) -> Result<(Prediction, Option<usize>)> {
        let policy = &self.cfg.retry;
        let tpl = self.bound.template();
        match model {
            Model::Baseline(m) => {
                let v = m.predict_row(row)?;
                Ok((
                    Prediction {
                        value: v,
                        valid: true,
                        attempts: 0,
                        used_fallback: false,
                        raw_texts: Vec::new(),
                        temperatures: Vec::new(),
                        invalid_reasons: Vec::new(),
                    },
                    None,
                ))
            }
            Model::Lm { backend, handle } => {
                let query = self.bound.query(row)?;
                let src = BoundModel::new(&**backend, handle)
                    .with_max_tokens(self.cfg.max_tokens)
                    .with_end_token(tpl.end_token.clone())
                    .with_seed(Some(seed));
                Ok((infer_with_retry(&src, &query, policy, &self.parse, &self.fallback)?, None))
            }
            Model::Icl { backend, handle, pool, max_chars } => {
                let query = self.bound.query(row)?;
                match prompts::build_incontext_prompt(pool, &query, *max_chars) {
                    Ok((prompt, used)) => {
                        let src = BoundModel::new(&**backend, handle)
                            .with_max_tokens(self.cfg.max_tokens)
                            .with_end_token(tpl.end_token.clone())
                            .with_seed(Some(seed));
                        Ok((infer_with_retry(&src, &prompt, policy, &self.parse, &self.fallback)?, Some(used)))
                    }
                    Err(PromptError::QueryTooLong { .. }) => {
                        Ok((Prediction::fallback_only(self.fallback.clone()), Some(0)))
                    }
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    fn predict(&self, model: &Model, rows: &[Vec<f64>], seed: u64) -> Result<Vec<(Prediction, Option<usize>)>> {
        self.cfg.exec.try_map(rows, |i, row| self.predict_one(model, row, rng::derive(seed, &format!("item{i}"))))
    }
}

fn method_label(cfg: &ExperimentConfig) -> String {
    match cfg.mode {
        Mode::FineTune => "LIFT".into(),
        Mode::TwoStage => "LIFT two-stage".into(),
        Mode::InContext => "LIFT ICL".into(),
        Mode::Baseline => {
            let first = cfg.baseline_grid[0].kind;
            if cfg.baseline_grid.iter().all(|s| s.kind == first) {
                serde_json::to_value(first).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
            } else {
                "baseline".into()
            }
        }
    }
}

fn pretext_examples(
    train: &TabularDataset,
    cfg: &ExperimentConfig,
    bound: &BoundTemplate,
    seed: u64,
) -> Result<Vec<PromptedExample>> {
    let mut out = Vec::new();
    for t in 0..cfg.two_stage.pretext_tasks {
        let spec = PretextSpec::for_dataset(train, rng::derive(seed, &format!("pretext{t}")));
        let ds = synth::gen_pretext(&spec)?.with_schema(train.schema().clone())?;
        out.extend(bound.dataset(&ds)?);
    }
    Ok(out)
}

struct RepeatArtifacts {
    outcome: RepeatOutcome,
    train_prompts: Vec<PromptedExample>,
    boundary: Option<String>,
}

fn run_repeat(
    cfg: &ExperimentConfig,
    factory: &dyn BackendFactory,
    split: &Split,
    repeat: usize,
) -> Result<RepeatArtifacts> {
    let seed = rng::derive(cfg.seed, &format!("repeat{repeat}"));
    let train = apply_perturbations(&split.train, &cfg.perturbations, seed, cfg.exec)?;
    let task = train.task();
    let label_set = split.train.label_set().to_vec();
    let bound = cfg.template.bind(train.schema(), &label_set)?;
    let ctx = Ctx {
        cfg,
        parse: ParseContext::new(task, &label_set, &cfg.template.end_token),
        fallback: fallback_value(&train)?,
        bound,
    };
    let train_prompts = ctx.bound.dataset(&train)?;
    let val = &split.validation;
    let val_seed = rng::derive(seed, "validation");
    let positive = cfg.positive_label.as_deref();

    let mut grid = Vec::new();
    let mut models = Vec::new();
    let mut evaluate =
        |label: String, spec: serde_json::Value, model: Model, grid: &mut Vec<GridPoint>| -> Result<()> {
            let preds = ctx.predict(&model, val.rows(), val_seed)?;
            let fallbacks = preds.iter().filter(|p| p.0.used_fallback).count();
            let values: Vec<PredictionValue> = preds.into_iter().map(|p| p.0.value).collect();
            let report = score(val, &values, fallbacks, positive)?;
            let (model_id, jobs) = match &model {
                Model::Lm { handle, .. } | Model::Icl { handle, .. } => {
                    (Some(handle.model_id.clone()), handle.jobs.clone())
                }
                Model::Baseline(_) => (None, Vec::new()),
            };
            grid.push(GridPoint {
                label,
                spec,
                model_id,
                jobs,
                validation_metric: headline(task, &report),
                validation: report,
            });
            models.push(model);
            Ok(())
        };

    match cfg.mode {
        Mode::FineTune | Mode::TwoStage => {
            let backend = factory.create(rng::derive(seed, "backend"), &cfg.template)?;
            let pre = if cfg.mode == Mode::TwoStage {
                let examples = pretext_examples(&train, cfg, &ctx.bound, seed)?;
                let spec = FineTuneSpec {
                    epochs: cfg.two_stage.pretext_epochs,
                    learning_rate_multiplier: cfg.two_stage.pretext_learning_rate_multiplier,
                    base_model: cfg.fine_tune_grid[0].base_model.clone(),
                };
                Some(backend.fine_tune(&examples, &spec)?)
            } else {
                None
            };
            for spec in &cfg.fine_tune_grid {
                let handle = match &pre {
                    Some(h) => backend.continue_fine_tune(h, &train_prompts, spec)?,
                    None => backend.fine_tune(&train_prompts, spec)?,
                };
                let label = match spec.learning_rate_multiplier {
                    Some(m) => format!("epochs={},lr_mult={m}", spec.epochs),
                    None => format!("epochs={}", spec.epochs),
                };
                let json = serde_json::to_value(spec).expect("spec serializes");
                evaluate(label, json, Model::Lm { backend: Arc::clone(&backend), handle }, &mut grid)?;
            }
        }
        Mode::InContext => {
            let backend = factory.create(rng::derive(seed, "backend"), &cfg.template)?;
            let handle = backend.base_model(&cfg.in_context.base_model)?;
            let mut pool = train_prompts.clone();
            pool.shuffle(&mut rng::seeded(rng::derive(seed, "icl")));
            let label = format!("max_chars={}", cfg.in_context.max_chars);
            let json = serde_json::to_value(&cfg.in_context).expect("config serializes");
            let model = Model::Icl { backend, handle, pool, max_chars: cfg.in_context.max_chars };
            evaluate(label, json, model, &mut grid)?;
        }
        Mode::Baseline => {
            for spec in &cfg.baseline_grid {
                let fitted = baselines::fit(spec, &train)?;
                let json = serde_json::to_value(spec).expect("spec serializes");
                evaluate(spec.label(), json, Model::Baseline(fitted), &mut grid)?;
            }
        }
    }

    let selected = select(task, &grid.iter().map(|g| g.validation_metric).collect::<Vec<_>>());
    let model = &models[selected];

    let test = match &cfg.test_noise {
        Some(n) => {
            let spec = NoiseSpec { kind: n.kind, epsilon: n.epsilon, seed: rng::derive(seed, "test_noise") };
            split.test.with_rows(perturb::perturb_features_with(split.test.rows(), &spec, cfg.exec)?)?
        }
        None => split.test.clone(),
    };
    let preds = ctx.predict(model, test.rows(), rng::derive(seed, "test"))?;
    let fallbacks = preds.iter().filter(|p| p.0.used_fallback).count();
    let values: Vec<PredictionValue> = preds.iter().map(|p| p.0.value.clone()).collect();
    let report = score(&test, &values, fallbacks, positive)?;
    let n_prompts = if cfg.mode == Mode::InContext { preds.iter().filter_map(|p| p.1).min() } else { None };
    let predictions = preds
        .into_iter()
        .zip(truths(&test))
        .enumerate()
        .map(|(index, ((p, n), truth))| SamplePrediction {
            repeat,
            index,
            truth,
            prediction: p.value,
            valid: p.valid,
            attempts: p.attempts,
            used_fallback: p.used_fallback,
            raw_texts: p.raw_texts,
            n_prompts: n,
        })
        .collect();

    let boundary = match (&cfg.boundary_grid, repeat) {
        (Some(g), 0) if train.p() <= 2 => {
            let pts = synth::gen_grid(train.p(), g.low, g.high, g.count)?;
            let preds = ctx.predict(model, &pts, rng::derive(seed, "boundary"))?;
            let mut s = String::new();
            let header: Vec<String> = (1..=train.p()).map(|j| format!("x{j}")).collect();
            s.push_str(&format!("{},prediction\n", header.join(",")));
            for (pt, p) in pts.iter().zip(preds) {
                let xs: Vec<String> = pt.iter().map(|v| v.to_string()).collect();
                let v = match p.0.value {
                    PredictionValue::Label(l) => l,
                    PredictionValue::Value(v) => v.to_string(),
                };
                s.push_str(&format!("{},{}\n", xs.join(","), v));
            }
            Some(s)
        }
        _ => None,
    };

    Ok(RepeatArtifacts {
        outcome: RepeatOutcome { repeat, seed, grid, selected, test: report, n_prompts, predictions },
        train_prompts,
        boundary,
    })
}

fn summarize(task: TaskKind, repeats: &[RepeatOutcome]) -> Summary {
    let values: Vec<f64> = repeats.iter().map(|r| headline(task, &r.test)).collect();
    let (mean, std) = report::mean_std(&values);
    let metric = match task {
        TaskKind::Classification => "accuracy",
        TaskKind::Regression => {
            if repeats.iter().all(|r| r.test.rae.is_some()) {
                "rae"
            } else {
                "rmse"
            }
        }
    };
    Summary { metric: metric.into(), cell: report::format_cell(mean, std), values, mean, std }
}

/// Runs all repeats on a fixed split. Artifacts go to `out` when given.
pub fn run_on_split(
    cfg: &ExperimentConfig,
    factory: &dyn BackendFactory,
    split: &Split,
    out: Option<&Path>,
) -> Result<ExperimentResult> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), cfg.to_toml())?;
        data::save_csv(&split.train, dir.join("train.csv"))?;
        data::save_csv(&split.validation, dir.join("validation.csv"))?;
        data::save_csv(&split.test, dir.join("test.csv"))?;
    }
    let mut repeats = Vec::with_capacity(cfg.repeats);
    for r in 0..cfg.repeats {
        let art = run_repeat(cfg, factory, split, r)?;
        if let Some(dir) = out {
            if r == 0 {
                fs::write(dir.join("prompts.jsonl"), prompts::to_jsonl(&art.train_prompts))?;
                if let Some(b) = &art.boundary {
                    fs::write(dir.join("boundary.csv"), b)?;
                }
            }
        }
        repeats.push(art.outcome);
    }
    let task = split.train.task();
    let result = ExperimentResult {
        name: cfg.name(),
        dataset: cfg.dataset.describe(),
        method: method_label(cfg),
        mode: cfg.mode,
        task,
        config_hash: cfg.hash(),
        split_seed: cfg.split.seed,
        n_train: split.train.n(),
        n_validation: split.validation.n(),
        n_test: split.test.n(),
        summary: summarize(task, &repeats),
        repeats,
        timing: Timing { started_unix_ms: started, elapsed_ms: clock.elapsed().as_millis() },
    };
    if let Some(dir) = out {
        let mut lines = String::new();
        for r in &result.repeats {
            for p in &r.predictions {
                lines.push_str(&serde_json::to_string(p).expect("prediction serializes"));
                lines.push('\n');
            }
        }
        fs::write(dir.join("predictions.jsonl"), lines)?;
        fs::write(dir.join("result.json"), result.to_json())?;
        let results = std::slice::from_ref(&result);
        report::emit_report(results, report::ReportFormat::Csv, &dir.join("report.csv"))?;
        report::emit_report(results, report::ReportFormat::Markdown, &dir.join("report.md"))?;
    }
    Ok(result)
}

fn record_error(out: Option<&Path>, err: &RunnerError) {
    if let Some(dir) = out {
        if fs::create_dir_all(dir).is_ok() {
            let _ = fs::write(dir.join("error.json"), err.to_json());
        }
    }
}

/// Full pipeline from config. Writes artifacts under `cfg.output_dir` when
/// `persist` is set; failures leave an `error.json` next to what was written.
pub fn run(cfg: &ExperimentConfig, factory: &dyn BackendFactory, persist: bool) -> Result<ExperimentResult> {
    let out = persist.then_some(cfg.output_dir.as_path());
    let res = cfg.validate().and_then(|_| prepare(cfg)).and_then(|split| run_on_split(cfg, factory, &split, out));
    if let Err(e) = &res {
        record_error(out, e);
    }
    res
}

/// In-context learning run; `cfg.mode` must be `in_context`.
pub fn run_in_context(cfg: &ExperimentConfig, factory: &dyn BackendFactory, persist: bool) -> Result<ExperimentResult> {
    if cfg.mode != Mode::InContext {
        return Err(RunnerError::Config("run_in_context requires mode = \"in_context\"".into()));
    }
    run(cfg, factory, persist)
}

/// Seeded training-set order whose prefixes form the nested subsets.
pub fn sweep_order(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::seeded(rng::derive(seed, "sweep")));
    idx
}

/// One full run per training size, on nested prefixes of a shuffled train
/// split. Validation and test sets are shared.
pub fn sample_complexity_sweep(
    cfg: &ExperimentConfig,
    factory: &dyn BackendFactory,
    sizes: &[usize],
    persist: bool,
) -> Result<Vec<ExperimentResult>> {
    if sizes.is_empty() {
        return Ok(Vec::new());
    }
    cfg.validate()?;
    if sizes.windows(2).any(|w| w[0] >= w[1]) || sizes[0] == 0 {
        return Err(RunnerError::Invalid("sizes must be positive and strictly ascending".into()));
    }
    let split = prepare(cfg)?;
    let max = *sizes.last().unwrap();
    if max > split.train.n() {
        return Err(RunnerError::Invalid(format!("size {max} exceeds the {} training samples", split.train.n())));
    }
    let order = sweep_order(split.train.n(), cfg.seed);
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let sub = Split {
            train: split.train.subset(&order[..size]),
            validation: split.validation.clone(),
            test: split.test.clone(),
        };
        let mut c = cfg.clone();
        c.name = Some(format!("{}_n{size}", cfg.name()));
        let dir = cfg.output_dir.join(format!("n{size}"));
        let res = run_on_split(&c, factory, &sub, persist.then_some(dir.as_path()));
        if let Err(e) = &res {
            record_error(persist.then_some(dir.as_path()), e);
        }
        out.push(res?);
    }
    if persist {
        report::emit_report(&out, report::ReportFormat::Csv, &cfg.output_dir.join("sweep.csv"))?;
    }
    Ok(out)
}

/// Majority-class accuracy on `test` for a classifier trained on `train`.
pub fn mcc_accuracy(train: &TabularDataset, test: &TabularDataset) -> Result<f64> {
    let m = baselines::fit(&baselines::BaselineSpec::new(BaselineKind::Mcc), train)?;
    let preds = m.predict(test.rows())?;
    Ok(score(test, &preds, 0, None)?.accuracy.unwrap_or(0.0))
}
