use std::fs;
use std::sync::{Arc, Mutex};

use lift_backends::{Backend, BackendKind, Completion, CompletionRequest, FineTuneSpec, ModelHandle, ScriptedBackend};
use lift_core::prompts::{self, PromptedExample};
use lift_runner::config::ExperimentConfig;
use lift_runner::pipeline::{self, SharedBackend, Split};
use lift_runner::report::{self, ReportFormat};

fn config(body: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(body).unwrap()
}

const MOONS: &str = r#"
mode = "fine_tune"
seed = 3

[dataset]
kind = "synth_classification"
shape = "moons"
n = 200
noise = 0.1
seed = 3

[split]
fractions = [0.6, 0.2, 0.2]
seed = 3

[backend]
kind = "memorizer"

[[fine_tune_grid]]
epochs = 5
"#;

/// Answers `x1` for models fine-tuned with 2 epochs and 0 otherwise; logs
/// every (model, prompt) pair.
#[derive(Default)]
struct EchoOrZero {
    log: Mutex<Vec<(String, String)>>,
}

impl Backend for EchoOrZero {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn fine_tune(&self, _training: &[PromptedExample], spec: &FineTuneSpec) -> lift_backends::Result<ModelHandle> {
        Ok(ModelHandle::new(BackendKind::Scripted, format!("e{}", spec.epochs)))
    }

    fn base_model(&self, name: &str) -> lift_backends::Result<ModelHandle> {
        Ok(ModelHandle::new(BackendKind::Scripted, name))
    }

    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> lift_backends::Result<Completion> {
        self.log.lock().unwrap().push((handle.model_id.clone(), req.prompt.clone()));
        let x1 = req.prompt.strip_prefix("When we have x1=").and_then(|s| s.split(',').next()).unwrap_or("0");
        let y = if handle.model_id == "e2" { x1 } else { "0" };
        Ok(Completion::from_raw(&format!(" y={y}@@@"), &req.stop))
    }
}

fn identity_csv(dir: &std::path::Path) -> std::path::PathBuf {
    let path = dir.join("identity.csv");
    let mut s = String::from("x1,y\n");
    for i in 0..60 {
        let x = i as f64 * 0.5 + 1.0;
        s.push_str(&format!("{x},{x}\n"));
    }
    fs::write(&path, s).unwrap();
    path
}

fn identity_config(dir: &std::path::Path) -> ExperimentConfig {
    config(&format!(
        r#"
mode = "fine_tune"
[dataset]
kind = "csv"
path = "{}"
task = "regression"
target = "y"
has_header = true
[split]
fractions = [0.5, 0.25, 0.25]
seed = 1
[backend]
kind = "memorizer"
[[fine_tune_grid]]
epochs = 1
[[fine_tune_grid]]
epochs = 2
[[fine_tune_grid]]
epochs = 3
"#,
        identity_csv(dir).display()
    ))
}

#[test]
fn regression_grid_picks_lower_rae_and_never_scores_test_during_selection() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = identity_config(dir.path());
    let backend = Arc::new(EchoOrZero::default());
    let res = pipeline::run(&cfg, &SharedBackend(backend.clone()), false).unwrap();
    let rep = &res.repeats[0];
    assert_eq!(rep.grid.len(), 3);
    assert_eq!(rep.selected, 1);
    assert_eq!(rep.grid[1].validation_metric, 0.0);
    assert!(rep.grid[0].validation_metric > 0.0);
    assert_eq!(rep.test.rae, Some(0.0));

    let split = pipeline::prepare(&cfg).unwrap();
    let bound = cfg.template.bind(split.train.schema(), &[]).unwrap();
    let test_prompts: Vec<String> = split.test.rows().iter().map(|r| bound.query(r).unwrap()).collect();
    let log = backend.log.lock().unwrap();
    for (model, prompt) in log.iter() {
        if test_prompts.contains(prompt) {
            assert_eq!(model, "e2", "test prompt sent to a model before selection");
        }
    }
    let n_test_calls = log.iter().filter(|(_, p)| test_prompts.contains(p)).count();
    assert_eq!(n_test_calls, split.test.n());
}

#[test]
fn memorizer_scores_perfectly_when_test_is_train() {
    let cfg = config(MOONS);
    let split = pipeline::prepare(&cfg).unwrap();
    let same = Split { train: split.train.clone(), validation: split.train.clone(), test: split.train.clone() };
    let res = pipeline::run_on_split(&cfg, cfg.backend.as_ref().unwrap(), &same, None).unwrap();
    assert_eq!(res.repeats[0].test.accuracy, Some(100.0));
    assert_eq!(res.repeats[0].test.invalid_rate, 0.0);
}

#[test]
fn all_invalid_backend_degrades_to_majority_class() {
    let cfg = config(MOONS);
    let scripted: Arc<dyn Backend> = Arc::new(ScriptedBackend::with_responder(|_| Ok("no idea".into())));
    let res = pipeline::run(&cfg, &SharedBackend(scripted), false).unwrap();
    let split = pipeline::prepare(&cfg).unwrap();
    let mcc = pipeline::mcc_accuracy(&split.train, &split.test).unwrap();
    let t = &res.repeats[0].test;
    assert_eq!(t.accuracy, Some(mcc));
    assert_eq!(t.invalid_rate, 1.0);
    assert_eq!(t.fallback_count, split.test.n());
    assert!(res.repeats[0].predictions.iter().all(|p| p.attempts == 5 && p.used_fallback));
}

#[test]
fn persisted_prompts_reparse_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(MOONS);
    cfg.output_dir = dir.path().join("out");
    pipeline::run(&cfg, cfg.backend.as_ref().unwrap(), true).unwrap();
    let text = fs::read_to_string(cfg.output_dir.join("prompts.jsonl")).unwrap();
    assert_eq!(prompts::to_jsonl(&prompts::parse_jsonl(&text).unwrap()), text);
    for f in [
        "config.toml",
        "train.csv",
        "validation.csv",
        "test.csv",
        "predictions.jsonl",
        "result.json",
        "report.csv",
        "report.md",
    ] {
        assert!(cfg.output_dir.join(f).exists(), "{f} missing");
    }
    let saved = ExperimentConfig::load(cfg.output_dir.join("config.toml")).unwrap();
    assert_eq!(saved.hash(), cfg.hash());
}

#[test]
fn failures_leave_error_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(MOONS);
    cfg.output_dir = dir.path().join("out");
    let scripted: Arc<dyn Backend> =
        Arc::new(ScriptedBackend::with_responder(|_| Err(lift_backends::BackendError::Transport("down".into()))));
    let err = pipeline::run(&cfg, &SharedBackend(scripted), true).unwrap_err();
    assert_eq!(err.code(), "backend");
    let body: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(cfg.output_dir.join("error.json")).unwrap()).unwrap();
    assert_eq!(body["error"], "backend");
}

#[test]
fn sweep_uses_nested_training_subsets() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(MOONS);
    cfg.output_dir = dir.path().join("sweep");
    let res = pipeline::sample_complexity_sweep(&cfg, cfg.backend.as_ref().unwrap(), &[10, 40, 120], true).unwrap();
    assert_eq!(res.iter().map(|r| r.n_train).collect::<Vec<_>>(), vec![10, 40, 120]);
    let rows = |n: usize| -> Vec<String> {
        fs::read_to_string(cfg.output_dir.join(format!("n{n}/train.csv")))
            .unwrap()
            .lines()
            .skip(1)
            .map(String::from)
            .collect()
    };
    let (a, b, c) = (rows(10), rows(40), rows(120));
    assert!(a.iter().all(|r| b.contains(r)));
    assert!(b.iter().all(|r| c.contains(r)));
    assert_eq!(res[0].n_test, res[2].n_test);
    assert!(cfg.output_dir.join("sweep.csv").exists());
    let table: Vec<usize> = report::rows(&res).iter().map(|r| r.n_train).collect();
    assert_eq!(table, vec![10, 40, 120]);

    assert!(pipeline::sample_complexity_sweep(&cfg, cfg.backend.as_ref().unwrap(), &[], false).unwrap().is_empty());
    assert!(pipeline::sample_complexity_sweep(&cfg, cfg.backend.as_ref().unwrap(), &[40, 10], false).is_err());
    assert!(pipeline::sample_complexity_sweep(&cfg, cfg.backend.as_ref().unwrap(), &[10_000], false).is_err());
}

#[test]
fn in_context_reports_prompt_counts() {
    let mut cfg = config(MOONS);
    cfg.mode = lift_runner::Mode::InContext;
    cfg.in_context.max_chars = 600;
    let res = pipeline::run_in_context(&cfg, cfg.backend.as_ref().unwrap(), false).unwrap();
    let rep = &res.repeats[0];
    let n = rep.n_prompts.unwrap();
    assert!(n > 0 && n < res.n_train);
    assert!(rep.predictions.iter().all(|p| p.n_prompts.unwrap() >= n));
    assert!(rep.test.invalid_rate < 1.0);
    assert_eq!(res.method, "LIFT ICL");

    cfg.in_context.max_chars = 10;
    let res = pipeline::run_in_context(&cfg, cfg.backend.as_ref().unwrap(), false).unwrap();
    assert_eq!(res.repeats[0].n_prompts, Some(0));
    assert!(res.repeats[0].predictions.iter().all(|p| p.used_fallback && p.attempts == 0));

    cfg.mode = lift_runner::Mode::FineTune;
    assert!(pipeline::run_in_context(&cfg, cfg.backend.as_ref().unwrap(), false).is_err());
}

#[test]
fn two_stage_trains_pretext_then_target() {
    let mut cfg = config(MOONS);
    cfg.mode = lift_runner::Mode::TwoStage;
    let scripted = Arc::new(ScriptedBackend::with_responder(|_| Ok(" y=0@@@".into())));
    let res = pipeline::run(&cfg, &SharedBackend(scripted.clone()), false).unwrap();
    let trainings = scripted.trainings();
    assert_eq!(trainings.len(), 2);
    assert_eq!(trainings[1].len(), res.n_train);
    assert!(!trainings[0].is_empty());
    assert_eq!(res.repeats[0].grid[0].jobs.len(), 2);
    assert_eq!(res.repeats[0].grid[0].jobs[0].epochs, cfg.two_stage.pretext_epochs);
}

#[test]
fn baseline_mode_and_reports() {
    let mut cfg = config(MOONS);
    cfg.mode = lift_runner::Mode::Baseline;
    cfg.repeats = 3;
    cfg.baseline_grid = vec![
        lift_core::baselines::BaselineSpec::knn(lift_core::baselines::BaselineKind::KnnClassifier, 1, 2.0),
        lift_core::baselines::BaselineSpec::knn(lift_core::baselines::BaselineKind::KnnClassifier, 5, 2.0),
    ];
    let knn = pipeline::run(&cfg, &pipeline::NoBackend, false).unwrap();
    assert_eq!(knn.method, "knn_classifier");
    assert_eq!(knn.summary.values.len(), 3);
    assert_eq!(knn.summary.std, 0.0);

    cfg.baseline_grid = vec![lift_core::baselines::BaselineSpec::new(lift_core::baselines::BaselineKind::Mcc)];
    let mcc = pipeline::run(&cfg, &pipeline::NoBackend, false).unwrap();
    assert_eq!(mcc.method, "mcc");

    let csv = report::render(&[knn.clone(), mcc.clone()], ReportFormat::Csv).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dataset,method,metric,n_train,repeats,mean,std,cell,reference"));
    assert_eq!(lines.count(), 2);
    assert!(csv.contains("moons,mcc,accuracy,120,3,"));
    assert!(csv.contains(",50.00\n"), "reference column for MCC on moons: {csv}");

    let md = report::render(&[knn, mcc], ReportFormat::Markdown).unwrap();
    assert!(md.starts_with("| dataset | method |"));
    assert!(md.contains("±0.00"));
}

#[test]
fn synthetic_regression_dataset_parses_from_toml() {
    let cfg = config(
        r#"
mode = "baseline"
[dataset]
kind = "synth_regression"
function = "quadratic"
p = 2
n = 50
[split]
fractions = [0.6, 0.2, 0.2]
seed = 1
[[baseline_grid]]
kind = "linear"
"#,
    );
    let res = pipeline::run(&cfg, &pipeline::NoBackend, false).unwrap();
    assert_eq!(res.dataset, "quadratic_p2");
    assert_eq!(res.n_train, 30);
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 5);
}
