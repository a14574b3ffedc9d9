use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use lift_backends::{Backend, BoundModel, FineTuneSpec, HttpBackend, HttpConfig, MemorizerBackend, ModelHandle};
use lift_core::baselines::BaselineSpec;
use lift_core::data::{self, TargetColumn, TaskKind};
use lift_core::parse::{infer_with_retry, ParseContext, PredictionValue, RetryPolicy};
use lift_core::prompts::{self, NamingMode, PromptTemplate};
use lift_core::synth::{self, ClassShapeSpec, RegressionGenSpec};
use lift_core::{rng, Exec};
use lift_runner::pipeline::{self, NoBackend};
use lift_runner::report::{self, ReportFormat};
use lift_runner::{BackendFactory, ExperimentConfig, ExperimentResult, Mode, RunnerError};

#[derive(Parser)]
#[command(name = "lift", version, about = "Fine-tune language models on tabular data serialized as sentences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Serialize a CSV dataset to prompt/completion JSONL.
    Serialize(SerializeArgs),
    /// Fine-tune on a JSONL file and write the model handle.
    Finetune(FinetuneArgs),
    /// Query a fine-tuned model for every prompt in a JSONL file.
    Predict(PredictArgs),
    /// Run an experiment from a TOML config.
    Run(RunArgs),
    /// Sample-complexity sweep over nested training subsets.
    Sweep(SweepArgs),
    /// In-context learning run (overrides the config's mode).
    Icl(RunArgs),
    /// Classical baseline run (overrides the config's mode).
    Baseline(BaselineArgs),
    /// Aggregate result.json files into one table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Classification,
    Regression,
}

#[derive(Args)]
struct GenArgs {
    #[arg(value_enum)]
    kind: GenKind,
    /// Shape (blobs, circles, two_circles, moons, nine_clusters) or function
    /// (linear, quadratic, exponential, cosine, l1norm, piecewise).
    #[arg(long)]
    name: String,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Feature count (regression only).
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Gaussian noise std on the coordinates (classification) or on the target (regression).
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Target column: a header name or 0-based index. Defaults to the last column.
    #[arg(long)]
    target: Option<TargetColumn>,
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct SerializeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    decimals: Option<usize>,
    /// Use the column names from the header instead of x1..xp.
    #[arg(long)]
    feature_names: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendChoice {
    Memorizer,
    Http,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "memorizer")]
    backend: BackendChoice,
    /// Memorizer state file (created by `finetune`, read by `predict`).
    #[arg(long)]
    state: Option<PathBuf>,
    /// TOML file with HTTP backend settings.
    #[arg(long)]
    http_config: Option<PathBuf>,
}

#[derive(Args)]
struct FinetuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: u32,
    #[arg(long)]
    learning_rate_multiplier: Option<f64>,
    #[arg(long, default_value = "base")]
    base_model: String,
    #[command(flatten)]
    backend: BackendArgs,
    /// Where to write the model handle JSON.
    #[arg(long)]
    handle_out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    handle: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
    /// JSONL with `prompt` fields; completions, if present, are ignored.
    #[arg(long)]
    prompts: PathBuf,
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Comma-separated label set (classification).
    #[arg(long, value_delimiter = ',')]
    labels: Vec<String>,
    /// Value used when every retry is invalid.
    #[arg(long)]
    fallback: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    exec: Option<ExecChoice>,
    /// Skip writing artifacts; print the result JSON only.
    #[arg(long)]
    no_persist: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecChoice {
    Sequential,
    Parallel,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Ascending training sizes, comma-separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    config: PathBuf,
    /// Baseline spec as JSON, e.g. '{"kind":"knn_classifier","k":5}'.
    /// Repeat to build a grid; replaces the config's baseline_grid.
    #[arg(long)]
    spec: Vec<String>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ReportArgs {
    /// result.json files.
    #[arg(required = true)]
    results: Vec<PathBuf>,
    #[arg(long, default_value = "markdown")]
    format: ReportFormat,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    json_enum(s).map_err(|e| e.to_string())
}

fn json_enum<T: DeserializeOwned>(s: &str) -> Result<T, RunnerError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| RunnerError::Invalid(format!("unknown value {s:?}")))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, RunnerError> {
    let text = fs::read_to_string(path).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| RunnerError::Invalid(format!("{}: {e}", path.display())))
}

fn gen(a: GenArgs) -> Result<(), RunnerError> {
    let ds = match a.kind {
        GenKind::Classification => synth::gen_classification(&ClassShapeSpec {
            shape: json_enum(&a.name)?,
            n: a.n,
            noise: a.noise,
            seed: a.seed,
        })?,
        GenKind::Regression => {
            synth::gen_regression(&RegressionGenSpec::new(json_enum(&a.name)?, a.p, a.n, a.noise, a.seed))?
        }
    };
    data::save_csv(&ds, &a.out)?;
    Ok(())
}

fn last_column(path: &Path) -> Result<TargetColumn, RunnerError> {
    let text = fs::read_to_string(path)?;
    let first = text.lines().next().ok_or_else(|| RunnerError::Invalid(format!("{} is empty", path.display())))?;
    Ok(TargetColumn::Index(first.split(',').count().saturating_sub(1)))
}

fn serialize(a: SerializeArgs) -> Result<(), RunnerError> {
    let target = match a.data.target {
        Some(t) => t,
        None => last_column(&a.data.data)?,
    };
    let ds = data::load_csv(&a.data.data, a.data.task, &target, a.data.header)?;
    let mut tpl = PromptTemplate::default();
    if let Some(d) = a.decimals {
        tpl = tpl.with_decimals(d);
    }
    if a.feature_names {
        tpl = tpl.with_naming(NamingMode::CorrectNamesList);
    }
    let examples = prompts::serialize_dataset(&ds, &tpl)?;
    fs::write(&a.out, prompts::to_jsonl(&examples))?;
    Ok(())
}

enum Loaded {
    Memorizer(MemorizerBackend),
    Http(HttpBackend),
}

impl Loaded {
    fn backend(&self) -> &dyn Backend {
        match self {
            Loaded::Memorizer(b) => b,
            Loaded::Http(b) => b,
        }
    }
}

fn open_backend(a: &BackendArgs, must_exist: bool) -> Result<Loaded, RunnerError> {
    match a.backend {
        BackendChoice::Memorizer => {
            let state =
                a.state.as_ref().ok_or_else(|| RunnerError::Invalid("--state is required for the memorizer".into()))?;
            if state.exists() {
                Ok(Loaded::Memorizer(MemorizerBackend::load(state)?))
            } else if must_exist {
                Err(RunnerError::Io(format!("{}: no such state file", state.display())))
            } else {
                Ok(Loaded::Memorizer(MemorizerBackend::new(0)))
            }
        }
        BackendChoice::Http => {
            let cfg = match &a.http_config {
                Some(p) => {
                    let text = fs::read_to_string(p)?;
                    toml::from_str::<HttpConfig>(&lift_runner::config::interpolate_env(&text)?)
                        .map_err(|e| RunnerError::Config(e.to_string()))?
                }
                None => HttpConfig::default(),
            };
            Ok(Loaded::Http(HttpBackend::new(cfg)))
        }
    }
}

fn finetune(a: FinetuneArgs) -> Result<(), RunnerError> {
    let text = fs::read_to_string(&a.train)?;
    let examples = prompts::parse_jsonl(&text)?;
    let loaded = open_backend(&a.backend, false)?;
    let mut spec = FineTuneSpec::new(a.epochs, a.base_model);
    spec.learning_rate_multiplier = a.learning_rate_multiplier;
    let handle = loaded.backend().fine_tune(&examples, &spec)?;
    if let (Loaded::Memorizer(m), Some(state)) = (&loaded, &a.backend.state) {
        m.save(state)?;
    }
    fs::write(&a.handle_out, serde_json::to_string_pretty(&handle).expect("handle serializes"))?;
    println!("{}", handle.model_id);
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), RunnerError> {
    let handle: ModelHandle = read_json(&a.handle)?;
    let loaded = open_backend(&a.backend, true)?;
    let text = fs::read_to_string(&a.prompts)?;
    let examples = prompts::parse_jsonl(&text)?;
    let tpl = PromptTemplate::default();
    let ctx = ParseContext::new(a.task, &a.labels, &tpl.end_token);
    let fallback = match a.task {
        TaskKind::Classification => PredictionValue::Label(a.fallback.clone()),
        TaskKind::Regression => PredictionValue::Value(
            a.fallback
                .parse()
                .map_err(|_| RunnerError::Invalid(format!("fallback {:?} is not a number", a.fallback)))?,
        ),
    };
    let policy = RetryPolicy::default();
    let preds = Exec::default().try_map(&examples, |i, ex| {
        let src = BoundModel::new(loaded.backend(), &handle).with_seed(Some(rng::derive(a.seed, &format!("item{i}"))));
        infer_with_retry(&src, &ex.prompt, &policy, &ctx, &fallback)
    })?;
    let mut out = fs::File::create(&a.out)?;
    for p in &preds {
        writeln!(out, "{}", serde_json::to_string(p).expect("prediction serializes"))?;
    }
    Ok(())
}

fn load_config(path: &Path, o: &Overrides) -> Result<ExperimentConfig, RunnerError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(r) = o.repeats {
        cfg.repeats = r;
    }
    if let Some(d) = &o.output_dir {
        cfg.output_dir = d.clone();
    }
    match o.exec {
        Some(ExecChoice::Sequential) => cfg.exec = Exec::Sequential,
        Some(ExecChoice::Parallel) => cfg.exec = Exec::Parallel,
        None => {}
    }
    Ok(cfg)
}

fn factory(cfg: &ExperimentConfig) -> Box<dyn BackendFactory> {
    match &cfg.backend {
        Some(b) => Box::new(b.clone()),
        None => Box::new(NoBackend),
    }
}

fn print_result(r: &ExperimentResult) {
    println!("{}", r.to_json());
}

fn run_with(mut cfg: ExperimentConfig, mode: Option<Mode>, persist: bool) -> Result<(), RunnerError> {
    if let Some(m) = mode {
        cfg.mode = m;
    }
    let f = factory(&cfg);
    print_result(&pipeline::run(&cfg, f.as_ref(), persist)?);
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<(), RunnerError> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let f = factory(&cfg);
    let results = pipeline::sample_complexity_sweep(&cfg, f.as_ref(), &a.sizes, !a.overrides.no_persist)?;
    print!("{}", report::render(&results, ReportFormat::Markdown)?);
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<(), RunnerError> {
    let mut cfg = load_config(&a.config, &a.overrides)?;
    if !a.spec.is_empty() {
        cfg.baseline_grid = a
            .spec
            .iter()
            .map(|s| {
                serde_json::from_str::<BaselineSpec>(s).map_err(|e| RunnerError::Invalid(format!("--spec {s}: {e}")))
            })
            .collect::<Result<_, _>>()?;
    }
    run_with(cfg, Some(Mode::Baseline), !a.overrides.no_persist)
}

fn report_cmd(a: ReportArgs) -> Result<(), RunnerError> {
    let results = a.results.iter().map(|p| read_json::<ExperimentResult>(p)).collect::<Result<Vec<_>, _>>()?;
    match &a.out {
        Some(p) => report::emit_report(&results, a.format, p),
        None => {
            print!("{}", report::render(&results, a.format)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Serialize(a) => serialize(a),
        Command::Finetune(a) => finetune(a),
        Command::Predict(a) => predict(a),
        Command::Run(a) => {
            load_config(&a.config, &a.overrides).and_then(|c| run_with(c, None, !a.overrides.no_persist))
        }
        Command::Icl(a) => load_config(&a.config, &a.overrides)
            .and_then(|c| run_with(c, Some(Mode::InContext), !a.overrides.no_persist)),
        Command::Sweep(a) => sweep(a),
        Command::Baseline(a) => baseline(a),
        Command::Report(a) => report_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
