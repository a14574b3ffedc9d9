//! Experiment configuration: a TOML file with `${VAR}` interpolation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use lift_backends::{FineTuneSpec, HttpConfig};
use lift_core::baselines::BaselineSpec;
use lift_core::data::{FeatureSchema, TargetColumn, TaskKind};
use lift_core::perturb::NoiseKind;
use lift_core::synth::{ClassShapeSpec, RegressionGenSpec};
use lift_core::{Exec, PromptTemplate, RetryPolicy, SplitSpec};

use crate::error::RunnerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FineTune,
    TwoStage,
    InContext,
    Baseline,
}

fn d_false() -> bool {
    false
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        task: TaskKind,
        target: TargetColumn,
        #[serde(default = "d_false")]
        has_header: bool,
        /// Feature names when the file has none (or to override them).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        feature_names: Option<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_name: Option<String>,
    },
    SynthClassification(ClassShapeSpec),
    SynthRegression(RegressionGenSpec),
}

fn serde_name<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

impl DatasetSource {
    pub fn describe(&self) -> String {
        match self {
            DatasetSource::Csv { path, .. } => {
                path.file_stem().map_or_else(|| "csv".into(), |s| s.to_string_lossy().into_owned())
            }
            DatasetSource::SynthClassification(s) => serde_name(&s.shape),
            DatasetSource::SynthRegression(s) => format!("{}_p{}", serde_name(&s.kind), s.p),
        }
    }

    pub fn schema_override(&self, p: usize) -> Result<Option<FeatureSchema>, RunnerError> {
        if let DatasetSource::Csv { feature_names: Some(names), target_name, .. } = self {
            if names.len() != p {
                return Err(RunnerError::Config(format!("{} feature names given for {p} features", names.len())));
            }
            let mut s = FeatureSchema::named(names.clone()).map_err(|e| RunnerError::Config(e.to_string()))?;
            if let Some(t) = target_name {
                s = s.with_target_name(t.clone());
            }
            return Ok(Some(s));
        }
        Ok(None)
    }
}

/// Training-set perturbations, applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum PerturbOp {
    CorruptRandom {
        fraction: f64,
    },
    CorruptSystematic {
        fraction: f64,
    },
    Outliers {
        fraction: f64,
    },
    FeatureNoise {
        kind: NoiseKind,
        epsilon: f64,
    },
    AugmentGaussian {
        epsilon: f64,
        copies: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clamp: Option<(f64, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestNoise {
    pub kind: NoiseKind,
    pub epsilon: f64,
}

fn d_mem_seed() -> u64 {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Memorizer {
        #[serde(default = "d_mem_seed")]
        seed: u64,
    },
    Http(HttpConfig),
}

fn d_pretext_epochs() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    #[serde(default = "d_pretext_epochs")]
    pub pretext_epochs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pretext_learning_rate_multiplier: Option<f64>,
    /// Number of independently generated pretext tasks pooled together.
    #[serde(default = "d_pretext_tasks")]
    pub pretext_tasks: usize,
}

fn d_pretext_tasks() -> usize {
    2
}

impl Default for TwoStageConfig {
    fn default() -> Self {
        TwoStageConfig { pretext_epochs: 2, pretext_learning_rate_multiplier: None, pretext_tasks: 2 }
    }
}

fn d_base_model() -> String {
    "base".into()
}
fn d_max_chars() -> usize {
    6000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IclConfig {
    #[serde(default = "d_base_model")]
    pub base_model: String,
    /// Character budget for examples plus query.
    #[serde(default = "d_max_chars")]
    pub max_chars: usize,
}

impl Default for IclConfig {
    fn default() -> Self {
        IclConfig { base_model: d_base_model(), max_chars: d_max_chars() }
    }
}

/// Prediction grid for decision-boundary plots (1-D or 2-D inputs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub low: f64,
    pub high: f64,
    /// Total points; a perfect square for 2-D inputs.
    pub count: usize,
}

fn d_repeats() -> usize {
    1
}
fn d_max_tokens() -> u32 {
    32
}
fn d_output() -> PathBuf {
    PathBuf::from("lift-output")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_repeats")]
    pub repeats: usize,
    #[serde(default = "d_output")]
    pub output_dir: PathBuf,
    pub dataset: DatasetSource,
    pub split: SplitSpec,
    #[serde(default)]
    pub template: PromptTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<BackendConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fine_tune_grid: Vec<FineTuneSpec>,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default = "d_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub perturbations: Vec<PerturbOp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_noise: Option<TestNoise>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub baseline_grid: Vec<BaselineSpec>,
    #[serde(default)]
    pub two_stage: TwoStageConfig,
    #[serde(default)]
    pub in_context: IclConfig,
    /// Positive class for binary precision/recall/F1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_grid: Option<BoundaryGrid>,
    #[serde(default)]
    pub exec: Exec,
}

/// Replaces `${NAME}` with the environment variable `NAME`. Unset variables
/// are an error; `$${` escapes a literal `${`.
pub fn interpolate_env(text: &str) -> Result<String, RunnerError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(i) = rest.find('$') {
        out.push_str(&rest[..i]);
        let tail = &rest[i..];
        if let Some(t) = tail.strip_prefix("$${") {
            out.push_str("${");
            rest = t;
        } else if let Some(t) = tail.strip_prefix("${") {
            let end = t.find('}').ok_or_else(|| RunnerError::Config("unterminated ${ in config".into()))?;
            let name = &t[..end];
            let val = std::env::var(name)
                .map_err(|_| RunnerError::Config(format!("environment variable {name} is not set")))?;
            out.push_str(&val);
            rest = &t[end + 1..];
        } else {
            out.push('$');
            rest = &tail[1..];
        }
    }
    out.push_str(rest);
    Ok(out)
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, RunnerError> {
        let text = interpolate_env(text)?;
        let cfg: ExperimentConfig = toml::from_str(&text).map_err(|e| RunnerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative CSV paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let DatasetSource::Csv { path: p, .. } = &mut cfg.dataset {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: &str| Err(RunnerError::Config(m.to_string()));
        if self.repeats == 0 {
            return bad("repeats must be at least 1");
        }
        self.split.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        self.retry.validate().map_err(RunnerError::Config)?;
        if self.max_tokens == 0 {
            return bad("max_tokens must be at least 1");
        }
        match self.mode {
            Mode::FineTune | Mode::TwoStage => {
                if self.fine_tune_grid.is_empty() {
                    return bad("fine_tune_grid must not be empty");
                }
                for s in &self.fine_tune_grid {
                    s.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
                }
                if self.backend.is_none() {
                    return bad("a backend is required for fine-tuning modes");
                }
                if self.mode == Mode::TwoStage
                    && (self.two_stage.pretext_epochs == 0 || self.two_stage.pretext_tasks == 0)
                {
                    return bad("two_stage needs at least one pretext task and epoch");
                }
            }
            Mode::InContext => {
                if self.backend.is_none() {
                    return bad("a backend is required for in-context mode");
                }
            }
            Mode::Baseline => {
                if self.baseline_grid.is_empty() {
                    return bad("baseline_grid must not be empty");
                }
            }
        }
        for op in &self.perturbations {
            let f = match op {
                PerturbOp::CorruptRandom { fraction }
                | PerturbOp::CorruptSystematic { fraction }
                | PerturbOp::Outliers { fraction } => *fraction,
                _ => 0.0,
            };
            if !(0.0..=1.0).contains(&f) {
                return bad("perturbation fractions must lie in [0,1]");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.dataset.describe())
    }
}
