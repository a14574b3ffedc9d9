//! Language-model backends: an HTTP client for OpenAI-compatible services,
//! a memorizing nearest-prompt double, and a scripted double for tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use lift_core::parse::CompletionSource;
use lift_core::prompts::{PromptedExample, DEFAULT_END_TOKEN};

pub mod http;
pub mod limiter;
pub mod memorizer;
pub mod scripted;

pub use http::{HttpBackend, HttpConfig};
pub use memorizer::MemorizerBackend;
pub use scripted::ScriptedBackend;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("fine-tuning job failed: {0}")]
    JobFailed(String),
    #[error("credential environment variable {0} is not set")]
    AuthMissing(String),
    #[error("model handle {0:?} was not issued by this backend")]
    UnknownHandle(String),
    #[error("this backend cannot continue fine-tuning from an existing model")]
    ContinuationUnsupported,
    #[error("training set is empty")]
    EmptyTraining,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("io: {0}")]
    Io(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

pub type Result<T> = std::result::Result<T, BackendError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Http,
    Memorizer,
    Scripted,
}

fn default_base_model() -> String {
    "base".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FineTuneSpec {
    pub epochs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate_multiplier: Option<f64>,
    #[serde(default = "default_base_model")]
    pub base_model: String,
}

impl FineTuneSpec {
    pub fn new(epochs: u32, base_model: impl Into<String>) -> Self {
        FineTuneSpec { epochs, learning_rate_multiplier: None, base_model: base_model.into() }
    }

    pub fn with_learning_rate_multiplier(mut self, m: f64) -> Self {
        self.learning_rate_multiplier = Some(m);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(BackendError::InvalidRequest("epochs must be at least 1".into()));
        }
        if let Some(m) = self.learning_rate_multiplier {
            if !(m > 0.0 && m.is_finite()) {
                return Err(BackendError::InvalidRequest("learning rate multiplier must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
    /// Sampling seed forwarded to the provider. Offline backends key their
    /// sampling stream on it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, temperature: f64) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature,
            max_tokens: 32,
            stop: vec![DEFAULT_END_TOKEN.into()],
            seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!("temperature {} outside [0,2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.stop.is_empty() || self.stop.iter().any(String::is_empty) {
            return Err(BackendError::InvalidRequest("stop strings must be nonempty".into()));
        }
        Ok(())
    }
}

/// Generated text with the stop sequence removed. `stopped` tells whether
/// generation ended on a stop string rather than the token limit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub stopped: bool,
}

impl Completion {
    /// Cuts `raw` at the first stop string.
    pub fn from_raw(raw: &str, stop: &[String]) -> Self {
        let cut = stop.iter().filter_map(|s| raw.find(s.as_str())).min();
        match cut {
            Some(i) => Completion { text: raw[..i].to_string(), stopped: true },
            None => Completion { text: raw.to_string(), stopped: false },
        }
    }
}

/// One fine-tuning job in a model's lineage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub job_id: String,
    pub base_model: String,
    pub epochs: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate_multiplier: Option<f64>,
    pub n_examples: usize,
    pub result_model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    pub backend_kind: BackendKind,
    pub model_id: String,
    /// Fine-tuning jobs that produced this model, oldest first.
    #[serde(default)]
    pub jobs: Vec<JobRecord>,
    /// Process-local identity of the issuing backend instance.
    #[serde(skip)]
    pub(crate) issuer: Option<u64>,
}

impl ModelHandle {
    pub fn new(backend_kind: BackendKind, model_id: impl Into<String>) -> Self {
        ModelHandle { backend_kind, model_id: model_id.into(), jobs: Vec::new(), issuer: None }
    }
}

pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn fine_tune(&self, training: &[PromptedExample], spec: &FineTuneSpec) -> Result<ModelHandle>;

    /// Fine-tunes further starting from `from`.
    fn continue_fine_tune(
        &self,
        _from: &ModelHandle,
        _training: &[PromptedExample],
        _spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        Err(BackendError::ContinuationUnsupported)
    }

    /// Handle to an un-tuned model, used for in-context prompting.
    fn base_model(&self, name: &str) -> Result<ModelHandle>;

    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> Result<Completion>;
}

impl<B: Backend + ?Sized> Backend for &B {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
    fn fine_tune(&self, training: &[PromptedExample], spec: &FineTuneSpec) -> Result<ModelHandle> {
        (**self).fine_tune(training, spec)
    }
    fn continue_fine_tune(
        &self,
        from: &ModelHandle,
        training: &[PromptedExample],
        spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        (**self).continue_fine_tune(from, training, spec)
    }
    fn base_model(&self, name: &str) -> Result<ModelHandle> {
        (**self).base_model(name)
    }
    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> Result<Completion> {
        (**self).complete(handle, req)
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
    fn fine_tune(&self, training: &[PromptedExample], spec: &FineTuneSpec) -> Result<ModelHandle> {
        (**self).fine_tune(training, spec)
    }
    fn continue_fine_tune(
        &self,
        from: &ModelHandle,
        training: &[PromptedExample],
        spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        (**self).continue_fine_tune(from, training, spec)
    }
    fn base_model(&self, name: &str) -> Result<ModelHandle> {
        (**self).base_model(name)
    }
    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> Result<Completion> {
        (**self).complete(handle, req)
    }
}

/// Pretext fine-tune followed by a continued fine-tune on the target set.
pub fn two_stage_fine_tune<B: Backend + ?Sized>(
    backend: &B,
    pretext: &[PromptedExample],
    target: &[PromptedExample],
    pretext_spec: &FineTuneSpec,
    target_spec: &FineTuneSpec,
) -> Result<ModelHandle> {
    if pretext.is_empty() || target.is_empty() {
        return Err(BackendError::EmptyTraining);
    }
    let first = backend.fine_tune(pretext, pretext_spec)?;
    backend.continue_fine_tune(&first, target, target_spec)
}

/// A model handle bound to a backend and request settings, usable wherever a
/// [`CompletionSource`] is expected. The end token is put back on text that
/// stopped on it, so parsers can tell complete answers from truncated ones.
pub struct BoundModel<'a, B: Backend + ?Sized> {
    pub backend: &'a B,
    pub handle: &'a ModelHandle,
    pub max_tokens: u32,
    pub end_token: String,
    pub seed: Option<u64>,
}

impl<'a, B: Backend + ?Sized> BoundModel<'a, B> {
    pub fn new(backend: &'a B, handle: &'a ModelHandle) -> Self {
        BoundModel { backend, handle, max_tokens: 32, end_token: DEFAULT_END_TOKEN.into(), seed: None }
    }

    pub fn with_max_tokens(mut self, n: u32) -> Self {
        self.max_tokens = n;
        self
    }

    pub fn with_end_token(mut self, t: impl Into<String>) -> Self {
        self.end_token = t.into();
        self
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }
}

impl<B: Backend + ?Sized> CompletionSource for BoundModel<'_, B> {
    type Error = BackendError;

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String> {
        let req = CompletionRequest {
            prompt: prompt.to_string(),
            temperature,
            max_tokens: self.max_tokens,
            stop: vec![self.end_token.clone()],
            seed: self.seed,
        };
        let c = self.backend.complete(self.handle, &req)?;
        Ok(if c.stopped { c.text + &self.end_token } else { c.text })
    }
}
