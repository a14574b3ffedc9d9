use serde::Serialize;
use thiserror::Error;

use lift_backends::BackendError;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(#[from] lift_core::data::DataError),
    #[error("synth: {0}")]
    Synth(#[from] lift_core::synth::SynthError),
    #[error("prompt: {0}")]
    Prompt(#[from] lift_core::prompts::PromptError),
    #[error("perturb: {0}")]
    Perturb(#[from] lift_core::perturb::PerturbError),
    #[error("baseline: {0}")]
    Baseline(#[from] lift_core::baselines::BaselineError),
    #[error("eval: {0}")]
    Eval(#[from] lift_core::eval::EvalError),
    #[error("backend: {0}")]
    Backend(#[from] BackendError),
    #[error("io: {0}")]
    Io(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl From<std::io::Error> for RunnerError {
    fn from(e: std::io::Error) -> Self {
        RunnerError::Io(e.to_string())
    }
}

impl RunnerError {
    /// Stable machine-readable error kind.
    pub fn code(&self) -> &'static str {
        match self {
            RunnerError::Config(_) => "config",
            RunnerError::Data(_) => "data",
            RunnerError::Synth(_) => "synth",
            RunnerError::Prompt(_) => "prompt",
            RunnerError::Perturb(_) => "perturb",
            RunnerError::Baseline(_) => "baseline",
            RunnerError::Eval(_) => "eval",
            RunnerError::Backend(BackendError::AuthMissing(_)) => "auth_missing",
            RunnerError::Backend(_) => "backend",
            RunnerError::Io(_) => "io",
            RunnerError::Invalid(_) => "invalid_argument",
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct E<'a> {
            error: &'a str,
            message: String,
        }
        serde_json::to_string(&E { error: self.code(), message: self.to_string() }).expect("plain struct serializes")
    }
}
