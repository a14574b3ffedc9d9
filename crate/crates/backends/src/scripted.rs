//! Test double that replays queued responses or calls a function.

use std::collections::VecDeque;
use std::sync::Mutex;

use lift_core::prompts::PromptedExample;

use crate::{
    Backend, BackendError, BackendKind, Completion, CompletionRequest, FineTuneSpec, JobRecord, ModelHandle, Result,
};

type Responder = Box<dyn Fn(&CompletionRequest) -> Result<String> + Send + Sync>;

/// Serves queued raw responses first, then falls back to the responder (or
/// an empty string). Every request and training set is recorded.
#[derive(Default)]
pub struct ScriptedBackend {
    queue: Mutex<VecDeque<String>>,
    responder: Option<Responder>,
    requests: Mutex<Vec<CompletionRequest>>,
    trainings: Mutex<Vec<Vec<PromptedExample>>>,
}

impl std::fmt::Debug for ScriptedBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedBackend").field("queued", &self.queue.lock().map(|q| q.len()).ok()).finish()
    }
}

fn lock<T>(m: &Mutex<T>) -> std::sync::MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_queue<S: Into<String>>(responses: impl IntoIterator<Item = S>) -> Self {
        let b = Self::default();
        lock(&b.queue).extend(responses.into_iter().map(Into::into));
        b
    }

    pub fn with_responder(f: impl Fn(&CompletionRequest) -> Result<String> + Send + Sync + 'static) -> Self {
        ScriptedBackend { responder: Some(Box::new(f)), ..Self::default() }
    }

    pub fn push(&self, response: impl Into<String>) {
        lock(&self.queue).push_back(response.into());
    }

    pub fn requests(&self) -> Vec<CompletionRequest> {
        lock(&self.requests).clone()
    }

    pub fn trainings(&self) -> Vec<Vec<PromptedExample>> {
        lock(&self.trainings).clone()
    }

    fn record_training(
        &self,
        training: &[PromptedExample],
        from: Option<&ModelHandle>,
        spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        spec.validate()?;
        if training.is_empty() {
            return Err(BackendError::EmptyTraining);
        }
        let mut t = lock(&self.trainings);
        let k = t.len();
        t.push(training.to_vec());
        let model_id = format!("scripted-{k}");
        let mut jobs = from.map(|h| h.jobs.clone()).unwrap_or_default();
        jobs.push(JobRecord {
            job_id: format!("ftjob-scripted-{k}"),
            base_model: from.map_or_else(|| spec.base_model.clone(), |h| h.model_id.clone()),
            epochs: spec.epochs,
            learning_rate_multiplier: spec.learning_rate_multiplier,
            n_examples: training.len(),
            result_model: model_id.clone(),
        });
        Ok(ModelHandle { backend_kind: BackendKind::Scripted, model_id, jobs, issuer: None })
    }
}

impl Backend for ScriptedBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }

    fn fine_tune(&self, training: &[PromptedExample], spec: &FineTuneSpec) -> Result<ModelHandle> {
        self.record_training(training, None, spec)
    }

    fn continue_fine_tune(
        &self,
        from: &ModelHandle,
        training: &[PromptedExample],
        spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        self.record_training(training, Some(from), spec)
    }

    fn base_model(&self, name: &str) -> Result<ModelHandle> {
        Ok(ModelHandle::new(BackendKind::Scripted, name))
    }

    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> Result<Completion> {
        if handle.backend_kind != BackendKind::Scripted {
            return Err(BackendError::UnknownHandle(handle.model_id.clone()));
        }
        req.validate()?;
        lock(&self.requests).push(req.clone());
        let queued = lock(&self.queue).pop_front();
        let raw = match (queued, &self.responder) {
            (Some(r), _) => r,
            (None, Some(f)) => f(req)?,
            (None, None) => String::new(),
        };
        Ok(Completion::from_raw(&raw, &req.stop))
    }
}
