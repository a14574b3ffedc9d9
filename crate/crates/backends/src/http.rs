//! Client for OpenAI-compatible file, fine-tuning and completion endpoints.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use lift_core::prompts::{to_jsonl, PromptedExample};

use crate::limiter::{backoff_delay, RateLimiter};
use crate::{
    Backend, BackendError, BackendKind, Completion, CompletionRequest, FineTuneSpec, JobRecord, ModelHandle, Result,
};

fn d_base_url() -> String {
    "https://api.openai.com/v1".into()
}
fn d_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn d_rpm() -> u32 {
    60
}
fn d_burst() -> u32 {
    5
}
fn d_retries() -> u32 {
    5
}
fn d_backoff_ms() -> u64 {
    1000
}
fn d_backoff_max_ms() -> u64 {
    60_000
}
fn d_poll_ms() -> u64 {
    5000
}
fn d_job_timeout() -> u64 {
    4 * 3600
}
fn d_request_timeout() -> u64 {
    120
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    #[serde(default = "d_base_url")]
    pub base_url: String,
    /// Name of the environment variable holding the API key.
    #[serde(default = "d_key_env")]
    pub api_key_env: String,
    #[serde(default = "d_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "d_burst")]
    pub burst: u32,
    #[serde(default = "d_retries")]
    pub max_retries: u32,
    #[serde(default = "d_backoff_ms")]
    pub backoff_initial_ms: u64,
    #[serde(default = "d_backoff_max_ms")]
    pub backoff_max_ms: u64,
    #[serde(default = "d_poll_ms")]
    pub poll_interval_ms: u64,
    #[serde(default = "d_job_timeout")]
    pub job_timeout_secs: u64,
    #[serde(default = "d_request_timeout")]
    pub request_timeout_secs: u64,
    /// Whether the provider accepts a fine-tuned model as the base of a new job.
    #[serde(default)]
    pub allow_continuation: bool,
}

impl Default for HttpConfig {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("all fields have defaults")
    }
}

#[derive(Serialize)]
struct CompletionBody<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    max_tokens: u32,
    stop: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Body of `POST /completions`.
pub fn completion_body(model: &str, req: &CompletionRequest) -> String {
    let body = CompletionBody {
        model,
        prompt: &req.prompt,
        temperature: req.temperature,
        max_tokens: req.max_tokens,
        stop: &req.stop,
        seed: req.seed,
    };
    serde_json::to_string(&body).expect("plain struct serializes")
}

/// Extracts the first choice. The text is cut at the first stop string in
/// case the provider did not already do so.
pub fn parse_completion_response(body: &str, stop: &[String]) -> Result<Completion> {
    #[derive(Deserialize)]
    struct Choice {
        text: String,
        #[serde(default)]
        finish_reason: Option<String>,
    }
    #[derive(Deserialize)]
    struct Resp {
        choices: Vec<Choice>,
    }
    let r: Resp =
        serde_json::from_str(body).map_err(|e| BackendError::Transport(format!("bad completion response: {e}")))?;
    let choice =
        r.choices.into_iter().next().ok_or_else(|| BackendError::Transport("no choices in response".into()))?;
    let mut c = Completion::from_raw(&choice.text, stop);
    if choice.finish_reason.as_deref() == Some("stop") {
        c.stopped = true;
    }
    Ok(c)
}

#[derive(Serialize)]
struct Hyperparameters {
    n_epochs: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    learning_rate_multiplier: Option<f64>,
}

#[derive(Serialize)]
struct JobBody<'a> {
    training_file: &'a str,
    model: &'a str,
    hyperparameters: Hyperparameters,
}

/// Body of `POST /fine_tuning/jobs`.
pub fn job_create_body(training_file: &str, model: &str, spec: &FineTuneSpec) -> String {
    let body = JobBody {
        training_file,
        model,
        hyperparameters: Hyperparameters {
            n_epochs: spec.epochs,
            learning_rate_multiplier: spec.learning_rate_multiplier,
        },
    };
    serde_json::to_string(&body).expect("plain struct serializes")
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct JobStatus {
    pub id: String,
    pub status: String,
    #[serde(default)]
    pub fine_tuned_model: Option<String>,
    #[serde(default)]
    pub error: Option<Value>,
}

impl JobStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self.status.as_str(), "succeeded" | "failed" | "cancelled")
    }

    fn error_message(&self) -> String {
        self.error
            .as_ref()
            .and_then(|e| e.get("message").and_then(Value::as_str).map(str::to_string).or_else(|| Some(e.to_string())))
            .filter(|m| !m.is_empty() && m != "null")
            .unwrap_or_else(|| format!("job {} ended with status {}", self.id, self.status))
    }
}

pub fn parse_job_status(body: &str) -> Result<JobStatus> {
    serde_json::from_str(body).map_err(|e| BackendError::Transport(format!("bad job response: {e}")))
}

pub fn parse_file_id(body: &str) -> Result<String> {
    let v: Value =
        serde_json::from_str(body).map_err(|e| BackendError::Transport(format!("bad file response: {e}")))?;
    v.get("id")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| BackendError::Transport("file response has no id".into()))
}

/// `multipart/form-data` body for `POST /files` with purpose `fine-tune`.
pub fn file_upload_body(boundary: &str, filename: &str, jsonl: &str) -> Vec<u8> {
    let mut b = String::new();
    b.push_str(&format!("--{boundary}\r\nContent-Disposition: form-data; name=\"purpose\"\r\n\r\nfine-tune\r\n"));
    b.push_str(&format!(
        "--{boundary}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{filename}\"\r\nContent-Type: application/jsonl\r\n\r\n"
    ));
    b.push_str(jsonl);
    b.push_str(&format!("\r\n--{boundary}--\r\n"));
    b.into_bytes()
}

const BOUNDARY: &str = "lift-jsonl-boundary-7f3a9c";

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    limiter: RateLimiter,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend").field("config", &self.config).finish()
    }
}

enum Method {
    Get,
    Post,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(config.request_timeout_secs)))
            .build()
            .into();
        let limiter = RateLimiter::new(config.requests_per_minute, config.burst);
        HttpBackend { config, agent, limiter }
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn api_key(&self) -> Result<String> {
        match std::env::var(&self.config.api_key_env) {
            Ok(k) if !k.is_empty() => Ok(k),
            _ => Err(BackendError::AuthMissing(self.config.api_key_env.clone())),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path.trim_start_matches('/'))
    }

    /// Sends one request with rate limiting and retries on 429, 5xx and
    /// connection failures. Returns the response body of a 2xx reply.
    fn send(&self, method: Method, path: &str, body: Option<(&str, &[u8])>) -> Result<String> {
        let key = self.api_key()?;
        let url = self.url(path);
        let initial = Duration::from_millis(self.config.backoff_initial_ms);
        let max = Duration::from_millis(self.config.backoff_max_ms);
        let mut attempt = 0;
        loop {
            self.limiter.acquire();
            let auth = format!("Bearer {key}");
            let result = match (&method, body) {
                (Method::Get, _) => self.agent.get(&url).header("Authorization", &auth).call(),
                (Method::Post, Some((ctype, bytes))) => {
                    self.agent.post(&url).header("Authorization", &auth).header("Content-Type", ctype).send(bytes)
                }
                (Method::Post, None) => self.agent.post(&url).header("Authorization", &auth).send_empty(),
            };
            let (retry, err, retry_after) = match result {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    let retry_after = resp
                        .headers()
                        .get("retry-after")
                        .and_then(|v| v.to_str().ok())
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(Duration::from_secs);
                    let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
                    match status {
                        200..=299 => return Ok(text),
                        429 | 500..=599 => {
                            (true, BackendError::Transport(format!("HTTP {status}: {text}")), retry_after)
                        }
                        401 | 403 => {
                            return Err(BackendError::Transport(format!("HTTP {status}: credentials rejected: {text}")))
                        }
                        _ => return Err(BackendError::InvalidRequest(format!("HTTP {status}: {text}"))),
                    }
                }
                Err(e) => (true, BackendError::Transport(e.to_string()), None),
            };
            if !retry || attempt >= self.config.max_retries {
                return Err(err);
            }
            std::thread::sleep(retry_after.unwrap_or_else(|| backoff_delay(initial, attempt, max)).min(max));
            attempt += 1;
        }
    }

    fn post_json(&self, path: &str, body: &str) -> Result<String> {
        self.send(Method::Post, path, Some(("application/json", body.as_bytes())))
    }

    pub fn upload(&self, training: &[PromptedExample]) -> Result<String> {
        let body = file_upload_body(BOUNDARY, "train.jsonl", &to_jsonl(training));
        let ctype = format!("multipart/form-data; boundary={BOUNDARY}");
        parse_file_id(&self.send(Method::Post, "files", Some((&ctype, &body)))?)
    }

    pub fn job_status(&self, job_id: &str) -> Result<JobStatus> {
        parse_job_status(&self.send(Method::Get, &format!("fine_tuning/jobs/{job_id}"), None)?)
    }

    /// Uploads, creates the job and polls until it finishes.
    fn run_job(
        &self,
        training: &[PromptedExample],
        base: &str,
        spec: &FineTuneSpec,
        mut jobs: Vec<JobRecord>,
    ) -> Result<ModelHandle> {
        spec.validate()?;
        if training.is_empty() {
            return Err(BackendError::EmptyTraining);
        }
        self.api_key()?;
        let file_id = self.upload(training)?;
        let mut job = parse_job_status(&self.post_json("fine_tuning/jobs", &job_create_body(&file_id, base, spec))?)?;
        let start = Instant::now();
        let timeout = Duration::from_secs(self.config.job_timeout_secs);
        while !job.is_terminal() {
            if start.elapsed() > timeout {
                return Err(BackendError::Timeout(format!("job {} still {} after {:?}", job.id, job.status, timeout)));
            }
            std::thread::sleep(Duration::from_millis(self.config.poll_interval_ms));
            job = self.job_status(&job.id)?;
        }
        let model = match (job.status.as_str(), &job.fine_tuned_model) {
            ("succeeded", Some(m)) => m.clone(),
            _ => return Err(BackendError::JobFailed(job.error_message())),
        };
        jobs.push(JobRecord {
            job_id: job.id.clone(),
            base_model: base.to_string(),
            epochs: spec.epochs,
            learning_rate_multiplier: spec.learning_rate_multiplier,
            n_examples: training.len(),
            result_model: model.clone(),
        });
        Ok(ModelHandle { backend_kind: BackendKind::Http, model_id: model, jobs, issuer: None })
    }
}

impl Backend for HttpBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Http
    }

    fn fine_tune(&self, training: &[PromptedExample], spec: &FineTuneSpec) -> Result<ModelHandle> {
        self.run_job(training, &spec.base_model, spec, Vec::new())
    }

    fn continue_fine_tune(
        &self,
        from: &ModelHandle,
        training: &[PromptedExample],
        spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        if !self.config.allow_continuation {
            return Err(BackendError::ContinuationUnsupported);
        }
        if from.backend_kind != BackendKind::Http {
            return Err(BackendError::UnknownHandle(from.model_id.clone()));
        }
        self.run_job(training, &from.model_id, spec, from.jobs.clone())
    }

    fn base_model(&self, name: &str) -> Result<ModelHandle> {
        Ok(ModelHandle::new(BackendKind::Http, name))
    }

    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> Result<Completion> {
        if handle.backend_kind != BackendKind::Http {
            return Err(BackendError::UnknownHandle(handle.model_id.clone()));
        }
        req.validate()?;
        let body = self.post_json("completions", &completion_body(&handle.model_id, req))?;
        parse_completion_response(&body, &req.stop)
    }
}
