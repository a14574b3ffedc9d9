//! Offline stand-in for a fine-tuned model: recalls training completions by
//! exact prompt match, else by whitespace-token overlap.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use indexmap::IndexMap;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use lift_core::prompts::{PromptedExample, DEFAULT_END_TOKEN, DEFAULT_QA_SEPARATOR};
use lift_core::rng;

use crate::{
    Backend, BackendError, BackendKind, Completion, CompletionRequest, FineTuneSpec, JobRecord, ModelHandle, Result,
};

/// (model, prompt, temperature bits, request seed)
type CallKey = (String, String, u64, Option<u64>);

static NEXT_ISSUER: AtomicU64 = AtomicU64::new(1);

const BASE_PREFIX: &str = "base:";
/// Candidates considered when sampling at positive temperature.
pub const TOP_K: usize = 3;

fn tokens(s: &str) -> HashMap<&str, u32> {
    let mut m = HashMap::new();
    for t in s.split_whitespace() {
        *m.entry(t).or_insert(0) += 1;
    }
    m
}

fn overlap(a: &HashMap<&str, u32>, b: &HashMap<&str, u32>) -> u32 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().map(|(t, c)| (*c).min(large.get(t).copied().unwrap_or(0))).sum()
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct Table {
    /// Later insertions overwrite earlier completions for the same prompt.
    entries: IndexMap<String, String>,
    jobs: Vec<JobRecord>,
}

impl Table {
    fn ingest(&mut self, training: &[PromptedExample]) {
        for ex in training {
            self.entries.insert(ex.prompt.clone(), ex.completion.clone());
        }
    }

    /// Entries ranked by overlap with `prompt`, best first, ties by insertion
    /// order. Returns at most `k` entries.
    fn ranked(&self, prompt: &str, k: usize) -> Vec<&str> {
        let q = tokens(prompt);
        let mut scored: Vec<(u32, usize)> =
            self.entries.keys().enumerate().map(|(i, p)| (overlap(&q, &tokens(p)), i)).collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        scored.into_iter().map(|(_, i)| self.entries[i].as_str()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Snapshot {
    seed: u64,
    qa_separator: String,
    end_token: String,
    models: IndexMap<String, Table>,
}

#[derive(Debug)]
pub struct MemorizerBackend {
    issuer: u64,
    seed: u64,
    qa_separator: String,
    end_token: String,
    models: RwLock<IndexMap<String, Arc<Table>>>,
    calls: Mutex<HashMap<CallKey, u64>>,
}

impl MemorizerBackend {
    pub fn new(seed: u64) -> Self {
        Self::with_separators(seed, DEFAULT_QA_SEPARATOR, DEFAULT_END_TOKEN)
    }

    /// Separators are only used to split in-context prompts for base models.
    pub fn with_separators(seed: u64, qa_separator: &str, end_token: &str) -> Self {
        MemorizerBackend {
            issuer: NEXT_ISSUER.fetch_add(1, Ordering::Relaxed),
            seed,
            qa_separator: qa_separator.into(),
            end_token: end_token.into(),
            models: RwLock::new(IndexMap::new()),
            calls: Mutex::new(HashMap::new()),
        }
    }

    fn table(&self, handle: &ModelHandle) -> Result<Arc<Table>> {
        let foreign = handle.issuer.is_some_and(|i| i != self.issuer);
        if handle.backend_kind != BackendKind::Memorizer || foreign {
            return Err(BackendError::UnknownHandle(handle.model_id.clone()));
        }
        let models = self.models.read().unwrap_or_else(|e| e.into_inner());
        models.get(&handle.model_id).cloned().ok_or_else(|| BackendError::UnknownHandle(handle.model_id.clone()))
    }

    fn register(&self, table: Table, from: Option<&ModelHandle>, spec: &FineTuneSpec, n: usize) -> ModelHandle {
        let mut models = self.models.write().unwrap_or_else(|e| e.into_inner());
        let k = models.len();
        let model_id = format!("ft-mem-{k}");
        let mut table = table;
        table.jobs.push(JobRecord {
            job_id: format!("ftjob-mem-{k}"),
            base_model: from.map_or_else(|| spec.base_model.clone(), |h| h.model_id.clone()),
            epochs: spec.epochs,
            learning_rate_multiplier: spec.learning_rate_multiplier,
            n_examples: n,
            result_model: model_id.clone(),
        });
        let handle = ModelHandle {
            backend_kind: BackendKind::Memorizer,
            model_id: model_id.clone(),
            jobs: table.jobs.clone(),
            issuer: Some(self.issuer),
        };
        models.insert(model_id, Arc::new(table));
        handle
    }

    /// Splits an in-context prompt into its worked examples and the query.
    fn split_context<'p>(&self, prompt: &'p str) -> (Table, &'p str) {
        let mut table = Table::default();
        let mut rest = prompt;
        while let Some(end) = rest.find(&self.end_token) {
            let seg = &rest[..end];
            if let Some(sep) = seg.rfind(&self.qa_separator) {
                let cut = sep + self.qa_separator.len();
                table.entries.insert(seg[..cut].to_string(), format!("{}{}", &seg[cut..], self.end_token));
            }
            rest = &rest[end + self.end_token.len()..];
        }
        (table, rest)
    }

    fn next_call(&self, model: &str, prompt: &str, temperature: f64, seed: Option<u64>) -> u64 {
        let mut calls = self.calls.lock().unwrap_or_else(|e| e.into_inner());
        let c = calls.entry((model.to_string(), prompt.to_string(), temperature.to_bits(), seed)).or_insert(0);
        *c += 1;
        *c - 1
    }

    /// Positive-temperature draws are keyed on the request seed and a
    /// per-(prompt, seed) call counter, so concurrent callers using distinct
    /// seeds get reproducible answers.
    fn recall(&self, model: &str, table: &Table, prompt: &str, temperature: f64, seed: Option<u64>) -> Option<String> {
        if let Some(c) = table.entries.get(prompt) {
            return Some(c.clone());
        }
        if temperature <= 0.0 {
            return table.ranked(prompt, 1).first().map(|s| s.to_string());
        }
        let top = table.ranked(prompt, TOP_K);
        if top.is_empty() {
            return None;
        }
        let call = self.next_call(model, prompt, temperature, seed);
        let base = rng::derive(self.seed, &format!("{model}\u{0}{prompt}\u{0}{}", temperature.to_bits()));
        let key = seed.map_or(base, |s| rng::derive(base ^ rng::splitmix64(s), "request"));
        let mut r = rng::item_rng(key, call);
        Some(top[r.random_range(0..top.len())].to_string())
    }

    /// Writes all fine-tuned tables so another process can serve them.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let models = self.models.read().unwrap_or_else(|e| e.into_inner());
        let snap = Snapshot {
            seed: self.seed,
            qa_separator: self.qa_separator.clone(),
            end_token: self.end_token.clone(),
            models: models.iter().map(|(k, v)| (k.clone(), (**v).clone())).collect(),
        };
        let text = serde_json::to_string(&snap).map_err(|e| BackendError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| BackendError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Io(e.to_string()))?;
        let snap: Snapshot = serde_json::from_str(&text).map_err(|e| BackendError::Io(e.to_string()))?;
        let b = Self::with_separators(snap.seed, &snap.qa_separator, &snap.end_token);
        *b.models.write().unwrap_or_else(|e| e.into_inner()) =
            snap.models.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
        Ok(b)
    }

    /// Stored prompt/completion pairs of a model, in insertion order.
    pub fn examples(&self, handle: &ModelHandle) -> Result<Vec<PromptedExample>> {
        let t = self.table(handle)?;
        Ok(t.entries.iter().map(|(p, c)| PromptedExample { prompt: p.clone(), completion: c.clone() }).collect())
    }
}

impl Backend for MemorizerBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Memorizer
    }

    fn fine_tune(&self, training: &[PromptedExample], spec: &FineTuneSpec) -> Result<ModelHandle> {
        spec.validate()?;
        if training.is_empty() {
            return Err(BackendError::EmptyTraining);
        }
        let mut t = Table::default();
        t.ingest(training);
        Ok(self.register(t, None, spec, training.len()))
    }

    fn continue_fine_tune(
        &self,
        from: &ModelHandle,
        training: &[PromptedExample],
        spec: &FineTuneSpec,
    ) -> Result<ModelHandle> {
        spec.validate()?;
        if training.is_empty() {
            return Err(BackendError::EmptyTraining);
        }
        let mut t = (*self.table(from)?).clone();
        t.ingest(training);
        Ok(self.register(t, Some(from), spec, training.len()))
    }

    fn base_model(&self, name: &str) -> Result<ModelHandle> {
        Ok(ModelHandle {
            backend_kind: BackendKind::Memorizer,
            model_id: format!("{BASE_PREFIX}{name}"),
            jobs: Vec::new(),
            issuer: Some(self.issuer),
        })
    }

    fn complete(&self, handle: &ModelHandle, req: &CompletionRequest) -> Result<Completion> {
        req.validate()?;
        let raw = if handle.model_id.starts_with(BASE_PREFIX) {
            if handle.backend_kind != BackendKind::Memorizer || handle.issuer.is_some_and(|i| i != self.issuer) {
                return Err(BackendError::UnknownHandle(handle.model_id.clone()));
            }
            let (table, query) = self.split_context(&req.prompt);
            self.recall(&handle.model_id, &table, query, req.temperature, req.seed)
        } else {
            let table = self.table(handle)?;
            self.recall(&handle.model_id, &table, &req.prompt, req.temperature, req.seed)
        };
        Ok(Completion::from_raw(&raw.unwrap_or_default(), &req.stop))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(p: &str, c: &str) -> PromptedExample {
        PromptedExample { prompt: p.into(), completion: c.into() }
    }

    fn spec() -> FineTuneSpec {
        FineTuneSpec::new(1, "mem")
    }

    #[test]
    fn exact_and_overlap() {
        let b = MemorizerBackend::new(0);
        let h = b
            .fine_tune(
                &[
                    ex("When we have x1=1, what should be y?###", " y=a@@@"),
                    ex("When we have x1=9, what should be y?###", " y=b@@@"),
                ],
                &spec(),
            )
            .unwrap();
        let c = b.complete(&h, &CompletionRequest::new("When we have x1=9, what should be y?###", 0.0)).unwrap();
        assert_eq!(c, Completion { text: " y=b".into(), stopped: true });
        // shares "x1=1," with the first prompt only
        let c = b.complete(&h, &CompletionRequest::new("When we have x1=1, x2=5, what should be y?###", 0.0)).unwrap();
        assert_eq!(c.text, " y=a");
    }

    #[test]
    fn empty_training_rejected() {
        assert_eq!(MemorizerBackend::new(0).fine_tune(&[], &spec()), Err(BackendError::EmptyTraining));
    }

    #[test]
    fn handles_are_backend_local() {
        let a = MemorizerBackend::new(0);
        let b = MemorizerBackend::new(0);
        let h = a.fine_tune(&[ex("p", "c@@@")], &spec()).unwrap();
        b.fine_tune(&[ex("p", "c@@@")], &spec()).unwrap();
        assert!(matches!(b.complete(&h, &CompletionRequest::new("p", 0.0)), Err(BackendError::UnknownHandle(_))));
        let scripted = ModelHandle::new(BackendKind::Scripted, "ft-mem-0");
        assert!(a.complete(&scripted, &CompletionRequest::new("p", 0.0)).is_err());
    }

    #[test]
    fn sampling_picks_among_top_three() {
        let b = MemorizerBackend::new(7);
        let train: Vec<_> = (0..6).map(|i| ex(&format!("a b c{i}"), &format!("{i}@@@"))).collect();
        let h = b.fine_tune(&train, &spec()).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..60 {
            seen.insert(b.complete(&h, &CompletionRequest::new("a b z", 1.0)).unwrap().text);
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec!["0", "1", "2"]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let run = || {
            let b = MemorizerBackend::new(3);
            let train: Vec<_> = (0..6).map(|i| ex(&format!("a b c{i}"), &format!("{i}@@@"))).collect();
            let h = b.fine_tune(&train, &spec()).unwrap();
            (0..20).map(|_| b.complete(&h, &CompletionRequest::new("a b", 0.75)).unwrap().text).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn continuation_layers_tables() {
        let b = MemorizerBackend::new(0);
        let pre = b.fine_tune(&[ex("p1", "old@@@"), ex("p2", "pre@@@")], &FineTuneSpec::new(2, "mem")).unwrap();
        let h = b.continue_fine_tune(&pre, &[ex("p1", "new@@@")], &FineTuneSpec::new(5, "mem")).unwrap();
        let ex = b.examples(&h).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(b.complete(&h, &CompletionRequest::new("p1", 0.0)).unwrap().text, "new");
        assert_eq!(b.complete(&h, &CompletionRequest::new("p2", 0.0)).unwrap().text, "pre");
        assert_eq!(h.jobs.iter().map(|j| j.epochs).collect::<Vec<_>>(), vec![2, 5]);
        assert_eq!(h.jobs[1].base_model, pre.model_id);
    }

    #[test]
    fn base_model_reads_context() {
        let b = MemorizerBackend::new(0);
        let h = b.base_model("gpt").unwrap();
        let prompt = "x=1###A@@@x=2###B@@@x=2###";
        assert_eq!(b.complete(&h, &CompletionRequest::new(prompt, 0.0)).unwrap().text, "B");
        let none = b.complete(&h, &CompletionRequest::new("x=2###", 0.0)).unwrap();
        assert_eq!(none, Completion { text: String::new(), stopped: false });
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mem.json");
        let b = MemorizerBackend::new(5);
        let h = b.fine_tune(&[ex("p", "c@@@")], &spec()).unwrap();
        b.save(&path).unwrap();
        let loaded = MemorizerBackend::load(&path).unwrap();
        let h2: ModelHandle = serde_json::from_str(&serde_json::to_string(&h).unwrap()).unwrap();
        assert_eq!(loaded.complete(&h2, &CompletionRequest::new("p", 0.0)).unwrap().text, "c");
    }
}
