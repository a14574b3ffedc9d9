//! Completion parsing and the retry-with-escalating-temperature protocol.

use serde::{Deserialize, Serialize};

use crate::data::TaskKind;

/// Why a completion could not be turned into a prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    NoEndToken,
    NumericParse,
    LabelMismatch,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionValue {
    Value(f64),
    Label(String),
}

impl PredictionValue {
    pub fn as_label(&self) -> Option<&str> {
        match self {
            PredictionValue::Label(l) => Some(l),
            PredictionValue::Value(_) => None,
        }
    }

    pub fn as_value(&self) -> Option<f64> {
        match self {
            PredictionValue::Value(v) => Some(*v),
            PredictionValue::Label(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseContext {
    pub task: TaskKind,
    pub label_set: Vec<String>,
    pub end_token: String,
    /// Map unmatched outputs to the nearest label by edit distance.
    #[serde(default)]
    pub fuzzy_labels: bool,
}

impl ParseContext {
    pub fn new(task: TaskKind, label_set: &[String], end_token: &str) -> Self {
        ParseContext { task, label_set: label_set.to_vec(), end_token: end_token.to_string(), fuzzy_labels: false }
    }

    pub fn parse(&self, text: &str) -> Result<PredictionValue, InvalidReason> {
        let body = answer_body(text, &self.end_token)?;
        match self.task {
            TaskKind::Classification => {
                if let Some(l) = self.label_set.iter().find(|l| *l == body) {
                    return Ok(PredictionValue::Label(l.clone()));
                }
                if self.fuzzy_labels {
                    if let Some(l) = closest_label(body, &self.label_set) {
                        return Ok(PredictionValue::Label(l.to_string()));
                    }
                }
                Err(InvalidReason::LabelMismatch)
            }
            TaskKind::Regression => match body.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(PredictionValue::Value(v)),
                _ => Err(InvalidReason::NumericParse),
            },
        }
    }
}

/// Text before the first end token, trimmed, with an optional `y=` removed.
fn answer_body<'a>(text: &'a str, end_token: &str) -> Result<&'a str, InvalidReason> {
    let (head, _) = text.split_once(end_token).ok_or(InvalidReason::NoEndToken)?;
    let head = head.trim();
    let head = head.strip_prefix("y=").map(str::trim).unwrap_or(head);
    if head.is_empty() {
        return Err(InvalidReason::Empty);
    }
    Ok(head)
}

pub fn parse_completion(
    text: &str,
    task: TaskKind,
    label_set: &[String],
    end_token: &str,
) -> Result<PredictionValue, InvalidReason> {
    ParseContext::new(task, label_set, end_token).parse(text)
}

fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.chars().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != *cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn closest_label<'a>(s: &str, labels: &'a [String]) -> Option<&'a str> {
    labels.iter().enumerate().min_by_key(|(i, l)| (levenshtein(s, l), *i)).map(|(_, l)| l.as_str())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_attempts: usize,
    pub escalation_temperature: f64,
    pub initial_temperature: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 5, escalation_temperature: 0.75, initial_temperature: 0.0 }
    }
}

impl RetryPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_attempts == 0 {
            return Err("max_attempts must be at least 1".into());
        }
        for t in [self.initial_temperature, self.escalation_temperature] {
            if !(0.0..=2.0).contains(&t) {
                return Err(format!("temperature {t} outside [0, 2]"));
            }
        }
        Ok(())
    }

    /// Temperature of the `attempt`-th try (0-based): the first try runs at the
    /// initial temperature, every later one at the escalation temperature.
    pub fn temperature(&self, attempt: usize) -> f64 {
        if attempt == 0 {
            self.initial_temperature
        } else {
            self.escalation_temperature
        }
    }
}

/// Anything that can complete a prompt at a temperature. Returned text must
/// still carry the end token when generation terminated normally.
pub trait CompletionSource {
    type Error;

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, Self::Error>;
}

impl<S: CompletionSource + ?Sized> CompletionSource for &S {
    type Error = S::Error;

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, Self::Error> {
        (**self).complete(prompt, temperature)
    }
}

/// Adapts a closure into a [`CompletionSource`].
pub struct FnSource<F>(pub F);

impl<F, E> CompletionSource for FnSource<F>
where
    F: Fn(&str, f64) -> Result<String, E>,
{
    type Error = E;

    fn complete(&self, prompt: &str, temperature: f64) -> Result<String, E> {
        (self.0)(prompt, temperature)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: PredictionValue,
    pub valid: bool,
    pub attempts: usize,
    pub used_fallback: bool,
    pub raw_texts: Vec<String>,
    pub temperatures: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invalid_reasons: Vec<InvalidReason>,
}

impl Prediction {
    /// A prediction that never reached the model (e.g. the prompt could not
    /// be built).
    pub fn fallback_only(fallback: PredictionValue) -> Self {
        Prediction {
            value: fallback,
            valid: false,
            attempts: 0,
            used_fallback: true,
            raw_texts: Vec::new(),
            temperatures: Vec::new(),
            invalid_reasons: Vec::new(),
        }
    }
}

/// Queries `source` until a completion parses, escalating the temperature
/// after the first failure. After `max_attempts` invalid completions the
/// fallback is returned with `valid = false`. Backend errors abort at once.
pub fn infer_with_retry<S: CompletionSource>(
    source: &S,
    prompt: &str,
    policy: &RetryPolicy,
    ctx: &ParseContext,
    fallback: &PredictionValue,
) -> Result<Prediction, S::Error> {
    let mut raw_texts = Vec::new();
    let mut temperatures = Vec::new();
    let mut invalid_reasons = Vec::new();
    for attempt in 0..policy.max_attempts.max(1) {
        let t = policy.temperature(attempt);
        let text = source.complete(prompt, t)?;
        let parsed = ctx.parse(&text);
        raw_texts.push(text);
        temperatures.push(t);
        match parsed {
            Ok(value) => {
                return Ok(Prediction {
                    value,
                    valid: true,
                    attempts: attempt + 1,
                    used_fallback: false,
                    raw_texts,
                    temperatures,
                    invalid_reasons,
                })
            }
            Err(reason) => invalid_reasons.push(reason),
        }
    }
    Ok(Prediction {
        value: fallback.clone(),
        valid: false,
        attempts: raw_texts.len(),
        used_fallback: true,
        raw_texts,
        temperatures,
        invalid_reasons,
    })
}
