//! Prompt/completion serialization.
//!
//! A training sample becomes
//!
//! ```text
//! When we have x1=1.5, x2=2, what should be y?###   <- prompt
//!  y=3@@@                                           <- completion
//! ```
//!
//! Feature-named variants swap `xi` for real names (optionally shuffled), or
//! fill a free-form sentence template. Queries are the prompt alone.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureSchema, TabularDataset, TargetRef};
use crate::rng;

pub const DEFAULT_QA_SEPARATOR: &str = "###";
pub const DEFAULT_END_TOKEN: &str = "@@@";
pub const DEFAULT_DECIMALS: usize = 2;
/// Prefix of every answer; the leading space is part of the completion.
pub const ANSWER_PREFIX: &str = " y=";

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("naming mode requires feature names in the schema")]
    MissingNames,
    #[error("sentence template placeholders do not match the features: {0}")]
    TemplateHoleMismatch(String),
    #[error("row has {got} features, schema has {expected}")]
    RowLength { expected: usize, got: usize },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("label {0:?} cannot be serialized safely")]
    BadLabel(String),
    #[error("query alone ({query} chars) exceeds the budget of {max} chars")]
    QueryTooLong { query: usize, max: usize },
    #[error("value {value} outside the encoding range [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
    #[error("malformed level code {0:?}")]
    MalformedCode(String),
    #[error("invalid level encoding: {0}")]
    InvalidEncoding(String),
    #[error("pixel value {0} outside [0, 255]")]
    BadPixelRange(i64),
    #[error("expected {expected} pixels, got {got}")]
    BadPixelCount { expected: usize, got: usize },
    #[error("digit must be 0-9, got {0}")]
    BadDigit(u8),
    #[error("malformed JSONL on line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, PromptError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NamingMode {
    /// `x1=…, x2=…`
    Generic,
    /// Generic names with the alternative question wording.
    WithoutNamesAlt,
    CorrectNamesList,
    CorrectNamesSentence {
        sentence_template: String,
    },
    /// One fixed permutation of names for the whole dataset.
    ShuffledNamesList {
        shuffle_seed: u64,
    },
    ShuffledNamesSentence {
        shuffle_seed: u64,
        sentence_template: String,
    },
}

impl NamingMode {
    fn needs_names(&self) -> bool {
        !matches!(self, NamingMode::Generic | NamingMode::WithoutNamesAlt)
    }

    fn sentence_template(&self) -> Option<&str> {
        match self {
            NamingMode::CorrectNamesSentence { sentence_template }
            | NamingMode::ShuffledNamesSentence { sentence_template, .. } => Some(sentence_template),
            _ => None,
        }
    }

    fn shuffle_seed(&self) -> Option<u64> {
        match self {
            NamingMode::ShuffledNamesList { shuffle_seed } | NamingMode::ShuffledNamesSentence { shuffle_seed, .. } => {
                Some(*shuffle_seed)
            }
            _ => None,
        }
    }
}

fn default_qa() -> String {
    DEFAULT_QA_SEPARATOR.into()
}
fn default_end() -> String {
    DEFAULT_END_TOKEN.into()
}
fn default_decimals() -> usize {
    DEFAULT_DECIMALS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    #[serde(default = "default_naming")]
    pub naming: NamingMode,
    #[serde(default = "default_qa")]
    pub qa_separator: String,
    #[serde(default = "default_end")]
    pub end_token: String,
    #[serde(default = "default_decimals")]
    pub decimals: usize,
    /// Question closing the list forms. `{target}` expands to the target name.
    /// `None` picks the mode's default wording.
    #[serde(default)]
    pub question_suffix: Option<String>,
}

fn default_naming() -> NamingMode {
    NamingMode::Generic
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate {
            naming: NamingMode::Generic,
            qa_separator: default_qa(),
            end_token: default_end(),
            decimals: DEFAULT_DECIMALS,
            question_suffix: None,
        }
    }
}

impl PromptTemplate {
    pub fn with_naming(mut self, naming: NamingMode) -> Self {
        self.naming = naming;
        self
    }

    pub fn with_decimals(mut self, decimals: usize) -> Self {
        self.decimals = decimals;
        self
    }

    pub fn with_question_suffix(mut self, suffix: impl Into<String>) -> Self {
        self.question_suffix = Some(suffix.into());
        self
    }

    fn validate(&self) -> Result<()> {
        let number_like = |s: &str| s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == '-');
        for (what, s) in [("qa_separator", &self.qa_separator), ("end_token", &self.end_token)] {
            if s.is_empty() {
                return Err(PromptError::InvalidTemplate(format!("{what} is empty")));
            }
            if number_like(s) {
                return Err(PromptError::InvalidTemplate(format!("{what} {s:?} can occur inside a number")));
            }
        }
        if self.qa_separator == self.end_token {
            return Err(PromptError::InvalidTemplate("qa_separator equals end_token".into()));
        }
        Ok(())
    }

    /// Resolves names, permutation and sentence holes against `schema`, and
    /// rejects labels that would not survive a serialize/parse round trip.
    pub fn bind(&self, schema: &FeatureSchema, label_set: &[String]) -> Result<BoundTemplate> {
        self.validate()?;
        for label in label_set {
            if label.is_empty()
                || label.trim() != label
                || label.contains(&self.qa_separator)
                || label.contains(&self.end_token)
            {
                return Err(PromptError::BadLabel(label.clone()));
            }
        }
        let names: Vec<String> = if self.naming.needs_names() {
            let names = schema.names.clone().ok_or(PromptError::MissingNames)?;
            if names.len() != schema.p {
                return Err(PromptError::MissingNames);
            }
            names
        } else {
            (1..=schema.p).map(|i| format!("x{i}")).collect()
        };
        // slot_names[i] is the name printed next to feature i's value
        let slot_names = match self.naming.shuffle_seed() {
            Some(seed) => {
                let perm = derangement(names.len(), seed);
                perm.iter().map(|&j| names[j].clone()).collect()
            }
            None => names.clone(),
        };
        let target_name = schema.target_name.clone();
        let sentence = match self.naming.sentence_template() {
            Some(t) => Some(SentenceTemplate::parse(t, &names)?),
            None => None,
        };
        let suffix = match &self.question_suffix {
            Some(s) => s.clone(),
            None => match (&self.naming, &target_name) {
                (NamingMode::Generic, _) => "what should be y?".into(),
                (NamingMode::WithoutNamesAlt, _) => "what should be y value?".into(),
                (_, Some(_)) => "how is the {target}?".into(),
                (_, None) => "what should be y?".into(),
            },
        };
        let suffix = suffix.replace("{target}", target_name.as_deref().unwrap_or("y"));
        Ok(BoundTemplate {
            template: self.clone(),
            p: schema.p,
            names,
            slot_names,
            target_name,
            value_labels: schema.value_labels.iter().map(|(k, v)| (*k, v.clone())).collect(),
            sentence,
            suffix,
        })
    }
}

/// Random permutation of `0..n` without fixed points when `n >= 2`.
pub fn derangement(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng::seeded(rng::derive(seed, "names"));
    let mut perm: Vec<usize> = (0..n).collect();
    if n < 2 {
        return perm;
    }
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, &j)| i != j) {
            return perm;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Text(String),
    Feature(usize),
    Target,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct SentenceTemplate {
    pieces: Vec<Piece>,
}

impl SentenceTemplate {
    /// Placeholders are `{feature name}` and `{target}`. Every feature must be
    /// referenced and every placeholder must name a feature or the target.
    fn parse(src: &str, names: &[String]) -> Result<Self> {
        let mut pieces = Vec::new();
        let mut seen = HashSet::new();
        let mut rest = src;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                pieces.push(Piece::Text(rest[..open].to_string()));
            }
            let close = rest[open..]
                .find('}')
                .map(|c| open + c)
                .ok_or_else(|| PromptError::TemplateHoleMismatch("unclosed '{'".into()))?;
            let key = &rest[open + 1..close];
            if let Some(i) = names.iter().position(|n| n == key) {
                seen.insert(i);
                pieces.push(Piece::Feature(i));
            } else if key == "target" {
                pieces.push(Piece::Target);
            } else {
                return Err(PromptError::TemplateHoleMismatch(format!("unknown placeholder {{{key}}}")));
            }
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            pieces.push(Piece::Text(rest.to_string()));
        }
        if seen.len() != names.len() {
            let missing: Vec<&str> =
                (0..names.len()).filter(|i| !seen.contains(i)).map(|i| names[i].as_str()).collect();
            return Err(PromptError::TemplateHoleMismatch(format!("no placeholder for {missing:?}")));
        }
        Ok(SentenceTemplate { pieces })
    }
}

/// Shortest fixed-point rendering with at most `decimals` digits: trailing
/// zeros and a bare decimal point are dropped, `-0` prints as `0`.
pub fn format_number(v: f64, decimals: usize) -> String {
    let mut s = format!("{v:.decimals$}");
    if s.contains('.') {
        let trimmed = s.trim_end_matches('0').trim_end_matches('.').len();
        s.truncate(trimmed);
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PromptedExample {
    pub prompt: String,
    pub completion: String,
}

/// A template resolved against one schema and label space.
#[derive(Debug, Clone)]
pub struct BoundTemplate {
    template: PromptTemplate,
    p: usize,
    names: Vec<String>,
    slot_names: Vec<String>,
    target_name: Option<String>,
    value_labels: Vec<(usize, Vec<String>)>,
    sentence: Option<SentenceTemplate>,
    suffix: String,
}

impl BoundTemplate {
    pub fn template(&self) -> &PromptTemplate {
        &self.template
    }

    /// Names shown next to each feature value, after any shuffling.
    pub fn slot_names(&self) -> &[String] {
        &self.slot_names
    }

    fn render_value(&self, feature: usize, v: f64) -> String {
        if let Some((_, labels)) = self.value_labels.iter().find(|(k, _)| *k == feature) {
            if v.fract() == 0.0 && v >= 0.0 && (v as usize) < labels.len() {
                return labels[v as usize].clone();
            }
        }
        format_number(v, self.template.decimals)
    }

    pub fn query(&self, row: &[f64]) -> Result<String> {
        if row.len() != self.p {
            return Err(PromptError::RowLength { expected: self.p, got: row.len() });
        }
        let sep = &self.template.qa_separator;
        if let Some(sentence) = &self.sentence {
            // value i fills the placeholder of slot_names[i]
            let mut by_placeholder = vec![String::new(); self.p];
            for (i, &v) in row.iter().enumerate() {
                let slot = self.names.iter().position(|n| *n == self.slot_names[i]).unwrap();
                by_placeholder[slot] = self.render_value(i, v);
            }
            let mut out = String::new();
            for piece in &sentence.pieces {
                match piece {
                    Piece::Text(t) => out.push_str(t),
                    Piece::Feature(j) => out.push_str(&by_placeholder[*j]),
                    Piece::Target => out.push_str(self.target_name.as_deref().unwrap_or("y")),
                }
            }
            out.push_str(sep);
            return Ok(out);
        }
        let mut out = String::from("When we have ");
        for (i, &v) in row.iter().enumerate() {
            out.push_str(&self.slot_names[i]);
            out.push('=');
            out.push_str(&self.render_value(i, v));
            out.push_str(", ");
        }
        out.push_str(&self.suffix);
        out.push_str(sep);
        Ok(out)
    }

    pub fn completion(&self, target: TargetRef<'_>) -> String {
        let t = match target {
            TargetRef::Label(l) => l.to_string(),
            TargetRef::Value(v) => format_number(v, self.template.decimals),
        };
        format!("{ANSWER_PREFIX}{t}{}", self.template.end_token)
    }

    pub fn example(&self, row: &[f64], target: TargetRef<'_>) -> Result<PromptedExample> {
        Ok(PromptedExample { prompt: self.query(row)?, completion: self.completion(target) })
    }

    pub fn dataset(&self, ds: &TabularDataset) -> Result<Vec<PromptedExample>> {
        (0..ds.n()).map(|i| self.example(&ds.rows()[i], ds.target(i))).collect()
    }
}

pub fn serialize_example(
    row: &[f64],
    target: TargetRef<'_>,
    schema: &FeatureSchema,
    tpl: &PromptTemplate,
) -> Result<PromptedExample> {
    let labels: Vec<String> = match target {
        TargetRef::Label(l) => vec![l.to_string()],
        TargetRef::Value(_) => vec![],
    };
    tpl.bind(schema, &labels)?.example(row, target)
}

pub fn serialize_query(row: &[f64], schema: &FeatureSchema, tpl: &PromptTemplate) -> Result<String> {
    tpl.bind(schema, &[])?.query(row)
}

pub fn serialize_dataset(ds: &TabularDataset, tpl: &PromptTemplate) -> Result<Vec<PromptedExample>> {
    tpl.bind(ds.schema(), ds.label_set())?.dataset(ds)
}

/// Greedily prepends whole examples, in order, while the total stays within
/// `max_chars` (counted in characters). Returns the prompt and the number of
/// examples used.
pub fn build_incontext_prompt(examples: &[PromptedExample], query: &str, max_chars: usize) -> Result<(String, usize)> {
    let qlen = query.chars().count();
    if qlen > max_chars {
        return Err(PromptError::QueryTooLong { query: qlen, max: max_chars });
    }
    let mut used = 0;
    let mut total = qlen;
    let mut out = String::new();
    for ex in examples {
        let len = ex.prompt.chars().count() + ex.completion.chars().count();
        if total + len > max_chars {
            break;
        }
        total += len;
        out.push_str(&ex.prompt);
        out.push_str(&ex.completion);
        used += 1;
    }
    out.push_str(query);
    Ok((out, used))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEncoding {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl LevelEncoding {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let e = LevelEncoding { lo, hi, bins };
        e.validate()?;
        Ok(e)
    }

    fn validate(&self) -> Result<()> {
        if self.bins == 0 || !(self.lo < self.hi) {
            return Err(PromptError::InvalidEncoding(format!("{self:?}")));
        }
        Ok(())
    }

    fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    /// Bins are half-open except the last, which includes `hi`.
    pub fn bin_index(&self, y: f64) -> Result<usize> {
        self.validate()?;
        if !(y >= self.lo && y <= self.hi) {
            return Err(PromptError::OutOfRange { value: y, lo: self.lo, hi: self.hi });
        }
        let k = ((y - self.lo) / self.width()).floor() as usize;
        Ok(k.min(self.bins - 1))
    }
}

/// Thermometer code of length `bins - 1`: bin k has its last k characters set.
pub fn encode_level(y: f64, enc: &LevelEncoding) -> Result<String> {
    let k = enc.bin_index(y)?;
    let len = enc.bins - 1;
    Ok("0".repeat(len - k) + &"1".repeat(k))
}

/// Midpoint of the bin a code denotes.
pub fn decode_level(code: &str, enc: &LevelEncoding) -> Result<f64> {
    enc.validate()?;
    let bad = || PromptError::MalformedCode(code.to_string());
    if code.len() != enc.bins - 1 || !code.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(bad());
    }
    let k = code.bytes().filter(|&b| b == b'1').count();
    if !code.ends_with(&"1".repeat(k)) {
        return Err(bad());
    }
    Ok(enc.lo + (k as f64 + 0.5) * enc.width())
}

pub const IMAGE_PIXELS: usize = 324;
pub const IMAGE_HALF: usize = 162;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImagePrompt {
    /// Training pair: digit prompt, all pixels as completion.
    Example(PromptedExample),
    /// Test prompt, possibly seeded with the first half of an image.
    Query(String),
}

/// Prompt for digit-conditioned image generation. With `include_count = 0`
/// and pixels present this is a training pair; with no pixels it is the bare
/// generation query; with `include_count = 162` the first half of the pixels
/// follow the separator and the model completes the rest.
pub fn serialize_image_generation(digit: u8, pixels: Option<&[i64]>, include_count: usize) -> Result<ImagePrompt> {
    if digit > 9 {
        return Err(PromptError::BadDigit(digit));
    }
    if let Some(px) = pixels {
        if px.len() != IMAGE_PIXELS {
            return Err(PromptError::BadPixelCount { expected: IMAGE_PIXELS, got: px.len() });
        }
        if let Some(&v) = px.iter().find(|v| !(0..=255).contains(*v)) {
            return Err(PromptError::BadPixelRange(v));
        }
    }
    let prompt = format!("Generate an image of digit {digit}.{DEFAULT_QA_SEPARATOR}");
    let join = |px: &[i64]| px.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    match (include_count, pixels) {
        (0, None) => Ok(ImagePrompt::Query(prompt)),
        (0, Some(px)) => {
            Ok(ImagePrompt::Example(PromptedExample { prompt, completion: format!("{}{DEFAULT_END_TOKEN}", join(px)) }))
        }
        (IMAGE_HALF, Some(px)) => Ok(ImagePrompt::Query(format!("{prompt} {}", join(&px[..IMAGE_HALF])))),
        (IMAGE_HALF, None) => Err(PromptError::BadPixelCount { expected: IMAGE_PIXELS, got: 0 }),
        (other, _) => Err(PromptError::InvalidTemplate(format!("include_count must be 0 or 162, got {other}"))),
    }
}

/// One `{"prompt":…,"completion":…}` object per line, `\n` terminated.
pub fn write_jsonl<W: Write>(examples: &[PromptedExample], mut w: W) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn to_jsonl(examples: &[PromptedExample]) -> String {
    let mut buf = Vec::new();
    write_jsonl(examples, &mut buf).expect("writing to a Vec");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictExample {
    prompt: String,
    completion: String,
}

/// Parses JSONL with exactly the `prompt` and `completion` fields per line.
/// Blank lines are skipped.
pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<PromptedExample>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| PromptError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: StrictExample =
            serde_json::from_str(&line).map_err(|e| PromptError::Jsonl { line: i + 1, message: e.to_string() })?;
        out.push(PromptedExample { prompt: ex.prompt, completion: ex.completion });
    }
    Ok(out)
}

pub fn parse_jsonl(s: &str) -> Result<Vec<PromptedExample>> {
    read_jsonl(s.as_bytes())
}
