//! Core building blocks for language-interfaced fine-tuning experiments.
//!
//! Tabular datasets are turned into prompt/completion sentences, completions
//! coming back from a language model are parsed into labels or numbers, and the
//! surrounding machinery (synthetic data, perturbations, reference learners and
//! metrics) lives alongside so the whole protocol can run offline.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod data;
pub mod eval;
pub mod exec;
pub mod image;
pub mod parse;
pub mod perturb;
pub mod prompts;
pub mod rng;
pub mod synth;

pub use data::{FeatureSchema, SplitSpec, TabularDataset, TargetColumn, TargetRef, Targets, TaskKind};
pub use exec::Exec;
pub use parse::{Prediction, PredictionValue, RetryPolicy};
pub use prompts::{NamingMode, PromptTemplate, PromptedExample};
