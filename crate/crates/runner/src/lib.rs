//! Experiment orchestration for language-interfaced fine-tuning: config
//! loading, the split/serialize/fine-tune/predict/score pipeline, sweeps and
//! report tables.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod reference;
pub mod report;

pub use config::{ExperimentConfig, Mode};
pub use error::RunnerError;
pub use pipeline::{run, run_in_context, sample_complexity_sweep, BackendFactory, ExperimentResult};
pub use report::{emit_report, ReportFormat};
