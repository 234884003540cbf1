//! Configuration, replicated experiments and outputs for `ergolevy`.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod registry;

pub use config::{Document, ExperimentConfig, MeasureSpec};
pub use error::{HarnessError, Result};
pub use experiment::{
    aggregate, clt_diagnostic, fit_rate_slope, run_experiment, AggregatePoint, AggregateRecord, CltReport, Experiment,
    ExperimentOutcome, SchemeRuns, SlopeFit,
};
