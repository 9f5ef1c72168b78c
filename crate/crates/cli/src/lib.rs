//! Experiment configuration, replicated runs and result files for the
//! `fairtaste` command-line tool.

// NaN-rejecting checks read as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod slope;

pub use config::{Algorithm, ExperimentConfig, InstanceSource, LowerBoundSide, Origin};
pub use error::{CliError, Result};
pub use experiment::{
    curve_rounds, load_instance, run_algorithm, run_experiment, run_experiment_with,
    workers_from_env, CurvePoint, LoadedInstance, Outcome, RunSummary, Summary, WORKERS_ENV,
};
pub use slope::{regret_slope, SlopeFit, SlopePoint};
