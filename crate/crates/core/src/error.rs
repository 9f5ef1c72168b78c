use thiserror::Error;

use crate::types::{Group, RateFunctional};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("context {context} out of range (num_contexts = {num_contexts})")]
    ContextOutOfRange { context: usize, num_contexts: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid hypothesis class: {0}")]
    InvalidHypothesisClass(String),

    #[error("invalid mixture policy: {0}")]
    InvalidPolicy(String),

    #[error("conditioning event for {functional:?} on group {group} has zero mass")]
    EmptyConditioningEvent {
        functional: RateFunctional,
        group: Group,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("history is empty")]
    EmptyHistory,

    #[error("all example weights are zero; every hypothesis is optimal")]
    DegenerateWeights,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no feasible policy within the support of the input mixture")]
    NoFeasibleSupport,

    #[error("coordinate descent exceeded its iteration cap ({cap}); diagnostics: {dump}")]
    IterationCap { cap: usize, dump: String },

    #[error("rejection sampling exhausted after {0} attempts")]
    RejectionBudget(usize),

    #[error("absolute continuity violated at cell {cell}")]
    AbsoluteContinuity { cell: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
