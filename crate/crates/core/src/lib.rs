//! Fair online classification under apple-tasting feedback.
//!
//! A learner sees a context and a protected group each round and predicts a
//! label; the true label is revealed only after a positive prediction. The
//! learner must keep every deployed randomized classifier within a bound
//! on the gap in group-conditional false positive rates (or another
//! equalized rate), while achieving low regret against the best such
//! classifier.
//!
//! Modules, bottom up:
//!
//! - [`types`]: cells, distributions, hypotheses, mixtures, datasets;
//! - [`metrics`]: exact and empirical rates, losses, regret, fairness audits;
//! - [`csc`]: the exact cost-sensitive classification oracle;
//! - [`fair_csc`]: CSC under an empirical fairness constraint;
//! - [`bandit`]: the two-phase learner;
//! - [`instances`]: lower-bound and random instances, brute-force benchmark,
//!   and the explore-then-exploit baseline;
//! - [`io`]: the text format for distributions and hypothesis classes.

// NaN-rejecting checks read as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod csc;
pub mod error;
pub mod fair_csc;
pub mod instances;
pub mod io;
pub mod metrics;
pub mod types;

pub use error::{Error, Result};
pub use types::*;

pub use bandit::{run, EpochMode, History, QWeights, RoundRecord, RunOutput, Schedule, TraceRow};
pub use csc::{exact_csc, CscInstance, CscRow, WeightedInstance};
pub use fair_csc::{fair_csc_oracle, FairCscConfig, SaddleResult};
pub use instances::{brute_force_best_fair, lowerbound_pair, LowerBoundPair};
pub use metrics::{FairnessAuditRecord, GapFunctional};
