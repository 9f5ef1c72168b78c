//! The two-phase online learner.
//!
//! Phase one deploys the all-positive classifier for `T0` rounds, which
//! reveals every label and yields an i.i.d. sample for the fairness
//! constraint. Phase two treats apple tasting as a two-action contextual
//! bandit: each round solves a coordinate-descent feasibility program over
//! empirically fair policies and deploys a smoothed mixture of them.

mod history;
mod qweights;
pub(crate) mod run;
mod schedule;
mod solver;

pub use history::{apple_to_bandit_loss, ips_loss, History, RoundRecord};
pub use qweights::{smoothed_prob, QAtom, QWeights, SmoothedTable};
pub use run::{
    run, run_with_observer, write_trace_csv, Deployment, Phase, RunOutput, SolveSnapshot, TraceRow,
};
pub use schedule::{mu_schedule, EpochMode, Schedule};
pub use solver::{
    amo_argmax_violation, approx_best_policy, bonus_scale, coordinate_descent, epsilon_t,
    iteration_cap, lambda_slack, potential, regret_and_bonus, variance_deviation_bound,
    variance_stats, CdReport, SolveContext,
};
