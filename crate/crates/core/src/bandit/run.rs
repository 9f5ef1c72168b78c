use std::fmt;
use std::io::{self, Write};

use rand::Rng;

use crate::error::Result;
use crate::fair_csc::{concentration_radius, FairCscConfig};
use crate::metrics::{hypothesis_losses, mix, GapFunctional};
use crate::types::{
    Dataset, HypothesisClass, Label, MixturePolicy, Population, TabularDistribution,
};

use super::history::{apple_to_bandit_loss, History, RoundRecord};
use super::qweights::QWeights;
use super::schedule::{mu_schedule, EpochMode, Schedule};
use super::solver::{coordinate_descent, CdReport, SolveContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Explore,
    Exploit,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Explore => "explore",
            Phase::Exploit => "exploit",
        })
    }
}

/// One line of the per-round trace. `true_policy_loss` and `true_gap` are
/// exact values of the deployed randomized classifier under the
/// generating distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub round: usize,
    pub phase: Phase,
    pub mu_t: f64,
    pub num_q_atoms: usize,
    pub cd_iterations: usize,
    pub oracle_calls: usize,
    pub action: Label,
    pub propensity: f64,
    pub bandit_loss: f64,
    pub true_policy_loss: f64,
    pub true_gap: f64,
}

pub fn write_trace_csv<W: Write>(mut out: W, rows: &[TraceRow]) -> io::Result<()> {
    writeln!(
        out,
        "round,phase,mu_t,num_Q_atoms,cd_iterations,oracle_calls,action,propensity,bandit_loss,true_policy_loss,true_gap"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.round,
            r.phase,
            r.mu_t,
            r.num_q_atoms,
            r.cd_iterations,
            r.oracle_calls,
            r.action,
            r.propensity,
            r.bandit_loss,
            r.true_policy_loss,
            r.true_gap
        )?;
    }
    Ok(())
}

/// A policy deployed over the inclusive round range.
#[derive(Debug, Clone, PartialEq)]
pub struct Deployment {
    pub first_round: usize,
    pub last_round: usize,
    pub policy: MixturePolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub history: History,
    pub exploration: Dataset,
    pub deployments: Vec<Deployment>,
    pub t0: usize,
    /// Concentration radius of the exploration sample; zero if phase two
    /// never starts.
    pub beta: f64,
    pub solves: usize,
    pub oracle_calls: usize,
}

impl RunOutput {
    pub fn losses(&self) -> Vec<f64> {
        self.trace.iter().map(|r| r.true_policy_loss).collect()
    }

    pub fn max_abs_gap(&self) -> f64 {
        self.trace
            .iter()
            .map(|r| r.true_gap.abs())
            .fold(0.0, f64::max)
    }

    /// `(round, deployed policy)` for every round.
    pub fn trajectory(&self) -> impl Iterator<Item = (usize, &MixturePolicy)> {
        self.deployments
            .iter()
            .flat_map(|d| (d.first_round..=d.last_round).map(move |r| (r, &d.policy)))
    }
}

/// What an observer sees after every phase-two solve.
pub struct SolveSnapshot<'a> {
    pub round: usize,
    pub t_phase2: usize,
    pub history: &'a History,
    pub ctx: &'a SolveContext<'a>,
    pub report: &'a CdReport,
}

/// Exact loss and gap of deployed mixtures, from per-hypothesis tables.
pub(crate) struct TrueEvaluator {
    losses: Vec<f64>,
    gaps: Vec<f64>,
}

impl TrueEvaluator {
    pub(crate) fn new(
        d: &TabularDistribution,
        class: &HypothesisClass,
        f: crate::types::RateFunctional,
    ) -> Result<Self> {
        let masses = d.cell_masses()?;
        Ok(Self {
            losses: hypothesis_losses(class, &masses),
            gaps: GapFunctional::new(&masses, f)?.hypothesis_gaps(class),
        })
    }

    pub(crate) fn eval(&self, pi: &MixturePolicy) -> (f64, f64) {
        (mix(pi, &self.losses), mix(pi, &self.gaps))
    }
}

pub(crate) fn push_deployment(deps: &mut Vec<Deployment>, round: usize, pi: &MixturePolicy) {
    if let Some(last) = deps.last_mut() {
        if last.last_round + 1 == round && &last.policy == pi {
            last.last_round = round;
            return;
        }
    }
    deps.push(Deployment {
        first_round: round,
        last_round: round,
        policy: pi.clone(),
    });
}

/// Plays the all-positive classifier for the exploration rounds, recording
/// every label. Shared by the learner and the explore-then-exploit baseline.
pub(crate) fn explore<R: Rng + ?Sized>(
    d: &TabularDistribution,
    class: &HypothesisClass,
    rounds: usize,
    eval: &TrueEvaluator,
    rng: &mut R,
    out: &mut RunOutput,
    mut fold: Option<&mut History>,
) -> Result<()> {
    let plus = MixturePolicy::pure(class.plus_index());
    let (loss, gap) = eval.eval(&plus);
    for round in 1..=rounds {
        let ex = d.sample(rng);
        out.exploration.push(ex);
        let bandit_loss = apple_to_bandit_loss(Label::Pos, Some(ex.label))?;
        if let Some(h) = fold.as_deref_mut() {
            h.push(RoundRecord {
                round,
                context: ex.context,
                group: ex.group,
                action: Label::Pos,
                propensity: 1.0,
                observed_bandit_loss: bandit_loss,
                raw_label_observed: Some(ex.label),
            })?;
        }
        out.trace.push(TraceRow {
            round,
            phase: Phase::Explore,
            mu_t: 0.0,
            num_q_atoms: 0,
            cd_iterations: 0,
            oracle_calls: 0,
            action: Label::Pos,
            propensity: 1.0,
            bandit_loss,
            true_policy_loss: loss,
            true_gap: gap,
        });
        push_deployment(&mut out.deployments, round, &plus);
    }
    Ok(())
}

pub fn run<R: Rng + ?Sized>(
    d: &TabularDistribution,
    class: &HypothesisClass,
    schedule: &Schedule,
    rng: &mut R,
) -> Result<RunOutput> {
    run_with_observer(d, class, schedule, rng, &mut |_| {})
}

/// The full learner. `observer` is called after every phase-two solve.
pub fn run_with_observer<R: Rng + ?Sized>(
    d: &TabularDistribution,
    class: &HypothesisClass,
    schedule: &Schedule,
    rng: &mut R,
    observer: &mut dyn FnMut(&SolveSnapshot),
) -> Result<RunOutput> {
    schedule.validate()?;
    let f = schedule.functional;
    let eval = TrueEvaluator::new(d, class, f)?;
    let t0 = schedule.resolve_t0(class.len());
    let mut out = RunOutput {
        trace: Vec::with_capacity(schedule.horizon),
        history: History::new(d.num_contexts()),
        exploration: Dataset::empty(d.num_contexts()),
        deployments: Vec::new(),
        t0,
        beta: 0.0,
        solves: 0,
        oracle_calls: 0,
    };
    let mut history = History::new(d.num_contexts());
    explore(
        d,
        class,
        t0,
        &eval,
        rng,
        &mut out,
        schedule.fold_exploration.then_some(&mut history),
    )?;
    if t0 == schedule.horizon {
        out.history = history;
        return Ok(out);
    }

    let constraint = GapFunctional::from_population(&out.exploration, f)?;
    out.beta = concentration_radius(&out.exploration, class.len(), schedule.delta, f)?;
    let fair = FairCscConfig {
        gamma: schedule.gamma + out.beta,
        nu: schedule.nu,
        dual_bound: schedule.dual_bound,
        functional: f,
        tighten: true,
    };
    fair.validate()?;
    let ctx = SolveContext {
        class,
        constraint: &constraint,
        fair,
        horizon: schedule.horizon,
    };

    let mut q = QWeights::new(MixturePolicy::pure(class.plus_index()), class);
    let mut mu = schedule.mu_max;
    let mut smoothed = q.smoothed(mu, true);
    let mut deployed = q.deployed_mixture(class, mu);
    let mut truth = eval.eval(&deployed);

    for t in 1..=schedule.horizon - t0 {
        let round = t0 + t;
        let resolve = match schedule.epoch_mode {
            EpochMode::EveryRound => true,
            EpochMode::Doubling => t.is_power_of_two(),
        };
        let (mut cd_iterations, mut oracle_calls) = (0, 0);
        if resolve {
            mu = mu_schedule(t, schedule, class.len());
            let warm = if schedule.warm_start { Some(&q) } else { None };
            let report = coordinate_descent(&history, &ctx, mu, warm)?;
            observer(&SolveSnapshot {
                round,
                t_phase2: t,
                history: &history,
                ctx: &ctx,
                report: &report,
            });
            cd_iterations = report.iterations;
            oracle_calls = report.oracle_calls;
            out.solves += 1;
            out.oracle_calls += oracle_calls;
            q = report.q;
            smoothed = q.smoothed(mu, true);
            deployed = q.deployed_mixture(class, mu);
            truth = eval.eval(&deployed);
        }

        let ex = d.sample(rng);
        let cell = ex.cell();
        let action = if rng.gen::<f64>() < 2.0 * mu {
            if rng.gen_bool(0.5) {
                Label::Pos
            } else {
                Label::Neg
            }
        } else {
            class.get(q.sample_hypothesis(rng)).predict_cell(cell)
        };
        let propensity = smoothed.prob(cell, action);
        let observed = (action == Label::Pos).then_some(ex.label);
        let bandit_loss = apple_to_bandit_loss(action, observed)?;
        history.push(RoundRecord {
            round,
            context: ex.context,
            group: ex.group,
            action,
            propensity,
            observed_bandit_loss: bandit_loss,
            raw_label_observed: observed,
        })?;
        out.trace.push(TraceRow {
            round,
            phase: Phase::Exploit,
            mu_t: mu,
            num_q_atoms: q.atoms().len(),
            cd_iterations,
            oracle_calls,
            action,
            propensity,
            bandit_loss,
            true_policy_loss: truth.0,
            true_gap: truth.1,
        });
        push_deployment(&mut out.deployments, round, &deployed);
    }
    out.history = history;
    Ok(out)
}
