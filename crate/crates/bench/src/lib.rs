//! Fixtures shared by the criterion benches.

use fairtaste_core::bandit::{apple_to_bandit_loss, History, RoundRecord};
use fairtaste_core::csc::{CscInstance, CscRow};
use fairtaste_core::fair_csc::concentration_radius;
use fairtaste_core::instances::{lowerbound_pair, random_tabular};
use fairtaste_core::{
    Context, Dataset, FairCscConfig, GapFunctional, Group, HypothesisClass, Label, RateFunctional,
    TabularDistribution,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random class, a fairness constraint from 200 samples, and a random
/// CSC instance with `rows` rows.
pub fn csc_fixture(
    contexts: usize,
    hypotheses: usize,
    rows: usize,
    seed: u64,
) -> (HypothesisClass, GapFunctional, CscInstance) {
    let (d, class) = random_tabular(contexts, hypotheses, seed, 0.1).expect("random instance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample =
        Dataset::new(contexts, (0..200).map(|_| d.sample(&mut rng)).collect()).expect("dataset");
    let constraint =
        GapFunctional::from_population(&sample, RateFunctional::FalsePositive).expect("constraint");
    let rows = (0..rows)
        .map(|_| CscRow {
            context: Context(rng.gen_range(0..contexts)),
            group: if rng.gen_bool(0.5) {
                Group::Plus
            } else {
                Group::Minus
            },
            cost_neg: rng.gen_range(-1.0..1.0),
            cost_pos: rng.gen_range(-1.0..1.0),
        })
        .collect();
    (
        class,
        constraint,
        CscInstance::new(rows).expect("csc instance"),
    )
}

/// Phase-two state on the lower-bound instance: a uniform-logging history
/// of `rounds` rounds, the empirical constraint and its FairCSC config.
pub struct SolveFixture {
    pub distribution: TabularDistribution,
    pub class: HypothesisClass,
    pub constraint: GapFunctional,
    pub fair: FairCscConfig,
    pub history: History,
}

pub fn solve_fixture(rounds: usize, horizon: usize, seed: u64) -> SolveFixture {
    let lb = lowerbound_pair(0.1).expect("lower-bound instance");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exploration =
        Dataset::new(4, (0..1000).map(|_| lb.d1.sample(&mut rng)).collect()).expect("dataset");
    let constraint = GapFunctional::from_population(&exploration, RateFunctional::FalsePositive)
        .expect("constraint");
    let beta = concentration_radius(
        &exploration,
        lb.class.len(),
        0.05,
        RateFunctional::FalsePositive,
    )
    .expect("beta");
    let mut history = History::new(4);
    for round in 1..=rounds {
        let e = lb.d1.sample(&mut rng);
        let action = if rng.gen_bool(0.5) {
            Label::Pos
        } else {
            Label::Neg
        };
        let observed = (action == Label::Pos).then_some(e.label);
        history
            .push(RoundRecord {
                round,
                context: e.context,
                group: e.group,
                action,
                propensity: 0.5,
                observed_bandit_loss: apple_to_bandit_loss(action, observed).expect("loss"),
                raw_label_observed: observed,
            })
            .expect("record");
    }
    SolveFixture {
        distribution: lb.d1,
        class: lb.class,
        constraint,
        fair: FairCscConfig::new(0.1 + beta, 1.0 / horizon as f64),
        history,
    }
}
