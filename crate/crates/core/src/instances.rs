//! Instance generators, the brute-force fair benchmark, and the
//! explore-then-exploit baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bandit::run::{explore, push_deployment, Phase, RunOutput, TraceRow, TrueEvaluator};
use crate::bandit::{apple_to_bandit_loss, History, RoundRecord};
use crate::error::{Error, Result};
use crate::fair_csc::concentration_radius;
use crate::metrics::{hypothesis_losses, GapFunctional};
use crate::types::{
    Context, Dataset, Group, Hypothesis, HypothesisClass, Label, MixturePolicy, Population,
    RateFunctional, TabularDistribution,
};

/// Tolerance on `|gap| ≤ γ` when checking closed-form pair endpoints.
const BRUTE_TOL: f64 = 1e-12;

/// Two distributions that differ only in group `+1`'s label rates at the
/// first two contexts, and a class in which the better of two accurate
/// classifiers is exactly fair on one distribution and `4γ`-unfair on the
/// other.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundPair {
    pub d1: TabularDistribution,
    pub d2: TabularDistribution,
    pub class: HypothesisClass,
    pub gamma: f64,
}

impl LowerBoundPair {
    pub fn h1_index(&self) -> usize {
        self.class.position_of_tag("h1").expect("h1 present")
    }

    pub fn h2_index(&self) -> usize {
        self.class.position_of_tag("h2").expect("h2 present")
    }
}

/// Four contexts with equal mass per cell; `γ ∈ (0, 1/8)` keeps every
/// label rate in `[0, 1]`.
pub fn lowerbound_pair(gamma: f64) -> Result<LowerBoundPair> {
    if !(gamma > 0.0 && gamma < 0.125) {
        return Err(Error::InvalidConfig(format!(
            "gamma = {gamma} must lie in (0, 1/8)"
        )));
    }
    let hi = 0.5 + 4.0 * gamma;
    let lo = 0.5 - 4.0 * gamma;
    let minus_row = [hi, lo, 1.0, 0.0];
    let plus_row_d1 = [lo, hi, 1.0, 0.0];
    let table = |plus_row: [f64; 4]| {
        let mut pos = Vec::with_capacity(8);
        for x in 0..4 {
            pos.push(minus_row[x]);
            pos.push(plus_row[x]);
        }
        TabularDistribution::new(4, vec![0.125; 8], pos)
    };
    let d1 = table(plus_row_d1)?;
    let d2 = table(minus_row)?;

    let h1_row = [Label::Pos, Label::Neg, Label::Pos, Label::Neg];
    let h2_plus_row = [Label::Neg, Label::Pos, Label::Pos, Label::Neg];
    let h1 = Hypothesis::from_fn(4, Some("h1"), |x, _| h1_row[x.0]);
    let h2 = Hypothesis::from_fn(4, Some("h2"), |x, g| match g {
        Group::Minus => h1_row[x.0],
        Group::Plus => h2_plus_row[x.0],
    });
    let class =
        HypothesisClass::with_specials(4, vec![Hypothesis::minus(4), Hypothesis::plus(4), h1, h2])?;
    Ok(LowerBoundPair {
        d1,
        d2,
        class,
        gamma,
    })
}

fn bernoulli_kl(p: f64, q: f64) -> f64 {
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    term(p, q) + term(1.0 - p, 1.0 - q)
}

/// `Σ_{(x,a)} Pr[(x,a)] · KL(Bern(p₁(x,a)) ‖ Bern(p₂(x,a)))` in nats, for
/// distributions sharing their marginal over cells.
pub fn kl_divergence(d1: &TabularDistribution, d2: &TabularDistribution) -> Result<f64> {
    if d1.num_contexts() != d2.num_contexts() || d1.mass() != d2.mass() {
        return Err(Error::InvalidDistribution(
            "KL needs distributions with identical cell masses".into(),
        ));
    }
    let mut kl = 0.0;
    for (cell, (&m, (&p, &q))) in d1
        .mass()
        .iter()
        .zip(d1.pos_rate().iter().zip(d2.pos_rate()))
        .enumerate()
    {
        if m == 0.0 || p == q {
            continue;
        }
        if q == 0.0 || q == 1.0 {
            return Err(Error::AbsoluteContinuity { cell });
        }
        kl += m * bernoulli_kl(p, q);
    }
    Ok(kl)
}

/// The best `γ`-fair policy of support at most two, by enumeration of all
/// single hypotheses and pairs with closed-form optimal weights. Ties go
/// to the smaller loss, then the lexicographically first pair (a single
/// `h` counts as the pair `(h, h)`).
pub fn brute_force_best_fair<P: Population + ?Sized>(
    p: &P,
    class: &HypothesisClass,
    gamma: f64,
    f: RateFunctional,
) -> Result<(MixturePolicy, f64)> {
    let masses = p.cell_masses()?;
    let losses = hypothesis_losses(class, &masses);
    let gaps = GapFunctional::new(&masses, f)?.hypothesis_gaps(class);
    brute_force_over(&losses, &gaps, gamma).ok_or(Error::NoFeasibleSupport)
}

/// Enumeration core over per-hypothesis losses and gaps.
pub fn brute_force_over(losses: &[f64], gaps: &[f64], gamma: f64) -> Option<(MixturePolicy, f64)> {
    let n = losses.len();
    let mut best: Option<(f64, usize, usize, f64)> = None;
    let mut offer = |loss: f64, i: usize, j: usize, w: f64| match best {
        Some((b, ..)) if loss >= b => {}
        _ => best = Some((loss, i, j, w)),
    };
    for i in 0..n {
        for j in i..n {
            if i == j {
                if gaps[i].abs() <= gamma + BRUTE_TOL {
                    offer(losses[i], i, i, 1.0);
                }
                continue;
            }
            // weight w on i: gap(w) = gaps[j] + w (gaps[i] - gaps[j])
            let slope = gaps[i] - gaps[j];
            let (lo, hi) = if slope == 0.0 {
                if gaps[j].abs() > gamma + BRUTE_TOL {
                    continue;
                }
                (0.0, 1.0)
            } else {
                let a = (gamma - gaps[j]) / slope;
                let b = (-gamma - gaps[j]) / slope;
                (a.min(b).max(0.0), a.max(b).min(1.0))
            };
            if lo > hi {
                continue;
            }
            for w in [lo, hi] {
                offer(losses[j] + w * (losses[i] - losses[j]), i, j, w);
            }
        }
    }
    let (loss, i, j, w) = best?;
    let pi = if i == j || w >= 1.0 {
        MixturePolicy::pure(i)
    } else if w <= 0.0 {
        MixturePolicy::pure(j)
    } else {
        MixturePolicy::new(vec![(i, w), (j, 1.0 - w)]).ok()?
    };
    Some((pi, loss))
}

/// Plays plus for `⌈T^{2/3}⌉` rounds, then commits to the empirically best
/// `(γ + β)`-fair policy on the exploration sample.
pub fn explore_then_exploit<R: Rng + ?Sized>(
    d: &TabularDistribution,
    class: &HypothesisClass,
    horizon: usize,
    gamma: f64,
    delta: f64,
    f: RateFunctional,
    rng: &mut R,
) -> Result<RunOutput> {
    let eval = TrueEvaluator::new(d, class, f)?;
    let t0 = ((horizon as f64).powf(2.0 / 3.0).ceil() as usize).min(horizon);
    let mut out = RunOutput {
        trace: Vec::with_capacity(horizon),
        history: History::new(d.num_contexts()),
        exploration: Dataset::empty(d.num_contexts()),
        deployments: Vec::new(),
        t0,
        beta: 0.0,
        solves: 0,
        oracle_calls: 0,
    };
    explore(d, class, t0, &eval, rng, &mut out, None)?;
    if t0 == horizon {
        return Ok(out);
    }
    out.beta = concentration_radius(&out.exploration, class.len(), delta, f)?;
    let (policy, _) = brute_force_best_fair(&out.exploration, class, gamma + out.beta, f)?;
    out.solves = 1;
    let (loss, gap) = eval.eval(&policy);
    for round in t0 + 1..=horizon {
        let ex = d.sample(rng);
        let cell = ex.cell();
        let action = class.get(policy.sample(rng)).predict_cell(cell);
        let observed = (action == Label::Pos).then_some(ex.label);
        let bandit_loss = apple_to_bandit_loss(action, observed)?;
        let propensity = policy.prob(class, cell, action);
        out.history.push(RoundRecord {
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
            mu_t: 0.0,
            num_q_atoms: policy.support_size(),
            cd_iterations: 0,
            oracle_calls: 0,
            action,
            propensity,
            bandit_loss,
            true_policy_loss: loss,
            true_gap: gap,
        });
        push_deployment(&mut out.deployments, round, &policy);
    }
    Ok(out)
}

/// Deploys the all-positive classifier every round. Every label is seen,
/// so the trace carries the exploration phase throughout.
pub fn constant_plus<R: Rng + ?Sized>(
    d: &TabularDistribution,
    class: &HypothesisClass,
    horizon: usize,
    f: RateFunctional,
    rng: &mut R,
) -> Result<RunOutput> {
    let eval = TrueEvaluator::new(d, class, f)?;
    let mut out = RunOutput {
        trace: Vec::with_capacity(horizon),
        history: History::new(d.num_contexts()),
        exploration: Dataset::empty(d.num_contexts()),
        deployments: Vec::new(),
        t0: 0,
        beta: 0.0,
        solves: 0,
        oracle_calls: 0,
    };
    explore(d, class, horizon, &eval, rng, &mut out, None)?;
    Ok(out)
}

/// Attempts allowed when rejection-sampling distributions.
pub const REJECTION_BUDGET: usize = 10_000;

/// Random tabular distribution with `Pr[a = j, y = −1] ≥ min_negative_mass`
/// for both groups, and `num_hypotheses` uniformly random classifiers
/// (deduplicated, with the special classifiers appended).
pub fn random_tabular(
    num_contexts: usize,
    num_hypotheses: usize,
    seed: u64,
    min_negative_mass: f64,
) -> Result<(TabularDistribution, HypothesisClass)> {
    if num_contexts == 0 {
        return Err(Error::InvalidConfig("num_contexts must be >= 1".into()));
    }
    if !(min_negative_mass > 0.0 && min_negative_mass < 0.5) {
        return Err(Error::InvalidConfig(format!(
            "min_negative_mass = {min_negative_mass} must lie in (0, 0.5)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = num_contexts * 2;
    let mut found = None;
    for _ in 0..REJECTION_BUDGET {
        let raw: Vec<f64> = (0..cells).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = raw.iter().sum();
        let mass: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let pos: Vec<f64> = (0..cells).map(|_| rng.gen::<f64>()).collect();
        let ok = Group::BOTH.iter().all(|g| {
            (0..num_contexts)
                .map(|x| {
                    let c = x * 2 + g.index();
                    mass[c] * (1.0 - pos[c])
                })
                .sum::<f64>()
                >= min_negative_mass
        });
        if ok {
            found = Some((mass, pos));
            break;
        }
    }
    let (mass, pos) = found.ok_or(Error::RejectionBudget(REJECTION_BUDGET))?;
    let d = TabularDistribution::new(num_contexts, mass, pos)?;
    let hypotheses: Vec<Hypothesis> = (0..num_hypotheses)
        .map(|i| {
            let tag = format!("r{i}");
            let labels: Vec<Label> = (0..cells)
                .map(|_| {
                    if rng.gen_bool(0.5) {
                        Label::Pos
                    } else {
                        Label::Neg
                    }
                })
                .collect();
            Hypothesis::from_fn(num_contexts, Some(&tag), |x: Context, g| {
                labels[x.0 * 2 + g.index()]
            })
        })
        .collect();
    let class = HypothesisClass::with_specials(num_contexts, hypotheses)?;
    Ok((d, class))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{delta_rate, true_policy_loss};

    #[test]
    fn range_check() {
        assert!(lowerbound_pair(0.0).is_err());
        assert!(lowerbound_pair(0.125).is_err());
        assert!(lowerbound_pair(0.1).is_ok());
    }

    #[test]
    fn d1_table_entries() {
        let g = 0.05;
        let lb = lowerbound_pair(g).unwrap();
        let f = RateFunctional::FalsePositive;
        let eval = |d: &TabularDistribution, i: usize| {
            let pi = MixturePolicy::pure(i);
            (
                true_policy_loss(&pi, &lb.class, d).unwrap(),
                delta_rate(&pi, &lb.class, d, f).unwrap(),
            )
        };
        let (l1, g1) = eval(&lb.d1, lb.h1_index());
        let (l2, g2) = eval(&lb.d1, lb.h2_index());
        assert!((l1 - 0.25).abs() < 1e-12 && (g1 - 4.0 * g).abs() < 1e-12);
        assert!((l2 - (0.25 - 2.0 * g)).abs() < 1e-12 && g2.abs() < 1e-12);
        for i in [lb.class.plus_a_index(), lb.class.minus_a_index()] {
            let (l, _) = eval(&lb.d1, i);
            assert!((l - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn kl_examples() {
        let lb = lowerbound_pair(0.1).unwrap();
        assert!((kl_divergence(&lb.d1, &lb.d2).unwrap() - 0.2 * 9f64.ln()).abs() < 1e-12);
        assert_eq!(kl_divergence(&lb.d1, &lb.d1).unwrap(), 0.0);
        let hard = TabularDistribution::new(1, vec![0.5, 0.5], vec![0.0, 0.5]).unwrap();
        let soft = TabularDistribution::new(1, vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        assert_eq!(
            kl_divergence(&soft, &hard),
            Err(Error::AbsoluteContinuity { cell: 0 })
        );
        assert!(kl_divergence(&hard, &soft).is_ok());
    }

    #[test]
    fn brute_force_benchmarks() {
        let lb = lowerbound_pair(0.05).unwrap();
        let f = RateFunctional::FalsePositive;
        let (pi, loss) = brute_force_best_fair(&lb.d1, &lb.class, 0.0, f).unwrap();
        assert_eq!(pi, MixturePolicy::pure(lb.h2_index()));
        assert!((loss - 0.15).abs() < 1e-12);
        let (pi, _) = brute_force_best_fair(&lb.d1, &lb.class, 1.0, f).unwrap();
        assert_eq!(pi, MixturePolicy::pure(lb.h2_index()));
        // on D₂ the roles swap: h1 is fair and better
        let (pi, loss) = brute_force_best_fair(&lb.d2, &lb.class, 0.0, f).unwrap();
        assert_eq!(pi, MixturePolicy::pure(lb.h1_index()));
        assert!((loss - 0.15).abs() < 1e-12);
    }

    #[test]
    fn brute_force_pair_interior() {
        let (pi, loss) = brute_force_over(&[0.1, 0.3, 0.6], &[0.4, 0.0, -0.4], 0.2).unwrap();
        assert_eq!(pi.atoms(), &[(0, 0.5), (1, 0.5)]);
        assert!((loss - 0.2).abs() < 1e-12);
    }

    #[test]
    fn random_instances() {
        let (d, class) = random_tabular(3, 5, 11, 0.1).unwrap();
        for g in Group::BOTH {
            assert!(d.negative_mass(g) >= 0.1);
        }
        assert!(class.len() >= 4);
        assert_eq!(random_tabular(3, 5, 11, 0.1).unwrap(), (d, class));
        assert_eq!(
            random_tabular(1, 2, 0, 0.499).unwrap_err(),
            Error::RejectionBudget(REJECTION_BUDGET)
        );
    }
}
