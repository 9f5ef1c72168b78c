//! The per-round optimization problem: find a sub-distribution `Q` over
//! empirically fair policies with small estimated regret and bounded
//! inverse-propensity variance for every fair policy.

use std::f64::consts::E;

use crate::csc::CellCosts;
use crate::error::{Error, Result};
use crate::fair_csc::{fair_csc_solve, FairCscConfig};
use crate::metrics::GapFunctional;
use crate::types::{HypothesisClass, Label, MixturePolicy};

use super::history::History;
use super::qweights::{QWeights, SmoothedTable};

/// Everything a solve needs besides the history and `μ_t`.
#[derive(Debug, Clone, Copy)]
pub struct SolveContext<'a> {
    pub class: &'a HypothesisClass,
    /// Empirical gap functional on the exploration sample.
    pub constraint: &'a GapFunctional,
    /// FairCSC settings at the phase-two level `γ + β`.
    pub fair: FairCscConfig,
    pub horizon: usize,
}

/// `4(e − 2) μ ln T`, the divisor turning regret into the variance bonus.
pub fn bonus_scale(mu: f64, horizon: usize) -> f64 {
    4.0 * (E - 2.0) * mu * (horizon as f64).ln()
}

/// `Λ_t = ν / (4(e − 2) μ² ln T)`.
pub fn lambda_slack(nu: f64, mu: f64, horizon: usize) -> f64 {
    nu / (bonus_scale(mu, horizon) * mu)
}

/// Safety cap on coordinate-descent iterations, `16 (4/μ²) ln(1/μ)`.
pub fn iteration_cap(mu: f64) -> usize {
    ((64.0 / (mu * mu)) * (1.0 / mu).ln()).ceil().max(64.0) as usize
}

/// `1000 ln(|H|² T² / δ) / √t`; reported only.
pub fn epsilon_t(h_size: usize, horizon: usize, delta: f64, t: usize) -> f64 {
    let h = h_size as f64;
    let tt = horizon as f64;
    1000.0 * (h * h * tt * tt / delta).ln() / (t as f64).sqrt()
}

/// Right-hand side `6.4 V̂ + 162.6` of the empirical-to-true variance
/// deviation inequality; reported only.
pub fn variance_deviation_bound(v_hat: f64) -> f64 {
    6.4 * v_hat + 162.6
}

/// `(max{L̂(π) − L̂(π₀), 0}, that / (4(e−2) μ ln T))`.
pub fn regret_and_bonus(
    pi: &MixturePolicy,
    pi0: &MixturePolicy,
    class: &HypothesisClass,
    h: &History,
    mu: f64,
    horizon: usize,
) -> Result<(f64, f64)> {
    if h.is_empty() {
        return Ok((0.0, 0.0));
    }
    let reg = (super::ips_loss(pi, class, h)? - super::ips_loss(pi0, class, h)?).max(0.0);
    Ok((reg, reg / bonus_scale(mu, horizon)))
}

/// `(V, S)` for a policy given by its per-cell `Pr[π = +1]`.
pub(crate) fn stats_from(sm: &SmoothedTable, pi_pos: &[f64], h: &History) -> (f64, f64) {
    let t = h.len() as f64;
    let (mut v, mut s) = (0.0, 0.0);
    for (c, &p) in pi_pos.iter().enumerate() {
        let n = h.cell_count(c);
        if n == 0 {
            continue;
        }
        let (qp, qn) = (sm.pos[c], sm.neg[c]);
        let n = n as f64;
        v += n * (p / qp + (1.0 - p) / qn);
        s += n * (p / (qp * qp) + (1.0 - p) / (qn * qn));
    }
    (v / t, s / t)
}

/// `V_π(Q) = E_{x∼H}[Σ_ŷ Pr[π(x)=ŷ] / Q^μ(ŷ|x)]` and the same with squared
/// propensities, `Q` filled by its anchor.
pub fn variance_stats(
    q: &QWeights,
    pi: &MixturePolicy,
    class: &HypothesisClass,
    h: &History,
    mu: f64,
) -> Result<(f64, f64)> {
    if h.is_empty() {
        return Err(Error::EmptyHistory);
    }
    pi.check_indices(class)?;
    Ok(stats_from(
        &q.smoothed(mu, true),
        &pi.positive_table(class),
        h,
    ))
}

/// Calls FairCSC with an accuracy fine enough that its additive cost
/// guarantee `4ν Σ|Δc|` is at most `target`.
fn fair_call(costs: &CellCosts, ctx: &SolveContext, target: f64) -> Result<(MixturePolicy, usize)> {
    let inst = costs.to_instance();
    let spread = inst.total_abs_difference();
    let mut cfg = ctx.fair;
    if spread > 0.0 {
        cfg.nu = cfg.nu.min(target / (4.0 * spread));
    }
    let out = fair_csc_solve(&inst, ctx.constraint, ctx.class, &cfg)?;
    Ok((out.policy, out.saddle.oracle_calls))
}

/// `π₀`: a fair policy whose IPS loss is within `ν/μ` of the best fair
/// policy. Returns the policy and the CSC calls spent.
pub fn approx_best_policy(
    h: &History,
    ctx: &SolveContext,
    mu: f64,
) -> Result<(MixturePolicy, usize)> {
    if h.is_empty() {
        return Ok((MixturePolicy::pure(ctx.class.plus_index()), 0));
    }
    let t = h.len() as f64;
    let mut costs = CellCosts::zeros(ctx.class.num_cells());
    for c in 0..costs.neg.len() {
        costs.neg[c] = h.ips_sum(c, Label::Neg) / t;
        costs.pos[c] = h.ips_sum(c, Label::Pos) / t;
    }
    fair_call(&costs, ctx, ctx.fair.nu / (2.0 * mu))
}

/// The fair policy approximately maximizing
/// `V_π(Q) − 4 − (L̂(π) − L̂(π₀)) / (4(e−2) μ ln T)`, a linear upper bound
/// on the violation `D̃_π(Q)` that agrees with it whenever `π` does not
/// beat `π₀`. `Q` is the unfilled sub-distribution.
pub fn amo_argmax_violation(
    q: &QWeights,
    h: &History,
    ctx: &SolveContext,
    mu: f64,
) -> Result<(MixturePolicy, usize)> {
    if h.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let sm = q.smoothed(mu, false);
    let k = bonus_scale(mu, ctx.horizon);
    let t = h.len() as f64;
    let mut costs = CellCosts::zeros(ctx.class.num_cells());
    for c in 0..costs.neg.len() {
        let n = h.cell_count(c) as f64;
        costs.neg[c] = -(n / sm.neg[c] - h.ips_sum(c, Label::Neg) / k) / t;
        costs.pos[c] = -(n / sm.pos[c] - h.ips_sum(c, Label::Pos) / k) / t;
    }
    fair_call(
        &costs,
        ctx,
        lambda_slack(ctx.fair.nu, mu, ctx.horizon) / 2.0,
    )
}

/// `RE(U ‖ q)` for the uniform distribution on two actions against a
/// possibly unnormalized `q`.
fn relative_entropy_uniform(qp: f64, qn: f64) -> f64 {
    0.5 * (0.5 / qp).ln() + qp - 0.5 + 0.5 * (0.5 / qn).ln() + qn - 0.5
}

fn phi(q: &QWeights, bonus: &[f64], h: &History, mu: f64) -> f64 {
    let sm = q.smoothed(mu, false);
    let t = h.len() as f64;
    let mut re = 0.0;
    for c in 0..sm.pos.len() {
        let n = h.cell_count(c);
        if n > 0 {
            re += n as f64 * relative_entropy_uniform(sm.pos[c], sm.neg[c]);
        }
    }
    let b: f64 = q.atoms().iter().zip(bonus).map(|(a, b)| a.weight * b).sum();
    re / t / (1.0 - 2.0 * mu) + b / 4.0
}

/// Coordinate-descent potential
/// `Φ(Q) = E_H[RE(U ‖ Q^μ(·|x))]/(1 − 2μ) + ∫Q b̃ / 4` over the unfilled `Q`.
pub fn potential(
    q: &QWeights,
    class: &HypothesisClass,
    h: &History,
    mu: f64,
    horizon: usize,
) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::EmptyHistory);
    }
    let l0 = super::ips_loss(q.anchor(), class, h)?;
    let k = bonus_scale(mu, horizon);
    let bonus: Vec<f64> = q
        .atoms()
        .iter()
        .map(|a| (h.ips_from_table(a.positive_table()) - l0).max(0.0) / k)
        .collect();
    Ok(phi(q, &bonus, h, mu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdReport {
    /// Atoms before the anchor fill; the anchor is `π₀`.
    pub q: QWeights,
    pub mu: f64,
    pub pi0_loss: f64,
    pub iterations: usize,
    pub updates: usize,
    pub rescales: usize,
    pub oracle_calls: usize,
    /// `Φ` before minus after, per weight update.
    pub potential_drops: Vec<f64>,
    /// Guaranteed decrease `(V + D̃)² / (16 (1 − 2μ) S)` per weight update.
    pub drop_guarantees: Vec<f64>,
    /// `Φ` after minus before, per rescale (never positive up to rounding).
    pub rescale_changes: Vec<f64>,
    /// `D̃` of the policy on which the descent halted.
    pub final_violation: f64,
}

/// Solves the feasibility program for `μ < 1/2` from zero (or from
/// `warm`), with `π₀` recomputed from the history.
pub fn coordinate_descent(
    h: &History,
    ctx: &SolveContext,
    mu: f64,
    warm: Option<&QWeights>,
) -> Result<CdReport> {
    if !(mu > 0.0 && mu < 0.5) {
        return Err(Error::Contract(format!(
            "coordinate descent needs 0 < mu < 0.5, got {mu}"
        )));
    }
    let class = ctx.class;
    let (pi0, mut oracle_calls) = approx_best_policy(h, ctx, mu)?;
    let mut q = match warm {
        Some(w) => w.clone().with_anchor(pi0.clone(), class),
        None => QWeights::new(pi0.clone(), class),
    };
    let mut report = CdReport {
        q: q.clone(),
        mu,
        pi0_loss: 0.0,
        iterations: 0,
        updates: 0,
        rescales: 0,
        oracle_calls,
        potential_drops: Vec::new(),
        drop_guarantees: Vec::new(),
        rescale_changes: Vec::new(),
        final_violation: 0.0,
    };
    if h.is_empty() {
        return Ok(report);
    }

    let l0 = h.ips_from_table(&pi0.positive_table(class));
    let k = bonus_scale(mu, ctx.horizon);
    let bonus_of = |pos: &[f64]| (h.ips_from_table(pos) - l0).max(0.0) / k;
    let mut bonus: Vec<f64> = q
        .atoms()
        .iter()
        .map(|a| bonus_of(a.positive_table()))
        .collect();
    let cap = iteration_cap(mu);
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        if iterations > cap {
            return Err(Error::IterationCap {
                cap,
                dump: format!(
                    "mu={mu}, t={}, atoms={}, total_weight={}, updates={}, rescales={}",
                    h.len(),
                    q.atoms().len(),
                    q.total_weight(),
                    report.updates,
                    report.rescales
                ),
            });
        }

        let mass: f64 = q
            .atoms()
            .iter()
            .zip(&bonus)
            .map(|(a, b)| a.weight * (4.0 + b))
            .sum();
        if mass > 4.0 * (1.0 + 1e-12) {
            let before = phi(&q, &bonus, h, mu);
            q.scale(4.0 / mass);
            let after = phi(&q, &bonus, h, mu);
            debug_assert!(after <= before + 1e-9, "rescale raised the potential");
            report.rescale_changes.push(after - before);
            report.rescales += 1;
        }

        let (pi, calls) = amo_argmax_violation(&q, h, ctx, mu)?;
        oracle_calls += calls;
        let pos = pi.positive_table(class);
        let (v, s) = stats_from(&q.smoothed(mu, false), &pos, h);
        let b = bonus_of(&pos);
        let violation = v - 4.0 - b;
        if violation <= 0.0 {
            report.final_violation = violation;
            break;
        }
        let alpha = (v + violation) / (2.0 * (1.0 - 2.0 * mu) * s);
        let before = phi(&q, &bonus, h, mu);
        let idx = q.add(&pi, alpha, class);
        if idx == bonus.len() {
            bonus.push(b);
        }
        let after = phi(&q, &bonus, h, mu);
        let guarantee = (v + violation).powi(2) / (16.0 * (1.0 - 2.0 * mu) * s);
        debug_assert!(
            before - after >= guarantee - 1e-9,
            "update decreased the potential too little"
        );
        report.potential_drops.push(before - after);
        report.drop_guarantees.push(guarantee);
        report.updates += 1;
    }

    report.q = q;
    report.pi0_loss = l0;
    report.iterations = iterations;
    report.oracle_calls = oracle_calls;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{apple_to_bandit_loss, RoundRecord};
    use crate::types::{Context, Dataset, Example, Group, Hypothesis, RateFunctional};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (HypothesisClass, GapFunctional) {
        let h = Hypothesis::from_fn(
            2,
            Some("h"),
            |x, _| if x.0 == 0 { Label::Pos } else { Label::Neg },
        );
        let class = HypothesisClass::with_specials(2, vec![h]).unwrap();
        let mut ex = Vec::new();
        for x in 0..2 {
            for g in Group::BOTH {
                ex.push(Example::new(Context(x), g, Label::Neg));
                ex.push(Example::new(Context(x), g, Label::Pos));
            }
        }
        let s = Dataset::new(2, ex).unwrap();
        let cons = GapFunctional::from_population(&s, RateFunctional::FalsePositive).unwrap();
        (class, cons)
    }

    fn uniform_history(n: usize, seed: u64) -> History {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hist = History::new(2);
        for r in 1..=n {
            let x = Context(rng.gen_range(0..2));
            let g = if rng.gen_bool(0.5) {
                Group::Plus
            } else {
                Group::Minus
            };
            let y = if rng.gen_bool(if x.0 == 0 { 0.8 } else { 0.2 }) {
                Label::Pos
            } else {
                Label::Neg
            };
            let a = if rng.gen_bool(0.5) {
                Label::Pos
            } else {
                Label::Neg
            };
            let obs = (a == Label::Pos).then_some(y);
            hist.push(RoundRecord {
                round: r,
                context: x,
                group: g,
                action: a,
                propensity: 0.5,
                observed_bandit_loss: apple_to_bandit_loss(a, obs).unwrap(),
                raw_label_observed: obs,
            })
            .unwrap();
        }
        hist
    }

    #[test]
    fn bonus_arithmetic() {
        let t = (10f64).exp().round() as usize;
        let k = bonus_scale(0.1, t);
        let expected = 0.2 / (4.0 * (E - 2.0) * 0.1 * (t as f64).ln());
        assert!((0.2 / k - expected).abs() < 1e-15);
        let (class, _) = setup();
        let hist = uniform_history(50, 1);
        let pi = MixturePolicy::pure(class.plus_index());
        assert_eq!(
            regret_and_bonus(&pi, &pi, &class, &hist, 0.1, 100).unwrap(),
            (0.0, 0.0)
        );
    }

    #[test]
    fn uniform_smoothing_gives_two_and_four() {
        let (class, _) = setup();
        let hist = uniform_history(30, 2);
        let q = QWeights::new(MixturePolicy::pure(class.plus_index()), &class);
        for i in 0..class.len() {
            let (v, s) = variance_stats(&q, &MixturePolicy::pure(i), &class, &hist, 0.5).unwrap();
            assert!((v - 2.0).abs() < 1e-12 && (s - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_matches_direct_sum() {
        let (class, _) = setup();
        let hist = uniform_history(40, 3);
        let mut q = QWeights::new(MixturePolicy::pure(class.plus_index()), &class);
        q.add(&MixturePolicy::pure(class.minus_a_index()), 0.4, &class);
        let pi = MixturePolicy::new(vec![(0, 0.3), (2, 0.7)]).unwrap();
        let mu = 0.1;
        let (v, s) = variance_stats(&q, &pi, &class, &hist, mu).unwrap();
        let (mut dv, mut ds) = (0.0, 0.0);
        for r in hist.records() {
            for y in Label::BOTH {
                let p = pi.prob(&class, r.cell(), y);
                let qm = crate::bandit::smoothed_prob(&q, r.cell(), y, mu);
                dv += p / qm;
                ds += p / (qm * qm);
            }
        }
        let n = hist.len() as f64;
        assert!((v - dv / n).abs() < 1e-12);
        assert!((s - ds / n).abs() < 1e-12);
        assert!(v >= 1.0);
    }

    #[test]
    fn descent_from_empty_history_is_point_mass() {
        let (class, cons) = setup();
        let ctx = SolveContext {
            class: &class,
            constraint: &cons,
            fair: FairCscConfig::new(0.3, 0.01),
            horizon: 1000,
        };
        let r = coordinate_descent(&History::new(2), &ctx, 0.25, None).unwrap();
        assert!(r.q.atoms().is_empty());
        assert_eq!(r.q.anchor(), &MixturePolicy::pure(class.plus_index()));
    }

    #[test]
    fn descent_meets_constraints_and_derived_decrease() {
        let (class, cons) = setup();
        let ctx = SolveContext {
            class: &class,
            constraint: &cons,
            fair: FairCscConfig::new(0.3, 0.01),
            horizon: 1000,
        };
        let hist = uniform_history(200, 4);
        for mu in [0.05, 0.1, 0.2] {
            let r = coordinate_descent(&hist, &ctx, mu, None).unwrap();
            let lam = lambda_slack(ctx.fair.nu, mu, ctx.horizon);
            let k = bonus_scale(mu, ctx.horizon);
            let mass: f64 = r
                .q
                .atoms()
                .iter()
                .map(|a| {
                    a.weight
                        * (4.0
                            + (hist.ips_from_table(a.positive_table()) - r.pi0_loss).max(0.0) / k)
                })
                .sum();
            assert!(mass <= 4.0 + lam + 1e-6);
            for (d, g) in r.potential_drops.iter().zip(&r.drop_guarantees) {
                assert!(*d >= g - 1e-9);
                assert!(*d >= mu / (4.0 * (1.0 - 2.0 * mu)) - 1e-9);
            }
            for c in &r.rescale_changes {
                assert!(*c <= 1e-9);
            }
            for i in 0..class.len() {
                let pi = MixturePolicy::pure(i);
                if cons.gap(&class, &pi).abs() > 0.3 {
                    continue;
                }
                let (v, _) = variance_stats(&r.q, &pi, &class, &hist, mu).unwrap();
                let (_, b) =
                    regret_and_bonus(&pi, r.q.anchor(), &class, &hist, mu, ctx.horizon).unwrap();
                assert!(v <= 4.0 + b + lam + 1e-6, "mu={mu} h={i} v={v} b={b}");
            }
        }
    }

    #[test]
    fn deviation_constants() {
        assert_eq!(variance_deviation_bound(0.0), 162.6);
        assert!(epsilon_t(6, 100, 0.1, 4) > epsilon_t(6, 100, 0.1, 16));
        assert!(iteration_cap(0.25) >= 64);
    }
}
