//! FairCSC: minimize a cost-sensitive objective over `Δ(H)` subject to an
//! empirical equalized-rate constraint, using only an exact CSC oracle.
//!
//! The pipeline is
//!
//! 1. turn CSC costs into a weighted classification problem and normalize;
//! 2. optionally tighten the constraint level from `γ` to `γ − 2ν`;
//! 3. find a `ν`-approximate saddle point of the Lagrangian
//!    `L(π, λ) = err(π) + λ₊(Δ(π) − γ) + λ₋(−Δ(π) − γ)` over
//!    `Δ(H) × {λ ≥ 0, ‖λ‖₁ ≤ B}`: the dual runs exponentiated gradient on
//!    the 3-simplex (two multipliers plus slack) scaled by `B`, the primal
//!    best-responds with one CSC call per iteration, and the averaged
//!    iterates are returned;
//! 4. shrink the averaged policy to support at most two by enumerating
//!    singles and pairs inside its support.
//!
//! The objective and the constraint are defined on different data: the
//! constraint is a [`GapFunctional`] built from the exploration sample.
//!
//! Saddle iterations stop at the iteration count for which the anytime
//! Hedge regret bound guarantees `ν`, or earlier once weak duality
//! certifies that the best feasible pair inside the averaged support is
//! within `ν` of the restricted optimum.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::csc::{
    csc_offset, csc_to_weighted, exact_csc_cells, normalize_weights, CellCosts, CscInstance,
    WeightedInstance,
};
use crate::error::{Error, Result};
use crate::metrics::GapFunctional;
use crate::types::{Dataset, Group, HypothesisClass, Label, MixturePolicy, RateFunctional};

/// Float slack on feasibility checks of closed-form mixture weights.
pub const FEAS_TOL: f64 = 1e-12;

/// `C` in the oracle-call budget `C · (B/2)² / ν²` of one saddle solve.
pub const SADDLE_CALL_CONSTANT: f64 = 48.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairCscConfig {
    pub gamma: f64,
    pub nu: f64,
    pub dual_bound: f64,
    pub functional: RateFunctional,
    pub tighten: bool,
}

impl FairCscConfig {
    pub fn new(gamma: f64, nu: f64) -> Self {
        Self {
            gamma,
            nu,
            dual_bound: 2.0,
            functional: RateFunctional::FalsePositive,
            tighten: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma = {} must be >= 0",
                self.gamma
            )));
        }
        if !(self.nu > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "nu = {} must be > 0",
                self.nu
            )));
        }
        if !(self.dual_bound > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "dual_bound = {} must be > 0",
                self.dual_bound
            )));
        }
        if self.tighten && !(self.nu < self.gamma / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "tightening needs 0 < nu < gamma/2 (nu = {}, gamma = {})",
                self.nu, self.gamma
            )));
        }
        Ok(())
    }

    /// Constraint level handed to the saddle-point solver.
    pub fn solve_gamma(&self) -> f64 {
        if self.tighten {
            self.gamma - 2.0 * self.nu
        } else {
            self.gamma
        }
    }

    /// Gap level the final policy is guaranteed to meet.
    pub fn output_gamma(&self) -> f64 {
        if self.tighten {
            self.gamma
        } else {
            self.gamma + 2.0 * self.nu
        }
    }
}

/// Multipliers for the one-sided constraints `Δ ≤ γ` (plus) and
/// `−Δ ≤ γ` (minus).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualVector {
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

impl DualVector {
    pub fn new(lambda_plus: f64, lambda_minus: f64) -> Self {
        Self {
            lambda_plus,
            lambda_minus,
        }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn l1(&self) -> f64 {
        self.lambda_plus + self.lambda_minus
    }

    /// `λ₊(gap − γ) + λ₋(−gap − γ)`.
    #[inline]
    pub fn penalty(&self, gap: f64, gamma: f64) -> f64 {
        self.lambda_plus * (gap - gamma) + self.lambda_minus * (-gap - gamma)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaddleResult {
    pub policy: MixturePolicy,
    pub dual: DualVector,
    pub iterations: usize,
    pub oracle_calls: usize,
    /// Primal-dual certificate at termination: weighted error of
    /// `certified` minus the best dual value `min_h L(h, λ)` seen.
    pub duality_gap: f64,
    /// Support-≤2 policy inside the support of `policy`, feasible at the
    /// solve level, whose error is within `duality_gap` of the restricted
    /// optimum.
    pub certified: Option<MixturePolicy>,
    /// All objective weights were zero; `policy` is the plus classifier.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SaddleTraceRow {
    pub iteration: usize,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    pub best_response: usize,
    pub lagrangian: f64,
}

pub fn write_saddle_trace_csv<W: Write>(mut out: W, rows: &[SaddleTraceRow]) -> io::Result<()> {
    writeln!(
        out,
        "iteration,lambda_plus,lambda_minus,best_response,lagrangian"
    )?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.iteration, r.lambda_plus, r.lambda_minus, r.best_response, r.lagrangian
        )?;
    }
    Ok(())
}

/// Builds the empirical constraint from exploration data.
pub fn empirical_constraint(s: &Dataset, f: RateFunctional) -> Result<GapFunctional> {
    GapFunctional::from_population(s, f)
}

/// `L(π, λ)` with weighted error on `w` and the gap on `constraint`.
pub fn lagrangian(
    pi: &MixturePolicy,
    lam: DualVector,
    w: &WeightedInstance,
    constraint: &GapFunctional,
    class: &HypothesisClass,
    gamma: f64,
) -> Result<f64> {
    pi.check_indices(class)?;
    Ok(w.policy_error(class, pi) + lam.penalty(constraint.gap(class, pi), gamma))
}

/// The CSC instance whose cost for every `h` equals `L(h, λ)` up to the
/// constant `−(λ₊ + λ₋)γ`.
pub fn lagrangian_costs(
    lam: DualVector,
    base: &CellCosts,
    constraint: &GapFunctional,
) -> CellCosts {
    let mut cc = base.clone();
    add_penalty_costs(&mut cc, lam, constraint);
    cc
}

fn add_penalty_costs(cc: &mut CellCosts, lam: DualVector, constraint: &GapFunctional) {
    let scale = lam.lambda_plus - lam.lambda_minus;
    if scale == 0.0 {
        return;
    }
    let target = match constraint.event {
        Label::Pos => &mut cc.pos,
        Label::Neg => &mut cc.neg,
    };
    for (c, slot) in target.iter_mut().enumerate() {
        *slot += scale * constraint.gap_coef(c);
    }
}

/// The learner's best response to `λ`: one exact CSC call.
pub fn best_response_policy(
    lam: DualVector,
    w: &WeightedInstance,
    constraint: &GapFunctional,
    class: &HypothesisClass,
) -> usize {
    let base = w.cell_costs(class.num_cells());
    exact_csc_cells(&lagrangian_costs(lam, &base, constraint), class).0
}

/// Exact maximizer of `L(π, ·)` over the ℓ₁ ball of radius `dual_bound`.
pub fn best_response_dual(gap: f64, gamma: f64, dual_bound: f64) -> DualVector {
    let up = gap - gamma;
    let down = -gap - gamma;
    if up <= 0.0 && down <= 0.0 {
        DualVector::zero()
    } else if up >= down {
        DualVector::new(dual_bound, 0.0)
    } else {
        DualVector::new(0.0, dual_bound)
    }
}

/// Policy-level convenience over [`best_response_dual`].
pub fn best_response_dual_for(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    constraint: &GapFunctional,
    gamma: f64,
    dual_bound: f64,
) -> DualVector {
    best_response_dual(constraint.gap(class, pi), gamma, dual_bound)
}

/// Range of the dual's per-round payoff `λ · g` across coordinates.
fn payoff_range(gamma: f64, dual_bound: f64) -> f64 {
    let hi = (1.0 - gamma).max(0.0);
    let lo = -1.0 - gamma;
    dual_bound * (hi - lo)
}

/// Iterations after which anytime Hedge (`η_k = √(8 ln 3 / k) / R`)
/// certifies an average regret of at most `ν`:
/// `R (√(2 ln 3 / K) + √(ln 3 / 8) / K) ≤ ν`.
pub fn saddle_iteration_bound(nu: f64, gamma: f64, dual_bound: f64) -> usize {
    let r = payoff_range(gamma, dual_bound);
    let ln3 = 3f64.ln();
    let a = (ln3 / 8.0).sqrt();
    let b = (2.0 * ln3).sqrt();
    let c = nu / r;
    let u = (-b + (b * b + 4.0 * a * c).sqrt()) / (2.0 * a);
    (1.0 / (u * u)).ceil().max(1.0) as usize
}

/// Documented per-call oracle budget `⌈C (B/2)² max(1, γ)² / ν²⌉`.
pub fn saddle_call_budget(nu: f64, gamma: f64, dual_bound: f64) -> usize {
    let scale = (dual_bound / 2.0).powi(2) * gamma.max(1.0).powi(2);
    (SADDLE_CALL_CONSTANT * scale / (nu * nu)).ceil() as usize
}

struct SaddleProblem<'a> {
    class: &'a HypothesisClass,
    constraint: &'a GapFunctional,
    base: CellCosts,
    errors: Vec<f64>,
    gaps: Vec<f64>,
    gamma: f64,
}

impl SaddleProblem<'_> {
    fn best_response(&self, lam: DualVector, scratch: &mut CellCosts) -> usize {
        scratch.neg.copy_from_slice(&self.base.neg);
        scratch.pos.copy_from_slice(&self.base.pos);
        add_penalty_costs(scratch, lam, self.constraint);
        exact_csc_cells(scratch, self.class).0
    }

    fn value(&self, h: usize, lam: DualVector) -> f64 {
        self.errors[h] + lam.penalty(self.gaps[h], self.gamma)
    }

    /// Best feasible pair inside the support seen so far and its error.
    fn feasible_pair(&self, counts: &[usize]) -> Option<(MixturePolicy, f64)> {
        let support: Vec<usize> = (0..counts.len()).filter(|&h| counts[h] > 0).collect();
        let pair = shrink_over(&support, &self.errors, &self.gaps, self.gamma).ok()?;
        let err = mix_values(&pair, &self.errors);
        Some((pair, err))
    }

    /// Multiplier making both atoms of `pair` equally good, i.e. the dual
    /// that complementary slackness pairs with it.
    fn implied_dual(&self, pair: &MixturePolicy, dual_bound: f64) -> DualVector {
        let atoms = pair.atoms();
        if atoms.len() != 2 {
            return DualVector::zero();
        }
        let (i, j) = (atoms[0].0, atoms[1].0);
        let slope = self.gaps[i] - self.gaps[j];
        if slope == 0.0 {
            return DualVector::zero();
        }
        let lam = (self.errors[j] - self.errors[i]) / slope;
        if mix_values(pair, &self.gaps) >= 0.0 {
            DualVector::new(lam.clamp(0.0, dual_bound), 0.0)
        } else {
            DualVector::new(0.0, (-lam).clamp(0.0, dual_bound))
        }
    }
}

fn mix_values(pi: &MixturePolicy, values: &[f64]) -> f64 {
    pi.atoms().iter().map(|&(i, w)| w * values[i]).sum()
}

/// `ν`-approximate saddle point of the restricted Lagrangian at level
/// `gamma`. `w` should be normalized.
pub fn saddle_point(
    w: &WeightedInstance,
    constraint: &GapFunctional,
    class: &HypothesisClass,
    gamma: f64,
    nu: f64,
    dual_bound: f64,
) -> SaddleResult {
    saddle_point_traced(w, constraint, class, gamma, nu, dual_bound, None)
}

/// As [`saddle_point`], optionally recording one row per iteration.
///
/// Besides the regret-bound iteration cap, the loop stops once weak
/// duality certifies the best feasible pair within the current support:
/// for every `π` feasible at `gamma` and every `λ`,
/// `err(π) ≥ L(π, λ) ≥ min_h L(h, λ)`, and the right-hand side is known
/// exactly for every dual iterate because the primal plays best responses.
/// Each check also evaluates the dual at the multiplier implied by the
/// current best pair, which closes the gap once that pair is optimal.
pub fn saddle_point_traced(
    w: &WeightedInstance,
    constraint: &GapFunctional,
    class: &HypothesisClass,
    gamma: f64,
    nu: f64,
    dual_bound: f64,
    mut trace: Option<&mut Vec<SaddleTraceRow>>,
) -> SaddleResult {
    if !(w.total_weight > 0.0) {
        return SaddleResult {
            policy: MixturePolicy::pure(class.plus_index()),
            dual: DualVector::zero(),
            iterations: 0,
            oracle_calls: 0,
            duality_gap: 0.0,
            certified: None,
            degenerate: true,
        };
    }
    let base = w.cell_costs(class.num_cells());
    let problem = SaddleProblem {
        class,
        constraint,
        errors: class.hypotheses().iter().map(|h| base.cost(h)).collect(),
        gaps: constraint.hypothesis_gaps(class),
        base,
        gamma,
    };
    let mut scratch = CellCosts::zeros(class.num_cells());

    let max_iter = saddle_iteration_bound(nu, gamma, dual_bound);
    let range = payoff_range(gamma, dual_bound);
    let ln3 = 3f64.ln();

    // cumulative payoffs of the (λ₊, λ₋, slack) vertices
    let mut cum = [0.0f64; 3];
    let mut lam_sum = [0.0f64; 2];
    let mut counts = vec![0usize; class.len()];
    let mut oracle_calls = 0usize;
    let mut lower = f64::NEG_INFINITY;
    let mut next_check = 4usize;
    let mut certificate: Option<(MixturePolicy, f64)> = None;
    let mut k = 0usize;

    while k < max_iter {
        k += 1;
        let eta = (8.0 * ln3 / k as f64).sqrt() / range;
        let m = cum.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = cum.map(|c| (eta * (c - m)).exp());
        let z: f64 = e.iter().sum();
        let lam = DualVector::new(dual_bound * e[0] / z, dual_bound * e[1] / z);

        let h = problem.best_response(lam, &mut scratch);
        oracle_calls += 1;
        counts[h] += 1;
        lam_sum[0] += lam.lambda_plus;
        lam_sum[1] += lam.lambda_minus;
        let value = problem.value(h, lam);
        lower = lower.max(value);
        let g = problem.gaps[h];
        cum[0] += dual_bound * (g - gamma);
        cum[1] += dual_bound * (-g - gamma);

        if let Some(t) = trace.as_deref_mut() {
            t.push(SaddleTraceRow {
                iteration: k,
                lambda_plus: lam.lambda_plus,
                lambda_minus: lam.lambda_minus,
                best_response: h,
                lagrangian: value,
            });
        }

        if k == next_check && k < max_iter {
            next_check = (k + k / 4).max(k + 1);
            let lam_bar = DualVector::new(lam_sum[0] / k as f64, lam_sum[1] / k as f64);
            let hb = problem.best_response(lam_bar, &mut scratch);
            oracle_calls += 1;
            lower = lower.max(problem.value(hb, lam_bar));
            if let Some((pair, err)) = problem.feasible_pair(&counts) {
                let lp = problem.implied_dual(&pair, dual_bound);
                let hp = problem.best_response(lp, &mut scratch);
                oracle_calls += 1;
                lower = lower.max(problem.value(hp, lp));
                let done = err - lower <= nu;
                certificate = Some((pair, err));
                if done {
                    break;
                }
            }
        }
    }

    let lam_bar = DualVector::new(lam_sum[0] / k as f64, lam_sum[1] / k as f64);
    let fresh = problem.feasible_pair(&counts);
    if fresh
        .as_ref()
        .is_some_and(|(_, e)| certificate.as_ref().map_or(true, |(_, c)| e < c))
    {
        certificate = fresh;
    }
    let policy =
        MixturePolicy::from_weights(counts.iter().enumerate().map(|(i, &n)| (i, n as f64)))
            .expect("at least one iteration");
    let (certified, duality_gap) = match certificate {
        Some((pair, err)) => (Some(pair), err - lower),
        None => (None, f64::INFINITY),
    };
    SaddleResult {
        policy,
        dual: lam_bar,
        iterations: k,
        oracle_calls,
        duality_gap,
        certified,
        degenerate: false,
    }
}

/// Candidate weights for a pair: the cheapest point of the closed feasible
/// interval `{w : |w·d_i + (1−w)·d_j| ≤ γ} ∩ [0, 1]`.
fn best_pair_weight(ci: f64, cj: f64, di: f64, dj: f64, gamma: f64) -> Option<(f64, f64)> {
    let slope = di - dj;
    let (lo, hi) = if slope == 0.0 {
        if dj.abs() <= gamma + FEAS_TOL {
            (0.0, 1.0)
        } else {
            return None;
        }
    } else {
        let a = (-gamma - dj) / slope;
        let b = (gamma - dj) / slope;
        (a.min(b).max(0.0), a.max(b).min(1.0))
    };
    if lo > hi {
        return None;
    }
    let w = if ci < cj { hi } else { lo };
    Some((w, cj + w * (ci - cj)))
}

/// Support-≤2 policy with cost no larger than `costs`-cost of the best
/// feasible single or pair inside `support`.
pub fn shrink_over(
    support: &[usize],
    costs: &[f64],
    gaps: &[f64],
    gamma: f64,
) -> Result<MixturePolicy> {
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    let mut best: Option<(f64, usize, usize, f64)> = None;
    let mut consider = |cost: f64, i: usize, j: usize, w: f64| {
        if best.map_or(true, |(c, ..)| cost < c) {
            best = Some((cost, i, j, w));
        }
    };
    for (a, &i) in support.iter().enumerate() {
        if gaps[i].abs() <= gamma + FEAS_TOL {
            consider(costs[i], i, i, 1.0);
        }
        for &j in &support[a + 1..] {
            if let Some((w, c)) = best_pair_weight(costs[i], costs[j], gaps[i], gaps[j], gamma) {
                consider(c, i, j, w);
            }
        }
    }
    let (_, i, j, w) = best.ok_or(Error::NoFeasibleSupport)?;
    if i == j || w >= 1.0 {
        Ok(MixturePolicy::pure(i))
    } else if w <= 0.0 {
        Ok(MixturePolicy::pure(j))
    } else {
        MixturePolicy::new(vec![(i, w), (j, 1.0 - w)])
    }
}

/// Reduces `pi` to support at most two without increasing weighted error
/// on `w` and keeping the gap on `constraint` within `gamma`.
pub fn shrink_support(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    w: &WeightedInstance,
    constraint: &GapFunctional,
    gamma: f64,
) -> Result<MixturePolicy> {
    pi.check_indices(class)?;
    let support: Vec<usize> = pi
        .atoms()
        .iter()
        .filter(|(_, x)| *x > 0.0)
        .map(|(i, _)| *i)
        .collect();
    if support.len() == 1 {
        return Ok(MixturePolicy::pure(support[0]));
    }
    let base = w.cell_costs(class.num_cells());
    let costs: Vec<f64> = class.hypotheses().iter().map(|h| base.cost(h)).collect();
    shrink_over(&support, &costs, &constraint.hypothesis_gaps(class), gamma)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FairCscOutput {
    pub policy: MixturePolicy,
    pub saddle: SaddleResult,
    /// The averaged policy violated the output level (float slop) and the
    /// special classifiers were added to the shrink candidates.
    pub support_augmented: bool,
}

impl FairCscOutput {
    pub fn oracle_calls(&self) -> usize {
        self.saddle.oracle_calls
    }
}

/// Full FairCSC pipeline with diagnostics.
pub fn fair_csc_solve(
    inst: &CscInstance,
    constraint: &GapFunctional,
    class: &HypothesisClass,
    cfg: &FairCscConfig,
) -> Result<FairCscOutput> {
    cfg.validate()?;
    if constraint.functional != cfg.functional {
        return Err(Error::InvalidConfig(format!(
            "constraint is {:?} but config asks for {:?}",
            constraint.functional, cfg.functional
        )));
    }
    let weighted = csc_to_weighted(inst);
    let normalized = match normalize_weights(&weighted) {
        Ok(n) => n,
        Err(Error::DegenerateWeights) => {
            let saddle = saddle_point(
                &weighted,
                constraint,
                class,
                cfg.solve_gamma(),
                cfg.nu,
                cfg.dual_bound,
            );
            return Ok(FairCscOutput {
                policy: saddle.policy.clone(),
                saddle,
                support_augmented: false,
            });
        }
        Err(e) => return Err(e),
    };
    let saddle = saddle_point(
        &normalized,
        constraint,
        class,
        cfg.solve_gamma(),
        cfg.nu,
        cfg.dual_bound,
    );

    let base = normalized.cell_costs(class.num_cells());
    let costs: Vec<f64> = class.hypotheses().iter().map(|h| base.cost(h)).collect();
    let gaps = constraint.hypothesis_gaps(class);
    let support: Vec<usize> = saddle.policy.atoms().iter().map(|(i, _)| *i).collect();
    let level = cfg.output_gamma();
    let (policy, support_augmented) = match shrink_over(&support, &costs, &gaps, level) {
        Ok(p) => (p, false),
        Err(Error::NoFeasibleSupport) => {
            let mut s = support.clone();
            s.extend([
                class.plus_index(),
                class.minus_index(),
                class.plus_a_index(),
                class.minus_a_index(),
            ]);
            (shrink_over(&s, &costs, &gaps, level)?, true)
        }
        Err(e) => return Err(e),
    };
    Ok(FairCscOutput {
        policy,
        saddle,
        support_augmented,
    })
}

/// FairCSC: a support-≤2 policy meeting the empirical gap level with cost
/// within `4ν Σ|c⁻¹ − c⁺¹|` of the fair optimum.
pub fn fair_csc_oracle(
    inst: &CscInstance,
    constraint: &GapFunctional,
    class: &HypothesisClass,
    cfg: &FairCscConfig,
) -> Result<MixturePolicy> {
    Ok(fair_csc_solve(inst, constraint, class, cfg)?.policy)
}

/// Additive cost guarantee `ε = 4ν Σ_j |c⁻¹_j − c⁺¹_j|`.
pub fn fair_csc_error_bound(inst: &CscInstance, nu: f64) -> f64 {
    4.0 * nu * inst.total_abs_difference()
}

/// Total CSC cost of a policy, `Σ_j E_{h∼π} c_j^{h(x_j)}`.
pub fn csc_policy_cost(inst: &CscInstance, class: &HypothesisClass, pi: &MixturePolicy) -> f64 {
    inst.policy_cost(class, pi)
}

/// Recovers CSC cost from weighted error on the unnormalized instance.
pub fn csc_cost_from_error(inst: &CscInstance, weighted_error: f64) -> f64 {
    weighted_error + csc_offset(inst)
}

/// Uniform deviation radius of empirical gaps:
/// `β = Σ_{j∈{±1}} √(ln(8|H|/δ) / (2 n_j))`, where `n_j` counts the
/// conditioning events (negatives, for false positive rates) of group `j`.
pub fn concentration_radius(
    s: &Dataset,
    num_hypotheses: usize,
    delta: f64,
    f: RateFunctional,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "delta = {delta} must lie in (0, 1)"
        )));
    }
    let log_term = (8.0 * num_hypotheses as f64 / delta).ln();
    let mut beta = 0.0;
    for g in Group::BOTH {
        let n = match f {
            RateFunctional::FalsePositive => s.count(g, Label::Neg),
            RateFunctional::FalseNegative => s.count(g, Label::Pos),
            RateFunctional::PositiveRate => s.count(g, Label::Neg) + s.count(g, Label::Pos),
        };
        if n == 0 {
            return Err(Error::EmptyConditioningEvent {
                functional: f,
                group: g,
            });
        }
        beta += (log_term / (2.0 * n as f64)).sqrt();
    }
    Ok(beta)
}

/// Radius from raw counts, for callers that track them directly.
pub fn concentration_radius_from_counts(
    n_minus: usize,
    n_plus: usize,
    num_hypotheses: usize,
    delta: f64,
) -> f64 {
    let log_term = (8.0 * num_hypotheses as f64 / delta).ln();
    (log_term / (2.0 * n_minus as f64)).sqrt() + (log_term / (2.0 * n_plus as f64)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csc::{CscRow, WeightedRow};
    use crate::types::{Context, Example, Hypothesis};

    fn small_class() -> HypothesisClass {
        let h = Hypothesis::from_fn(2, Some("h"), |x, g| {
            if x.0 == 0 && g == Group::Plus {
                Label::Pos
            } else {
                Label::Neg
            }
        });
        HypothesisClass::with_specials(2, vec![h]).unwrap()
    }

    fn constraint_data() -> Dataset {
        let mut ex = Vec::new();
        for x in 0..2 {
            for g in Group::BOTH {
                ex.push(Example::new(Context(x), g, Label::Neg));
                ex.push(Example::new(Context(x), g, Label::Pos));
            }
        }
        Dataset::new(2, ex).unwrap()
    }

    fn weighted(rows: &[(usize, Group, Label, f64)]) -> WeightedInstance {
        WeightedInstance::new(
            rows.iter()
                .map(|&(x, g, t, w)| WeightedRow {
                    context: Context(x),
                    group: g,
                    target: t,
                    weight: w,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FairCscConfig::new(0.1, 0.04).validate().is_ok());
        assert!(FairCscConfig::new(0.1, 0.06).validate().is_err());
        assert!(FairCscConfig::new(-0.1, 0.01).validate().is_err());
        let mut c = FairCscConfig::new(0.0, 0.1);
        c.tighten = false;
        assert!(c.validate().is_ok());
        c.dual_bound = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn lagrangian_with_zero_dual_is_weighted_error() {
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let w = weighted(&[
            (0, Group::Plus, Label::Pos, 0.7),
            (1, Group::Minus, Label::Neg, 0.3),
        ]);
        for i in 0..class.len() {
            let pi = MixturePolicy::pure(i);
            let l = lagrangian(&pi, DualVector::zero(), &w, &cons, &class, 0.1).unwrap();
            assert_eq!(l, w.weighted_error(class.get(i)));
        }
    }

    #[test]
    fn active_constraint_has_zero_penalty() {
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let h = class.position_of_tag("h").unwrap();
        let pi = MixturePolicy::pure(h);
        let gap = cons.gap(&class, &pi);
        assert!((gap - 0.5).abs() < 1e-15);
        let w = weighted(&[(0, Group::Plus, Label::Pos, 1.0)]);
        let l = lagrangian(&pi, DualVector::new(1.3, 0.0), &w, &cons, &class, gap).unwrap();
        assert!((l - w.weighted_error(class.get(h))).abs() < 1e-15);
    }

    #[test]
    fn dual_best_response_vertices() {
        assert_eq!(best_response_dual(0.05, 0.1, 2.0), DualVector::zero());
        assert_eq!(best_response_dual(0.2, 0.1, 2.0), DualVector::new(2.0, 0.0));
        assert_eq!(
            best_response_dual(-0.3, 0.1, 2.0),
            DualVector::new(0.0, 2.0)
        );
    }

    #[test]
    fn best_response_at_zero_dual_is_weighted_argmin() {
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let w = weighted(&[
            (0, Group::Plus, Label::Pos, 1.0),
            (1, Group::Plus, Label::Neg, 1.0),
            (0, Group::Minus, Label::Neg, 1.0),
        ]);
        let i = best_response_policy(DualVector::zero(), &w, &cons, &class);
        assert_eq!(class.get(i).tag.as_deref(), Some("h"));
    }

    #[test]
    fn penalty_only_best_response_prefers_negative_gap() {
        // only group +1 negatives can become false positives when the
        // objective is empty, so a large λ₊ pushes to the most negative gap
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let w = weighted(&[(0, Group::Plus, Label::Pos, 0.0)]);
        let i = best_response_policy(DualVector::new(2.0, 0.0), &w, &cons, &class);
        assert_eq!(i, class.minus_a_index());
    }

    #[test]
    fn degenerate_weights_return_plus() {
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let w = weighted(&[(0, Group::Plus, Label::Pos, 0.0)]);
        let r = saddle_point(&w, &cons, &class, 0.1, 0.01, 2.0);
        assert!(r.degenerate);
        assert_eq!(r.policy, MixturePolicy::pure(class.plus_index()));
    }

    #[test]
    fn iteration_bound_meets_budget() {
        for nu in [0.5, 0.2, 0.1, 0.03, 0.01, 0.003, 0.001] {
            for gamma in [0.0, 0.05, 0.5, 1.0] {
                let k = saddle_iteration_bound(nu, gamma, 2.0);
                // checks are geometric with ratio 5/4 from 4, two calls each
                let checks = 2.0 * ((k as f64 / 4.0).ln() / 1.25f64.ln() + 4.0);
                assert!(
                    (k as f64 + checks.max(1.0)) <= saddle_call_budget(nu, gamma, 2.0) as f64,
                    "nu={nu} gamma={gamma}"
                );
            }
        }
    }

    #[test]
    fn shrink_support_keeps_single_atom() {
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let w = weighted(&[(0, Group::Plus, Label::Pos, 1.0)]);
        let pi = MixturePolicy::pure(2);
        assert_eq!(shrink_support(&pi, &class, &w, &cons, 0.0).unwrap(), pi);
    }

    #[test]
    fn shrink_support_pair_interval() {
        // costs (0, 1), gaps (0.5, 0): best feasible at gamma = 0.25 is the
        // half mixture
        let pi = shrink_over(&[0, 1], &[0.0, 1.0], &[0.5, 0.0], 0.25).unwrap();
        assert_eq!(pi.atoms(), &[(0, 0.5), (1, 0.5)]);
        assert!(shrink_over(&[0, 1], &[0.0, 1.0], &[0.5, 0.4], 0.25).is_err());
    }

    #[test]
    fn fair_csc_vacuous_gamma_matches_unconstrained() {
        let class = small_class();
        let cons = empirical_constraint(&constraint_data(), RateFunctional::FalsePositive).unwrap();
        let inst = CscInstance::new(vec![
            CscRow {
                context: Context(0),
                group: Group::Plus,
                cost_neg: 1.0,
                cost_pos: 0.0,
            },
            CscRow {
                context: Context(1),
                group: Group::Plus,
                cost_neg: 0.0,
                cost_pos: 1.0,
            },
            CscRow {
                context: Context(0),
                group: Group::Minus,
                cost_neg: 0.0,
                cost_pos: 0.5,
            },
        ])
        .unwrap();
        let cfg = FairCscConfig::new(1.0, 0.01);
        let out = fair_csc_solve(&inst, &cons, &class, &cfg).unwrap();
        let (_, unconstrained) = crate::csc::exact_csc(&inst, &class);
        let cost = inst.policy_cost(&class, &out.policy);
        assert!(cost <= unconstrained + fair_csc_error_bound(&inst, cfg.nu) + 1e-12);
        assert!(out.policy.support_size() <= 2);
    }

    #[test]
    fn concentration_radius_scaling() {
        let mk = |n: usize| {
            let mut ex = Vec::new();
            for _ in 0..n {
                for g in Group::BOTH {
                    ex.push(Example::new(Context(0), g, Label::Neg));
                }
            }
            Dataset::new(1, ex).unwrap()
        };
        let f = RateFunctional::FalsePositive;
        let b1 = concentration_radius(&mk(100), 6, 0.05, f).unwrap();
        let b2 = concentration_radius(&mk(200), 6, 0.05, f).unwrap();
        assert!((b2 / b1 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        let expected = 2.0 * ((8.0 * 6.0 / 0.05f64).ln() / 200.0).sqrt();
        assert!((b1 - expected).abs() < 1e-15);
        assert!(concentration_radius(&mk(1_000_000), 6, 0.05, f).unwrap() < 1e-2);
        assert!(concentration_radius(&Dataset::empty(1), 6, 0.05, f).is_err());
    }
}
