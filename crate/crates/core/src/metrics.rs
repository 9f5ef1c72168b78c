//! Exact and empirical group rates, fairness gaps, losses, regret, and
//! per-round fairness audits.
//!
//! Everything here is linear in the mixture weights: a rate of `π` is the
//! weighted sum of its atoms' rates.

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{
    cell_group, CellMasses, Dataset, Group, HypothesisClass, Label, MixturePolicy, Population,
    RateFunctional, TabularDistribution,
};

/// Slack on audit comparisons to absorb floating-point noise.
pub const AUDIT_TOL: f64 = 1e-9;

/// The gap `rate_{+1}(π) − rate_{−1}(π)` written as a per-cell linear form:
/// `gap(π) = Σ_cell coef[cell] · Pr[π(cell) = event]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GapFunctional {
    pub functional: RateFunctional,
    pub event: Label,
    /// Per-cell coefficient of the group +1 rate (zero on group −1 cells).
    pub plus_coef: Vec<f64>,
    /// Per-cell coefficient of the group −1 rate (zero on group +1 cells).
    pub minus_coef: Vec<f64>,
}

impl GapFunctional {
    pub fn new(masses: &CellMasses, functional: RateFunctional) -> Result<Self> {
        let cells = masses.num_cells();
        let mut plus_coef = vec![0.0; cells];
        let mut minus_coef = vec![0.0; cells];
        let mut z = [0.0f64; 2];
        for c in 0..cells {
            z[cell_group(c).index()] +=
                functional.conditioning_weight(masses.neg[c], masses.pos[c]);
        }
        for g in Group::BOTH {
            if z[g.index()] <= 0.0 {
                return Err(Error::EmptyConditioningEvent {
                    functional,
                    group: g,
                });
            }
        }
        for c in 0..cells {
            let w = functional.conditioning_weight(masses.neg[c], masses.pos[c]);
            match cell_group(c) {
                Group::Plus => plus_coef[c] = w / z[1],
                Group::Minus => minus_coef[c] = w / z[0],
            }
        }
        Ok(Self {
            functional,
            event: functional.event(),
            plus_coef,
            minus_coef,
        })
    }

    pub fn from_population<P: Population + ?Sized>(
        p: &P,
        functional: RateFunctional,
    ) -> Result<Self> {
        Self::new(&p.cell_masses()?, functional)
    }

    /// Signed per-cell coefficient of the gap.
    #[inline]
    pub fn gap_coef(&self, cell: usize) -> f64 {
        self.plus_coef[cell] - self.minus_coef[cell]
    }

    pub fn rate(&self, class: &HypothesisClass, pi: &MixturePolicy, group: Group) -> f64 {
        let coef = match group {
            Group::Plus => &self.plus_coef,
            Group::Minus => &self.minus_coef,
        };
        coef.iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(c, w)| w * pi.prob(class, c, self.event))
            .sum()
    }

    pub fn gap(&self, class: &HypothesisClass, pi: &MixturePolicy) -> f64 {
        self.rate(class, pi, Group::Plus) - self.rate(class, pi, Group::Minus)
    }

    /// Gap of every hypothesis in the class, in class order.
    pub fn hypothesis_gaps(&self, class: &HypothesisClass) -> Vec<f64> {
        class
            .hypotheses()
            .iter()
            .map(|h| {
                (0..class.num_cells())
                    .filter(|c| h.predict_cell(*c) == self.event)
                    .map(|c| self.gap_coef(c))
                    .sum()
            })
            .collect()
    }
}

/// Exact 0-1 loss of every hypothesis under the given cell masses.
pub fn hypothesis_losses(class: &HypothesisClass, masses: &CellMasses) -> Vec<f64> {
    class
        .hypotheses()
        .iter()
        .map(|h| {
            (0..class.num_cells())
                .map(|c| match h.predict_cell(c) {
                    Label::Pos => masses.neg[c],
                    Label::Neg => masses.pos[c],
                })
                .sum()
        })
        .collect()
}

/// `Σ_i w_i · values[i]` over the policy's atoms.
pub fn mix(pi: &MixturePolicy, values: &[f64]) -> f64 {
    pi.atoms().iter().map(|(i, w)| w * values[*i]).sum()
}

/// Conditional rate of `pi` on `group` under `d`.
pub fn rate(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    d: &TabularDistribution,
    f: RateFunctional,
    group: Group,
) -> Result<f64> {
    pi.check_indices(class)?;
    Ok(GapFunctional::from_population(d, f)?.rate(class, pi, group))
}

/// `rate_{+1}(π) − rate_{−1}(π)` under the exact distribution.
pub fn delta_rate(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    d: &TabularDistribution,
    f: RateFunctional,
) -> Result<f64> {
    pi.check_indices(class)?;
    Ok(GapFunctional::from_population(d, f)?.gap(class, pi))
}

/// The same gap on the empirical distribution of `s`.
pub fn empirical_delta_rate(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    s: &Dataset,
    f: RateFunctional,
) -> Result<f64> {
    pi.check_indices(class)?;
    Ok(GapFunctional::from_population(s, f)?.gap(class, pi))
}

/// Expected 0-1 loss over any population (exact for distributions,
/// empirical for datasets).
pub fn policy_loss<P: Population + ?Sized>(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    p: &P,
) -> Result<f64> {
    pi.check_indices(class)?;
    let m = p.cell_masses()?;
    Ok((0..class.num_cells())
        .map(|c| {
            m.neg[c] * pi.prob(class, c, Label::Pos) + m.pos[c] * pi.prob(class, c, Label::Neg)
        })
        .sum())
}

pub fn true_policy_loss(
    pi: &MixturePolicy,
    class: &HypothesisClass,
    d: &TabularDistribution,
) -> Result<f64> {
    policy_loss(pi, class, d)
}

/// Pseudo-regret of a trajectory of exact per-round expected losses
/// against a fixed benchmark loss.
pub fn cumulative_regret(trajectory_losses: &[f64], benchmark_per_round: f64) -> f64 {
    trajectory_losses.iter().sum::<f64>() - trajectory_losses.len() as f64 * benchmark_per_round
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FairnessAuditRecord {
    pub round: usize,
    pub true_gap: f64,
    pub threshold: f64,
    pub violated: bool,
}

impl FairnessAuditRecord {
    pub fn new(round: usize, true_gap: f64, threshold: f64) -> Self {
        Self {
            round,
            true_gap,
            threshold,
            violated: true_gap.abs() > threshold + AUDIT_TOL,
        }
    }
}

/// One record per policy, rounds numbered from 1.
pub fn audit_fairness(
    trajectory_policies: &[MixturePolicy],
    class: &HypothesisClass,
    d: &TabularDistribution,
    f: RateFunctional,
    threshold: f64,
) -> Result<Vec<FairnessAuditRecord>> {
    let gapf = GapFunctional::from_population(d, f)?;
    trajectory_policies
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            pi.check_indices(class)?;
            Ok(FairnessAuditRecord::new(
                i + 1,
                gapf.gap(class, pi),
                threshold,
            ))
        })
        .collect()
}

pub fn any_violation(records: &[FairnessAuditRecord]) -> bool {
    records.iter().any(|r| r.violated)
}

/// CSV with header `round,true_gap,threshold,violated`.
pub fn write_audit_csv<W: Write>(mut out: W, records: &[FairnessAuditRecord]) -> io::Result<()> {
    writeln!(out, "round,true_gap,threshold,violated")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{}",
            r.round, r.true_gap, r.threshold, r.violated
        )?;
    }
    Ok(())
}
