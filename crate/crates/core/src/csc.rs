//! Exact cost-sensitive classification over a finite class, and the
//! CSC → weighted-classification transform.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{cell_index, Context, Group, Hypothesis, HypothesisClass, Label, MixturePolicy};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CscRow {
    pub context: Context,
    pub group: Group,
    /// Cost of predicting −1.
    pub cost_neg: f64,
    /// Cost of predicting +1.
    pub cost_pos: f64,
}

impl CscRow {
    pub fn cost(&self, label: Label) -> f64 {
        match label {
            Label::Neg => self.cost_neg,
            Label::Pos => self.cost_pos,
        }
    }

    pub fn cell(&self) -> usize {
        cell_index(self.context, self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CscInstance {
    pub rows: Vec<CscRow>,
}

impl CscInstance {
    pub fn new(rows: Vec<CscRow>) -> Result<Self> {
        if let Some(i) = rows
            .iter()
            .position(|r| !r.cost_neg.is_finite() || !r.cost_pos.is_finite())
        {
            return Err(Error::Contract(format!("row {i} has a non-finite cost")));
        }
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total cost of a deterministic hypothesis.
    pub fn cost(&self, h: &Hypothesis) -> f64 {
        self.rows
            .iter()
            .map(|r| r.cost(h.predict_cell(r.cell())))
            .sum()
    }

    /// Expected total cost of a mixture.
    pub fn policy_cost(&self, class: &HypothesisClass, pi: &MixturePolicy) -> f64 {
        pi.atoms()
            .iter()
            .map(|(i, w)| w * self.cost(class.get(*i)))
            .sum()
    }

    /// `Σ_j |c⁻¹_j − c⁺¹_j|`.
    pub fn total_abs_difference(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.cost_neg - r.cost_pos).abs())
            .sum()
    }

    /// Per-cell cost totals; every hypothesis's cost is preserved exactly
    /// in exact arithmetic.
    pub fn cell_costs(&self, num_cells: usize) -> CellCosts {
        let mut cc = CellCosts::zeros(num_cells);
        for r in &self.rows {
            let c = r.cell();
            cc.neg[c] += r.cost_neg;
            cc.pos[c] += r.cost_pos;
        }
        cc
    }
}

/// Costs aggregated per `(context, group)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCosts {
    pub neg: Vec<f64>,
    pub pos: Vec<f64>,
}

impl CellCosts {
    pub fn zeros(num_cells: usize) -> Self {
        Self {
            neg: vec![0.0; num_cells],
            pos: vec![0.0; num_cells],
        }
    }

    #[inline]
    pub fn cost(&self, h: &Hypothesis) -> f64 {
        self.neg
            .iter()
            .zip(&self.pos)
            .zip(h.predictions())
            .map(|((n, p), l)| match l {
                Label::Neg => *n,
                Label::Pos => *p,
            })
            .sum()
    }

    pub fn to_instance(&self) -> CscInstance {
        CscInstance {
            rows: (0..self.neg.len())
                .map(|c| CscRow {
                    context: crate::types::cell_context(c),
                    group: crate::types::cell_group(c),
                    cost_neg: self.neg[c],
                    cost_pos: self.pos[c],
                })
                .collect(),
        }
    }
}

/// Minimizes total cost over `class` by full enumeration; ties go to the
/// lowest index.
pub fn exact_csc(inst: &CscInstance, class: &HypothesisClass) -> (usize, f64) {
    exact_csc_cells(&inst.cell_costs(class.num_cells()), class)
}

pub fn exact_csc_cells(costs: &CellCosts, class: &HypothesisClass) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, h) in class.hypotheses().iter().enumerate() {
        let c = costs.cost(h);
        if c < best.1 {
            best = (i, c);
        }
    }
    if class.is_empty() {
        (0, 0.0)
    } else {
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub context: Context,
    pub group: Group,
    pub target: Label,
    pub weight: f64,
}

impl WeightedRow {
    pub fn cell(&self) -> usize {
        cell_index(self.context, self.group)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightedInstance {
    pub rows: Vec<WeightedRow>,
    pub total_weight: f64,
}

impl WeightedInstance {
    pub fn new(rows: Vec<WeightedRow>) -> Result<Self> {
        if let Some(i) = rows
            .iter()
            .position(|r| !(r.weight >= 0.0) || !r.weight.is_finite())
        {
            return Err(Error::Contract(format!(
                "row {i} has a negative or non-finite weight"
            )));
        }
        let total_weight = rows.iter().map(|r| r.weight).sum();
        Ok(Self { rows, total_weight })
    }

    pub fn weighted_error(&self, h: &Hypothesis) -> f64 {
        self.rows
            .iter()
            .filter(|r| h.predict_cell(r.cell()) != r.target)
            .map(|r| r.weight)
            .sum()
    }

    pub fn policy_error(&self, class: &HypothesisClass, pi: &MixturePolicy) -> f64 {
        pi.atoms()
            .iter()
            .map(|(i, w)| w * self.weighted_error(class.get(*i)))
            .sum()
    }

    /// As a CSC problem: predicting the target costs 0, the other label
    /// costs the weight.
    pub fn cell_costs(&self, num_cells: usize) -> CellCosts {
        let mut cc = CellCosts::zeros(num_cells);
        for r in &self.rows {
            let c = r.cell();
            match r.target {
                Label::Pos => cc.neg[c] += r.weight,
                Label::Neg => cc.pos[c] += r.weight,
            }
        }
        cc
    }
}

/// Per row: weight `|c⁻¹ − c⁺¹|`, target `+1` iff `c⁻¹ > c⁺¹`. Zero-weight
/// rows are kept.
pub fn csc_to_weighted(inst: &CscInstance) -> WeightedInstance {
    let rows: Vec<WeightedRow> = inst
        .rows
        .iter()
        .map(|r| WeightedRow {
            context: r.context,
            group: r.group,
            target: if r.cost_neg > r.cost_pos {
                Label::Pos
            } else {
                Label::Neg
            },
            weight: (r.cost_neg - r.cost_pos).abs(),
        })
        .collect();
    let total_weight = rows.iter().map(|r| r.weight).sum();
    WeightedInstance { rows, total_weight }
}

/// `Σ_j min(c⁻¹_j, c⁺¹_j)`: the constant separating CSC cost from
/// weighted error.
pub fn csc_offset(inst: &CscInstance) -> f64 {
    inst.rows.iter().map(|r| r.cost_neg.min(r.cost_pos)).sum()
}

pub fn normalize_weights(w: &WeightedInstance) -> Result<WeightedInstance> {
    if !(w.total_weight > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let rows: Vec<WeightedRow> = w
        .rows
        .iter()
        .map(|r| WeightedRow {
            weight: r.weight / w.total_weight,
            ..*r
        })
        .collect();
    let total_weight = rows.iter().map(|r| r.weight).sum();
    Ok(WeightedInstance { rows, total_weight })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Hypothesis;
    use proptest::prelude::*;

    fn class3() -> HypothesisClass {
        let extra = vec![
            Hypothesis::from_fn(
                3,
                None,
                |x, _| if x.0 == 0 { Label::Pos } else { Label::Neg },
            ),
            Hypothesis::from_fn(3, None, |x, g| {
                if x.0 == 2 && g == Group::Plus {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }),
            Hypothesis::from_fn(3, None, |x, g| {
                if x.0 == 1 || g == Group::Minus {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }),
        ];
        HypothesisClass::with_specials(3, extra).unwrap()
    }

    fn row(x: usize, g: Group, cn: f64, cp: f64) -> CscRow {
        CscRow {
            context: Context(x),
            group: g,
            cost_neg: cn,
            cost_pos: cp,
        }
    }

    #[test]
    fn plus_minimizes_when_positive_is_free() {
        let class = class3();
        let inst = CscInstance::new(vec![
            row(0, Group::Plus, 1.0, 0.0),
            row(2, Group::Minus, 1.0, 0.0),
        ])
        .unwrap();
        let (i, c) = exact_csc(&inst, &class);
        assert_eq!(i, class.plus_index());
        assert_eq!(c, 0.0);
    }

    #[test]
    fn empty_instance() {
        assert_eq!(exact_csc(&CscInstance::default(), &class3()), (0, 0.0));
    }

    #[test]
    fn weighted_transform_rows() {
        let w = csc_to_weighted(
            &CscInstance::new(vec![
                row(1, Group::Plus, 1.0, 0.0),
                row(0, Group::Minus, 0.3, 0.3),
            ])
            .unwrap(),
        );
        assert_eq!(w.rows[0].target, Label::Pos);
        assert_eq!(w.rows[0].weight, 1.0);
        assert_eq!(w.rows[1].weight, 0.0);
        assert_eq!(w.rows.len(), 2);
    }

    #[test]
    fn normalization() {
        let mk = |ws: &[f64]| {
            WeightedInstance::new(
                ws.iter()
                    .map(|w| WeightedRow {
                        context: Context(0),
                        group: Group::Plus,
                        target: Label::Pos,
                        weight: *w,
                    })
                    .collect(),
            )
            .unwrap()
        };
        let n = normalize_weights(&mk(&[2.0, 2.0])).unwrap();
        assert_eq!(
            n.rows.iter().map(|r| r.weight).collect::<Vec<_>>(),
            vec![0.5, 0.5]
        );
        let n = normalize_weights(&mk(&[7.0])).unwrap();
        assert_eq!(n.rows[0].weight, 1.0);
        assert_eq!(
            normalize_weights(&mk(&[0.0, 0.0])),
            Err(Error::DegenerateWeights)
        );
    }

    #[test]
    fn non_finite_costs_rejected() {
        assert!(CscInstance::new(vec![row(0, Group::Plus, f64::NAN, 0.0)]).is_err());
    }

    fn arb_instance() -> impl Strategy<Value = CscInstance> {
        prop::collection::vec(
            (0usize..3, any::<bool>(), -5.0f64..5.0, -5.0f64..5.0),
            0..12,
        )
        .prop_map(|rs| CscInstance {
            rows: rs
                .into_iter()
                .map(|(x, g, cn, cp)| row(x, if g { Group::Plus } else { Group::Minus }, cn, cp))
                .collect(),
        })
    }

    proptest! {
        #[test]
        fn affine_identity(inst in arb_instance()) {
            let class = class3();
            let w = csc_to_weighted(&inst);
            let off = csc_offset(&inst);
            for h in class.hypotheses() {
                prop_assert!((inst.cost(h) - (w.weighted_error(h) + off)).abs() < 1e-9);
            }
        }

        #[test]
        fn exact_csc_is_minimal_and_argmin_preserved(inst in arb_instance()) {
            let class = class3();
            let (best, cost) = exact_csc(&inst, &class);
            for h in class.hypotheses() {
                prop_assert!(cost <= inst.cost(h) + 1e-9);
            }
            prop_assert!((inst.cost(class.get(best)) - cost).abs() < 1e-9);
            let w = csc_to_weighted(&inst);
            let errs: Vec<f64> = class.hypotheses().iter().map(|h| w.weighted_error(h)).collect();
            let min_err = errs.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!((errs[best] - min_err).abs() < 1e-9);
            if let Ok(n) = normalize_weights(&w) {
                let nerrs: Vec<f64> = class.hypotheses().iter().map(|h| n.weighted_error(h)).collect();
                let nmin = nerrs.iter().cloned().fold(f64::INFINITY, f64::min);
                prop_assert!((nerrs[best] - nmin).abs() < 1e-9);
                prop_assert!((n.total_weight - 1.0).abs() < 1e-12);
            }
        }
    }
}
