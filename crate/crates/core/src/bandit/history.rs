use crate::error::{Error, Result};
use crate::types::{cell_index, Context, Group, HypothesisClass, Label, MixturePolicy};

/// The halved apple-tasting loss matrix, computable from observed feedback:
/// a positive prediction reveals the label and costs 1 on a negative, a
/// negative prediction costs 0.5 whatever the hidden label.
///
/// Summed over a sequence this equals the 0-1 loss plus half the number of
/// negatives, so it ranks policies exactly as the 0-1 loss does.
pub fn apple_to_bandit_loss(action: Label, label: Option<Label>) -> Result<f64> {
    match (action, label) {
        (Label::Pos, Some(Label::Pos)) => Ok(0.0),
        (Label::Pos, Some(Label::Neg)) => Ok(1.0),
        (Label::Neg, None) => Ok(0.5),
        (Label::Pos, None) => Err(Error::Contract(
            "a positive prediction always reveals the label".into(),
        )),
        (Label::Neg, Some(_)) => Err(Error::Contract(
            "a negative prediction never reveals the label".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub context: Context,
    pub group: Group,
    pub action: Label,
    pub propensity: f64,
    pub observed_bandit_loss: f64,
    pub raw_label_observed: Option<Label>,
}

impl RoundRecord {
    pub fn cell(&self) -> usize {
        cell_index(self.context, self.group)
    }
}

/// Logged phase-two rounds with per-cell sufficient statistics: visit
/// counts and `Σ ℓ/p` per action.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    num_contexts: usize,
    records: Vec<RoundRecord>,
    counts: Vec<usize>,
    ips: Vec<[f64; 2]>,
}

impl History {
    pub fn new(num_contexts: usize) -> Self {
        Self {
            num_contexts,
            records: Vec::new(),
            counts: vec![0; num_contexts * 2],
            ips: vec![[0.0; 2]; num_contexts * 2],
        }
    }

    pub fn push(&mut self, rec: RoundRecord) -> Result<()> {
        if rec.context.0 >= self.num_contexts {
            return Err(Error::ContextOutOfRange {
                context: rec.context.0,
                num_contexts: self.num_contexts,
            });
        }
        if let Some(last) = self.records.last() {
            if rec.round <= last.round {
                return Err(Error::Contract(format!(
                    "round {} logged after round {}",
                    rec.round, last.round
                )));
            }
        }
        if !(rec.propensity > 0.0 && rec.propensity <= 1.0) {
            return Err(Error::Contract(format!(
                "propensity {} outside (0, 1]",
                rec.propensity
            )));
        }
        let expected = apple_to_bandit_loss(rec.action, rec.raw_label_observed)?;
        if rec.observed_bandit_loss != expected {
            return Err(Error::Contract(format!(
                "logged loss {} but feedback implies {expected}",
                rec.observed_bandit_loss
            )));
        }
        let c = rec.cell();
        self.counts[c] += 1;
        self.ips[c][rec.action.index()] += rec.observed_bandit_loss / rec.propensity;
        self.records.push(rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }

    pub fn num_cells(&self) -> usize {
        self.num_contexts * 2
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn cell_count(&self, cell: usize) -> usize {
        self.counts[cell]
    }

    /// `Σ_s ℓ_s / p_s` over rounds at `cell` that played `action`.
    pub fn ips_sum(&self, cell: usize, action: Label) -> f64 {
        self.ips[cell][action.index()]
    }

    /// IPS estimate for a policy given as per-cell `Pr[π = +1]`.
    pub(crate) fn ips_from_table(&self, pos: &[f64]) -> f64 {
        let t = self.len() as f64;
        let mut total = 0.0;
        for (c, &p) in pos.iter().enumerate() {
            total +=
                p * self.ips[c][Label::Pos.index()] + (1.0 - p) * self.ips[c][Label::Neg.index()];
        }
        total / t
    }
}

/// `L̂(π) = (1/t) Σ_s ℓ_s Pr[π(x_s) = ŷ_s] / p_s`.
pub fn ips_loss(pi: &MixturePolicy, class: &HypothesisClass, h: &History) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::EmptyHistory);
    }
    pi.check_indices(class)?;
    Ok(h.ips_from_table(&pi.positive_table(class)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Hypothesis;

    fn rec(round: usize, action: Label, label: Option<Label>, p: f64) -> RoundRecord {
        RoundRecord {
            round,
            context: Context(0),
            group: Group::Plus,
            action,
            propensity: p,
            observed_bandit_loss: apple_to_bandit_loss(action, label).unwrap(),
            raw_label_observed: label,
        }
    }

    #[test]
    fn transform_entries() {
        assert_eq!(
            apple_to_bandit_loss(Label::Pos, Some(Label::Pos)).unwrap(),
            0.0
        );
        assert_eq!(
            apple_to_bandit_loss(Label::Pos, Some(Label::Neg)).unwrap(),
            1.0
        );
        assert_eq!(apple_to_bandit_loss(Label::Neg, None).unwrap(), 0.5);
        assert!(apple_to_bandit_loss(Label::Neg, Some(Label::Pos)).is_err());
        assert!(apple_to_bandit_loss(Label::Pos, None).is_err());
    }

    #[test]
    fn ips_examples() {
        let class = HypothesisClass::with_specials(1, vec![]).unwrap();
        let mut h = History::new(1);
        assert_eq!(
            ips_loss(&MixturePolicy::pure(0), &class, &h),
            Err(Error::EmptyHistory)
        );
        h.push(rec(1, Label::Pos, Some(Label::Neg), 0.5)).unwrap();
        let plus = MixturePolicy::pure(class.plus_index());
        let minus = MixturePolicy::pure(class.minus_index());
        assert_eq!(ips_loss(&plus, &class, &h).unwrap(), 2.0);
        assert_eq!(ips_loss(&minus, &class, &h).unwrap(), 0.0);
        let half = MixturePolicy::new(vec![(class.plus_index(), 0.5), (class.minus_index(), 0.5)])
            .unwrap();
        assert_eq!(ips_loss(&half, &class, &h).unwrap(), 1.0);
        assert_eq!(class.get(class.plus_index()), &Hypothesis::plus(1));
    }

    #[test]
    fn push_validates() {
        let mut h = History::new(1);
        h.push(rec(3, Label::Neg, None, 0.2)).unwrap();
        assert!(h.push(rec(3, Label::Neg, None, 0.2)).is_err());
        assert!(h.push(rec(4, Label::Neg, None, 0.0)).is_err());
        let mut bad = rec(5, Label::Neg, None, 0.5);
        bad.observed_bandit_loss = 1.0;
        assert!(h.push(bad).is_err());
        let mut far = rec(6, Label::Neg, None, 0.5);
        far.context = Context(1);
        assert!(h.push(far).is_err());
        assert_eq!(h.len(), 1);
        assert_eq!(h.cell_count(1), 1);
        assert!((h.ips_sum(1, Label::Neg) - 2.5).abs() < 1e-15);
    }
}
