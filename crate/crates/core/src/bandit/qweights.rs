use rand::Rng;

use crate::types::{HypothesisClass, Label, MixturePolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct QAtom {
    pub policy: MixturePolicy,
    pub weight: f64,
    key: Vec<(usize, i64)>,
    /// Per-cell `Pr[π = +1]`.
    pos: Vec<f64>,
}

impl QAtom {
    pub fn positive_table(&self) -> &[f64] {
        &self.pos
    }
}

/// A sub-distribution over policies plus the anchor `π₀` that receives
/// whatever mass the atoms leave over.
#[derive(Debug, Clone, PartialEq)]
pub struct QWeights {
    atoms: Vec<QAtom>,
    anchor: MixturePolicy,
    anchor_pos: Vec<f64>,
}

/// `Q^μ(ŷ | cell)` for every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedTable {
    pub pos: Vec<f64>,
    pub neg: Vec<f64>,
}

impl SmoothedTable {
    #[inline]
    pub fn prob(&self, cell: usize, yhat: Label) -> f64 {
        match yhat {
            Label::Pos => self.pos[cell],
            Label::Neg => self.neg[cell],
        }
    }
}

impl QWeights {
    pub fn new(anchor: MixturePolicy, class: &HypothesisClass) -> Self {
        let anchor_pos = anchor.positive_table(class);
        Self {
            atoms: Vec::new(),
            anchor,
            anchor_pos,
        }
    }

    pub fn atoms(&self) -> &[QAtom] {
        &self.atoms
    }

    pub fn anchor(&self) -> &MixturePolicy {
        &self.anchor
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    /// Mass the anchor receives once the atoms are filled up to one.
    pub fn anchor_weight(&self) -> f64 {
        (1.0 - self.total_weight()).max(0.0)
    }

    /// Adds `alpha` to the atom for `pi`, creating it if absent; returns
    /// the atom's position.
    pub fn add(&mut self, pi: &MixturePolicy, alpha: f64, class: &HypothesisClass) -> usize {
        let key = pi.canonical_key();
        if let Some(i) = self.atoms.iter().position(|a| a.key == key) {
            self.atoms[i].weight += alpha;
            return i;
        }
        self.atoms.push(QAtom {
            policy: pi.clone(),
            weight: alpha,
            pos: pi.positive_table(class),
            key,
        });
        self.atoms.len() - 1
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.atoms {
            a.weight *= c;
        }
    }

    /// Replaces the anchor, keeping the atoms.
    pub fn with_anchor(mut self, anchor: MixturePolicy, class: &HypothesisClass) -> Self {
        self.anchor_pos = anchor.positive_table(class);
        self.anchor = anchor;
        self
    }

    /// `Q^μ` per cell, with or without the anchor fill. Without it, `Q` is
    /// treated as the sub-distribution it is during coordinate descent.
    pub fn smoothed(&self, mu: f64, filled: bool) -> SmoothedTable {
        let n = self.anchor_pos.len();
        let mut pos = vec![0.0; n];
        let mut total = self.total_weight();
        for a in &self.atoms {
            for (slot, p) in pos.iter_mut().zip(&a.pos) {
                *slot += a.weight * p;
            }
        }
        if filled {
            let w = self.anchor_weight();
            for (slot, p) in pos.iter_mut().zip(&self.anchor_pos) {
                *slot += w * p;
            }
            total += w;
        }
        let scale = 1.0 - 2.0 * mu;
        SmoothedTable {
            neg: pos.iter().map(|p| mu + scale * (total - p)).collect(),
            pos: pos.into_iter().map(|p| mu + scale * p).collect(),
        }
    }

    /// Filled `(policy, weight)` list: the atoms plus the anchor's share.
    pub fn filled(&self) -> Vec<(&MixturePolicy, f64)> {
        let mut out: Vec<(&MixturePolicy, f64)> =
            self.atoms.iter().map(|a| (&a.policy, a.weight)).collect();
        let w = self.anchor_weight();
        if w > 0.0 {
            out.push((&self.anchor, w));
        }
        out
    }

    /// The deployed randomized classifier as one mixture over hypotheses:
    /// `μ` on plus, `μ` on minus, and `1 − 2μ` spread over the filled `Q`.
    pub fn deployed_mixture(&self, class: &HypothesisClass, mu: f64) -> MixturePolicy {
        let mut weights = vec![0.0; class.len()];
        weights[class.plus_index()] += mu;
        weights[class.minus_index()] += mu;
        let filled = self.filled();
        let total: f64 = filled.iter().map(|(_, w)| w).sum();
        for (pi, w) in filled {
            for &(i, x) in pi.atoms() {
                weights[i] += (1.0 - 2.0 * mu) * w / total * x;
            }
        }
        MixturePolicy::from_weights(weights.into_iter().enumerate()).expect("positive total mass")
    }

    /// Draws a hypothesis from the filled `Q` (no smoothing).
    pub fn sample_hypothesis<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let filled = self.filled();
        let total: f64 = filled.iter().map(|(_, w)| w).sum();
        let mut u = rng.gen::<f64>() * total;
        for (pi, w) in &filled {
            if u < *w {
                return pi.sample(rng);
            }
            u -= w;
        }
        filled.last().expect("anchor or atom present").0.sample(rng)
    }
}

/// `Q^μ(ŷ | x) = μ + (1 − 2μ) ∫ Q(π) Pr[π(x) = ŷ] dπ` with `Q` filled to
/// a distribution by the anchor.
pub fn smoothed_prob(q: &QWeights, cell: usize, yhat: Label, mu: f64) -> f64 {
    q.smoothed(mu, true).prob(cell, yhat)
}
