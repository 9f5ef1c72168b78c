use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RateFunctional;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum EpochMode {
    /// Re-solve the feasibility program every phase-two round.
    #[default]
    EveryRound,
    /// Re-solve at phase-two rounds 1, 2, 4, 8, ... and hold `μ` fixed in
    /// between.
    Doubling,
}

/// Horizon, exploration length and all constants of one learner run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub horizon: usize,
    /// Explicit exploration length; derived from `alpha` or `t0_constant`
    /// when absent.
    pub t0: Option<usize>,
    /// Exploration exponent: `T0 = ⌈T^{2α}⌉`.
    pub alpha: Option<f64>,
    pub t0_constant: f64,
    pub gamma: f64,
    pub delta: f64,
    pub nu: f64,
    pub eta: f64,
    pub mu_constant: f64,
    pub mu_max: f64,
    pub epoch_mode: EpochMode,
    pub theory_constants: bool,
    pub functional: RateFunctional,
    pub dual_bound: f64,
    /// Start each solve from the previous `Q` instead of zero.
    pub warm_start: bool,
    /// Log exploration rounds into the IPS history with propensity one.
    pub fold_exploration: bool,
}

impl Schedule {
    /// Defaults: `ν = 1/T`, `η = 1/T²`, `c_μ = 0.1`, `μ ≤ 0.25`.
    pub fn new(horizon: usize, gamma: f64, delta: f64) -> Self {
        let t = horizon.max(1) as f64;
        Self {
            horizon,
            t0: None,
            alpha: None,
            t0_constant: 1.0,
            gamma,
            delta,
            nu: 1.0 / t,
            eta: 1.0 / (t * t),
            mu_constant: 0.1,
            mu_max: 0.25,
            epoch_mode: EpochMode::EveryRound,
            theory_constants: false,
            functional: RateFunctional::FalsePositive,
            dual_bound: 2.0,
            warm_start: false,
            fold_exploration: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.horizon < 2 {
            return bad(format!("horizon T = {} must be at least 2", self.horizon));
        }
        if let Some(t0) = self.t0 {
            if t0 > self.horizon {
                return bad(format!("T0 = {t0} exceeds T = {}", self.horizon));
            }
        }
        if let Some(a) = self.alpha {
            if !(0.25..=0.5).contains(&a) {
                return bad(format!("alpha = {a} must lie in [0.25, 0.5]"));
            }
        }
        if !(self.t0_constant > 0.0) {
            return bad(format!("T0 constant {} must be > 0", self.t0_constant));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma = {} must be >= 0", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.nu > 0.0) {
            return bad(format!("nu = {} must be > 0", self.nu));
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta = {} must be > 0", self.eta));
        }
        if !(self.mu_constant > 0.0) {
            return bad(format!("mu constant {} must be > 0", self.mu_constant));
        }
        if !(self.mu_max > 0.0 && self.mu_max < 0.5) {
            return bad(format!("mu_max = {} must lie in (0, 0.5)", self.mu_max));
        }
        if !(self.dual_bound > 0.0) {
            return bad(format!("dual bound {} must be > 0", self.dual_bound));
        }
        Ok(())
    }

    /// Exploration length for a class of `h_size` hypotheses, capped at `T`.
    pub fn resolve_t0(&self, h_size: usize) -> usize {
        let t = self.horizon as f64;
        let t0 = match (self.t0, self.alpha) {
            (Some(t0), _) => t0,
            (None, Some(a)) => t.powf(2.0 * a).ceil() as usize,
            (None, None) => {
                (self.t0_constant * (t * (h_size as f64 / self.delta).ln()).sqrt()).ceil() as usize
            }
        };
        t0.min(self.horizon)
    }

    pub fn mu_coefficient(&self) -> f64 {
        if self.theory_constants {
            3.2
        } else {
            self.mu_constant
        }
    }
}

/// `μ_t = min(c · ln(⌈|H|²/η⌉ · T/δ) / √t, μ_max)` with `c = 3.2` in
/// theory mode and `c_μ` otherwise. `t` counts phase-two rounds.
pub fn mu_schedule(t_phase2: usize, schedule: &Schedule, h_size: usize) -> f64 {
    let net = ((h_size * h_size) as f64 / schedule.eta).ceil();
    let log_term = (net * schedule.horizon as f64 / schedule.delta).ln();
    let raw = schedule.mu_coefficient() * log_term / (t_phase2.max(1) as f64).sqrt();
    raw.min(schedule.mu_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let s = Schedule::new(1000, 0.1, 0.05);
        assert_eq!(s.nu, 1e-3);
        assert_eq!(s.eta, 1e-6);
        assert!(s.validate().is_ok());
        let mut bad = s.clone();
        bad.mu_max = 0.5;
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.t0 = Some(1001);
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.alpha = Some(0.6);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn t0_modes() {
        let mut s = Schedule::new(10_000, 0.1, 0.05);
        let expected = (10_000f64 * (6.0f64 / 0.05).ln()).sqrt().ceil() as usize;
        assert_eq!(s.resolve_t0(6), expected);
        s.alpha = Some(0.25);
        assert_eq!(s.resolve_t0(6), 100);
        s.alpha = Some(0.5);
        assert_eq!(s.resolve_t0(6), 10_000);
        s.t0 = Some(7);
        assert_eq!(s.resolve_t0(6), 7);
    }

    #[test]
    fn mu_cap_and_tail() {
        let s = Schedule::new(10_000, 0.1, 0.01);
        assert_eq!(mu_schedule(1, &s, 6), 0.25);
        let a = mu_schedule(1_000_000, &s, 6);
        let b = mu_schedule(4_000_000, &s, 6);
        assert!((a / b - 2.0).abs() < 1e-12);
        let mut prev = f64::INFINITY;
        for t in 1..5000 {
            let m = mu_schedule(t, &s, 6);
            assert!(m <= prev);
            prev = m;
        }
    }
}
