//! Experiment configuration.
//!
//! The config file is flat `key = value` text; `#` starts a comment and
//! blank lines are ignored. Every key is optional:
//!
//! ```text
//! instance = lowerbound        # lowerbound | file:<path> | random
//! instance_gamma = 0.1         # lower-bound instance parameter (default: gamma)
//! distribution = d1            # d1 | d2, lower-bound instance only
//! random_contexts = 3
//! random_hypotheses = 8
//! random_seed = 0
//! algorithm = fair_bandit      # fair_bandit | explore_then_exploit | constant_plus
//! T = 4000
//! T0 = 200                     # explicit exploration length
//! alpha = 0.3                  # T0 = ceil(T^(2 alpha)) when T0 is absent
//! t0_constant = 1
//! gamma = 0.1
//! delta = 0.05
//! nu = 0.00025                 # default 1/T
//! eta = 6.25e-8                # default 1/T^2
//! mu_constant = 0.1
//! mu_max = 0.25
//! epoch_mode = every_round     # every_round | doubling
//! theory_constants = false
//! functional = fpr             # fpr | fnr | positive_rate
//! dual_bound = 2
//! warm_start = false
//! fold_exploration = false
//! benchmark_gamma = 0          # fairness level of the regret benchmark
//! replications = 1
//! seed = 0
//! per_run_files = true         # write per-run trace and audit CSVs
//! curve_points = 200
//! out = results
//! ```
//!
//! Command-line flags go through the same setter after the file, so they
//! override file values.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use fairtaste_core::{EpochMode, RateFunctional, Schedule};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InstanceSource {
    LowerBound,
    File(PathBuf),
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    FairBandit,
    ExploreThenExploit,
    ConstantPlus,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::FairBandit => "fair_bandit",
            Algorithm::ExploreThenExploit => "explore_then_exploit",
            Algorithm::ConstantPlus => "constant_plus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LowerBoundSide {
    D1,
    D2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub instance: InstanceSource,
    pub instance_gamma: Option<f64>,
    pub distribution: LowerBoundSide,
    pub random_contexts: usize,
    pub random_hypotheses: usize,
    pub random_seed: u64,
    pub algorithm: Algorithm,
    pub horizon: usize,
    pub t0: Option<usize>,
    pub alpha: Option<f64>,
    pub t0_constant: f64,
    pub gamma: f64,
    pub delta: f64,
    pub nu: Option<f64>,
    pub eta: Option<f64>,
    pub mu_constant: f64,
    pub mu_max: f64,
    pub epoch_mode: EpochMode,
    pub theory_constants: bool,
    pub functional: RateFunctional,
    pub dual_bound: f64,
    pub warm_start: bool,
    pub fold_exploration: bool,
    pub benchmark_gamma: f64,
    pub replications: usize,
    pub base_seed: u64,
    pub per_run_files: bool,
    pub curve_points: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let s = Schedule::new(1000, 0.1, 0.05);
        Self {
            instance: InstanceSource::LowerBound,
            instance_gamma: None,
            distribution: LowerBoundSide::D1,
            random_contexts: 3,
            random_hypotheses: 8,
            random_seed: 0,
            algorithm: Algorithm::FairBandit,
            horizon: s.horizon,
            t0: None,
            alpha: None,
            t0_constant: s.t0_constant,
            gamma: s.gamma,
            delta: s.delta,
            nu: None,
            eta: None,
            mu_constant: s.mu_constant,
            mu_max: s.mu_max,
            epoch_mode: s.epoch_mode,
            theory_constants: s.theory_constants,
            functional: s.functional,
            dual_bound: s.dual_bound,
            warm_start: s.warm_start,
            fold_exploration: s.fold_exploration,
            benchmark_gamma: 0.0,
            replications: 1,
            base_seed: 0,
            per_run_files: true,
            curve_points: 200,
            output_dir: PathBuf::from("results"),
        }
    }
}

/// Where a setting came from, for error messages.
#[derive(Debug, Clone, Copy)]
pub enum Origin<'a> {
    Line(usize),
    Flag(&'a str),
}

fn fail(origin: Origin<'_>, message: String) -> CliError {
    match origin {
        Origin::Line(line) => CliError::Config { line, message },
        Origin::Flag(flag) => CliError::Flag {
            flag: flag.to_string(),
            message,
        },
    }
}

fn num<T: std::str::FromStr>(origin: Origin<'_>, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| fail(origin, format!("{key}: cannot parse {value:?}")))
}

fn boolean(origin: Origin<'_>, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(fail(
            origin,
            format!("{key}: expected true or false, got {value:?}"),
        )),
    }
}

fn optional<T: std::str::FromStr>(origin: Origin<'_>, key: &str, value: &str) -> Result<Option<T>> {
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        num(origin, key, value).map(Some)
    }
}

pub fn parse_algorithm(value: &str) -> Option<Algorithm> {
    match value.to_ascii_lowercase().replace('-', "_").as_str() {
        "fair_bandit" | "fairbandit" => Some(Algorithm::FairBandit),
        "explore_then_exploit" | "explorethenexploit" | "ete" => {
            Some(Algorithm::ExploreThenExploit)
        }
        "constant_plus" | "constantplus" => Some(Algorithm::ConstantPlus),
        _ => None,
    }
}

pub fn parse_epoch_mode(value: &str) -> Option<EpochMode> {
    match value.to_ascii_lowercase().replace('-', "_").as_str() {
        "every_round" | "everyround" => Some(EpochMode::EveryRound),
        "doubling" => Some(EpochMode::Doubling),
        _ => None,
    }
}

fn functional_name(f: RateFunctional) -> &'static str {
    match f {
        RateFunctional::FalsePositive => "fpr",
        RateFunctional::FalseNegative => "fnr",
        RateFunctional::PositiveRate => "positive_rate",
    }
}

fn epoch_name(m: EpochMode) -> &'static str {
    match m {
        EpochMode::EveryRound => "every_round",
        EpochMode::Doubling => "doubling",
    }
}

fn opt_text<T: std::fmt::Debug>(v: &Option<T>) -> String {
    match v {
        Some(x) => format!("{x:?}"),
        None => "auto".into(),
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str, origin: Origin<'_>) -> Result<()> {
        let value = value.trim();
        match key {
            "instance" => {
                self.instance = match value {
                    "lowerbound" | "builtin" => InstanceSource::LowerBound,
                    "random" => InstanceSource::Random,
                    v => match v.strip_prefix("file:") {
                        Some(p) if !p.is_empty() => InstanceSource::File(PathBuf::from(p)),
                        _ => return Err(fail(
                            origin,
                            format!(
                                "instance: expected lowerbound, random or file:<path>, got {v:?}"
                            ),
                        )),
                    },
                }
            }
            "instance_gamma" => self.instance_gamma = optional(origin, key, value)?,
            "distribution" => {
                self.distribution = match value.to_ascii_lowercase().as_str() {
                    "d1" => LowerBoundSide::D1,
                    "d2" => LowerBoundSide::D2,
                    _ => {
                        return Err(fail(
                            origin,
                            format!("distribution: expected d1 or d2, got {value:?}"),
                        ))
                    }
                }
            }
            "random_contexts" => self.random_contexts = num(origin, key, value)?,
            "random_hypotheses" => self.random_hypotheses = num(origin, key, value)?,
            "random_seed" => self.random_seed = num(origin, key, value)?,
            "algorithm" => {
                self.algorithm = parse_algorithm(value).ok_or_else(|| {
                    fail(origin, format!("algorithm: unknown algorithm {value:?}"))
                })?
            }
            "T" | "horizon" => self.horizon = num(origin, key, value)?,
            "T0" | "t0" => self.t0 = optional(origin, key, value)?,
            "alpha" => self.alpha = optional(origin, key, value)?,
            "t0_constant" => self.t0_constant = num(origin, key, value)?,
            "gamma" => self.gamma = num(origin, key, value)?,
            "delta" => self.delta = num(origin, key, value)?,
            "nu" => self.nu = optional(origin, key, value)?,
            "eta" => self.eta = optional(origin, key, value)?,
            "mu_constant" => self.mu_constant = num(origin, key, value)?,
            "mu_max" => self.mu_max = num(origin, key, value)?,
            "epoch_mode" => {
                self.epoch_mode = parse_epoch_mode(value).ok_or_else(|| {
                    fail(
                        origin,
                        format!("epoch_mode: expected every_round or doubling, got {value:?}"),
                    )
                })?
            }
            "theory_constants" => self.theory_constants = boolean(origin, key, value)?,
            "functional" => {
                self.functional = match value.to_ascii_lowercase().as_str() {
                    "fpr" | "false_positive" => RateFunctional::FalsePositive,
                    "fnr" | "false_negative" => RateFunctional::FalseNegative,
                    "positive_rate" | "pr" => RateFunctional::PositiveRate,
                    _ => {
                        return Err(fail(
                            origin,
                            format!("functional: unknown functional {value:?}"),
                        ))
                    }
                }
            }
            "dual_bound" => self.dual_bound = num(origin, key, value)?,
            "warm_start" => self.warm_start = boolean(origin, key, value)?,
            "fold_exploration" => self.fold_exploration = boolean(origin, key, value)?,
            "benchmark_gamma" => self.benchmark_gamma = num(origin, key, value)?,
            "replications" => self.replications = num(origin, key, value)?,
            "seed" | "base_seed" => self.base_seed = num(origin, key, value)?,
            "per_run_files" => self.per_run_files = boolean(origin, key, value)?,
            "curve_points" => self.curve_points = num(origin, key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            other => return Err(fail(origin, format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| CliError::Config {
                line,
                message: "expected `key = value`".into(),
            })?;
            self.set(key.trim(), value, Origin::Line(line))?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn schedule(&self) -> Schedule {
        let mut s = Schedule::new(self.horizon, self.gamma, self.delta);
        s.t0 = self.t0;
        s.alpha = self.alpha;
        s.t0_constant = self.t0_constant;
        if let Some(nu) = self.nu {
            s.nu = nu;
        }
        if let Some(eta) = self.eta {
            s.eta = eta;
        }
        s.mu_constant = self.mu_constant;
        s.mu_max = self.mu_max;
        s.epoch_mode = self.epoch_mode;
        s.theory_constants = self.theory_constants;
        s.functional = self.functional;
        s.dual_bound = self.dual_bound;
        s.warm_start = self.warm_start;
        s.fold_exploration = self.fold_exploration;
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(CliError::Invalid("replications must be >= 1".into()));
        }
        if self.curve_points < 1 {
            return Err(CliError::Invalid("curve_points must be >= 1".into()));
        }
        if !(self.benchmark_gamma >= 0.0) {
            return Err(CliError::Invalid(format!(
                "benchmark_gamma = {} must be >= 0",
                self.benchmark_gamma
            )));
        }
        self.schedule().validate()?;
        Ok(())
    }

    /// The effective configuration in the file format; parsing it back
    /// yields the same config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let instance = match &self.instance {
            InstanceSource::LowerBound => "lowerbound".to_string(),
            InstanceSource::Random => "random".to_string(),
            InstanceSource::File(p) => format!("file:{}", p.display()),
        };
        let side = match self.distribution {
            LowerBoundSide::D1 => "d1",
            LowerBoundSide::D2 => "d2",
        };
        let rows: Vec<(&str, String)> = vec![
            ("instance", instance),
            ("instance_gamma", opt_text(&self.instance_gamma)),
            ("distribution", side.into()),
            ("random_contexts", self.random_contexts.to_string()),
            ("random_hypotheses", self.random_hypotheses.to_string()),
            ("random_seed", self.random_seed.to_string()),
            ("algorithm", self.algorithm.name().into()),
            ("T", self.horizon.to_string()),
            ("T0", opt_text(&self.t0)),
            ("alpha", opt_text(&self.alpha)),
            ("t0_constant", format!("{:?}", self.t0_constant)),
            ("gamma", format!("{:?}", self.gamma)),
            ("delta", format!("{:?}", self.delta)),
            ("nu", opt_text(&self.nu)),
            ("eta", opt_text(&self.eta)),
            ("mu_constant", format!("{:?}", self.mu_constant)),
            ("mu_max", format!("{:?}", self.mu_max)),
            ("epoch_mode", epoch_name(self.epoch_mode).into()),
            ("theory_constants", self.theory_constants.to_string()),
            ("functional", functional_name(self.functional).into()),
            ("dual_bound", format!("{:?}", self.dual_bound)),
            ("warm_start", self.warm_start.to_string()),
            ("fold_exploration", self.fold_exploration.to_string()),
            ("benchmark_gamma", format!("{:?}", self.benchmark_gamma)),
            ("replications", self.replications.to_string()),
            ("seed", self.base_seed.to_string()),
            ("per_run_files", self.per_run_files.to_string()),
            ("curve_points", self.curve_points.to_string()),
            ("out", self.output_dir.display().to_string()),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
