//! Replicated runs and result files.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! config.txt            effective configuration
//! summary.json          aggregate results (deterministic)
//! timing.json           wall-clock seconds (the only nondeterministic file)
//! runs/trace_0000.csv   per-round trace of replication 0
//! runs/audit_0000.csv   per-round fairness audit of replication 0
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use fairtaste_core::bandit::write_trace_csv;
use fairtaste_core::instances::{
    constant_plus, explore_then_exploit, lowerbound_pair, random_tabular,
};
use fairtaste_core::io::read_instance_file;
use fairtaste_core::metrics::{cumulative_regret, write_audit_csv, FairnessAuditRecord};
use fairtaste_core::{
    brute_force_best_fair, run, HypothesisClass, MixturePolicy, RunOutput, Schedule,
    TabularDistribution,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Algorithm, ExperimentConfig, InstanceSource, LowerBoundSide};
use crate::error::{CliError, Result};

pub const WORKERS_ENV: &str = "FAIRTASTE_WORKERS";

#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub distribution: TabularDistribution,
    pub class: HypothesisClass,
    pub description: String,
}

pub fn load_instance(cfg: &ExperimentConfig) -> Result<LoadedInstance> {
    match &cfg.instance {
        InstanceSource::LowerBound => {
            let g = cfg.instance_gamma.unwrap_or(cfg.gamma);
            let lb = lowerbound_pair(g)?;
            let (d, side) = match cfg.distribution {
                LowerBoundSide::D1 => (lb.d1, "d1"),
                LowerBoundSide::D2 => (lb.d2, "d2"),
            };
            Ok(LoadedInstance {
                distribution: d,
                class: lb.class,
                description: format!("lowerbound {side} gamma={g:?}"),
            })
        }
        InstanceSource::Random => {
            let (d, class) = random_tabular(
                cfg.random_contexts,
                cfg.random_hypotheses,
                cfg.random_seed,
                0.05,
            )?;
            Ok(LoadedInstance {
                distribution: d,
                class,
                description: format!(
                    "random contexts={} hypotheses={} seed={}",
                    cfg.random_contexts, cfg.random_hypotheses, cfg.random_seed
                ),
            })
        }
        InstanceSource::File(path) => {
            let inst = read_instance_file(path)?;
            let missing =
                |what: &str| CliError::Invalid(format!("{}: no {what} given", path.display()));
            let d = inst.distribution.ok_or_else(|| missing("distribution"))?;
            let class = inst.class.ok_or_else(|| missing("hypotheses"))?;
            let class =
                HypothesisClass::with_specials(class.num_contexts(), class.hypotheses().to_vec())?;
            Ok(LoadedInstance {
                distribution: d,
                class,
                description: format!("file {}", path.display()),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub replication: usize,
    pub seed: u64,
    pub regret: f64,
    pub t0: usize,
    pub beta: f64,
    pub threshold: f64,
    pub max_abs_gap: f64,
    pub violated: bool,
    pub violating_rounds: usize,
    pub solves: usize,
    pub oracle_calls: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub round: usize,
    pub mean_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub config: String,
    pub instance: String,
    pub algorithm: String,
    pub horizon: usize,
    pub replications: usize,
    pub seeds: Vec<u64>,
    pub benchmark_gamma: f64,
    pub benchmark_loss: f64,
    pub benchmark_policy: MixturePolicy,
    pub t0: usize,
    pub beta_mean: f64,
    pub mean_regret: f64,
    pub stderr_regret: f64,
    pub violation_fraction: f64,
    pub curve: Vec<CurvePoint>,
    pub runs: Vec<RunSummary>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub wall_clock_seconds: f64,
}

/// Rounds at which the regret curve is sampled: every round up to
/// `points`, else `⌈k T / points⌉` for `k = 1..=points`.
pub fn curve_rounds(horizon: usize, points: usize) -> Vec<usize> {
    if horizon <= points {
        (1..=horizon).collect()
    } else {
        (1..=points)
            .map(|k| (k * horizon).div_ceil(points))
            .collect()
    }
}

/// Worker count from `FAIRTASTE_WORKERS`, defaulting to the available
/// parallelism.
pub fn workers_from_env() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Invalid(format!(
                "{WORKERS_ENV} = {v:?} is not a positive integer"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)),
    }
}

pub fn run_algorithm(
    cfg: &ExperimentConfig,
    schedule: &Schedule,
    inst: &LoadedInstance,
    seed: u64,
) -> Result<RunOutput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d, class) = (&inst.distribution, &inst.class);
    let out = match cfg.algorithm {
        Algorithm::FairBandit => run(d, class, schedule, &mut rng)?,
        Algorithm::ExploreThenExploit => explore_then_exploit(
            d,
            class,
            cfg.horizon,
            cfg.gamma,
            cfg.delta,
            cfg.functional,
            &mut rng,
        )?,
        Algorithm::ConstantPlus => constant_plus(d, class, cfg.horizon, cfg.functional, &mut rng)?,
    };
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn run_one(
    cfg: &ExperimentConfig,
    schedule: &Schedule,
    inst: &LoadedInstance,
    benchmark: f64,
    rounds: &[usize],
    replication: usize,
) -> Result<(RunSummary, Vec<f64>)> {
    let seed = cfg.base_seed.wrapping_add(replication as u64);
    let out = run_algorithm(cfg, schedule, inst, seed)?;
    let losses = out.losses();
    let threshold = cfg.gamma + out.beta;
    let audit: Vec<FairnessAuditRecord> = out
        .trace
        .iter()
        .map(|r| FairnessAuditRecord::new(r.round, r.true_gap, threshold))
        .collect();
    let violating_rounds = audit.iter().filter(|r| r.violated).count();

    let mut curve = Vec::with_capacity(rounds.len());
    let mut next = rounds.iter().peekable();
    let mut total = 0.0;
    for (i, l) in losses.iter().enumerate() {
        total += l - benchmark;
        if next.peek() == Some(&&(i + 1)) {
            curve.push(total);
            next.next();
        }
    }

    if cfg.per_run_files {
        let dir = cfg.output_dir.join("runs");
        let path = dir.join(format!("trace_{replication:04}.csv"));
        let mut w = create(&path)?;
        write_trace_csv(&mut w, &out.trace)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        let path = dir.join(format!("audit_{replication:04}.csv"));
        let mut w = create(&path)?;
        write_audit_csv(&mut w, &audit)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
    }

    Ok((
        RunSummary {
            replication,
            seed,
            regret: cumulative_regret(&losses, benchmark),
            t0: out.t0,
            beta: out.beta,
            threshold,
            max_abs_gap: out.max_abs_gap(),
            violated: violating_rounds > 0,
            violating_rounds,
            solves: out.solves,
            oracle_calls: out.oracle_calls,
        },
        curve,
    ))
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

/// Runs the configured experiment with the worker count from the
/// environment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    run_experiment_with(cfg, workers_from_env()?)
}

pub fn run_experiment_with(cfg: &ExperimentConfig, workers: usize) -> Result<Outcome> {
    let start = Instant::now();
    cfg.validate()?;
    let schedule = cfg.schedule();
    let inst = load_instance(cfg)?;
    let (benchmark_policy, benchmark) = brute_force_best_fair(
        &inst.distribution,
        &inst.class,
        cfg.benchmark_gamma,
        cfg.functional,
    )?;
    let rounds = curve_rounds(cfg.horizon, cfg.curve_points);

    let out_dir = &cfg.output_dir;
    let runs_dir = out_dir.join("runs");
    let dir = if cfg.per_run_files {
        &runs_dir
    } else {
        out_dir
    };
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Invalid(format!("cannot build worker pool: {e}")))?;
    let results: Vec<(RunSummary, Vec<f64>)> = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|i| run_one(cfg, &schedule, &inst, benchmark, &rounds, i))
            .collect::<Result<Vec<_>>>()
    })?;

    let n = results.len() as f64;
    let regrets: Vec<f64> = results.iter().map(|r| r.0.regret).collect();
    let (mean_regret, stderr_regret) = mean_and_stderr(&regrets);
    let curve = rounds
        .iter()
        .enumerate()
        .map(|(k, &round)| CurvePoint {
            round,
            mean_regret: results.iter().map(|r| r.1[k]).sum::<f64>() / n,
        })
        .collect();
    let runs: Vec<RunSummary> = results.into_iter().map(|r| r.0).collect();
    let summary = Summary {
        config: cfg.to_text(),
        instance: inst.description.clone(),
        algorithm: cfg.algorithm.name().to_string(),
        horizon: cfg.horizon,
        replications: cfg.replications,
        seeds: runs.iter().map(|r| r.seed).collect(),
        benchmark_gamma: cfg.benchmark_gamma,
        benchmark_loss: benchmark,
        benchmark_policy,
        t0: runs[0].t0,
        beta_mean: runs.iter().map(|r| r.beta).sum::<f64>() / n,
        mean_regret,
        stderr_regret,
        violation_fraction: runs.iter().filter(|r| r.violated).count() as f64 / n,
        curve,
        runs,
    };

    let path = out_dir.join("config.txt");
    fs::write(&path, cfg.to_text()).map_err(|e| CliError::io(&path, e))?;
    write_json(&out_dir.join("summary.json"), &summary)?;
    let wall_clock_seconds = start.elapsed().as_secs_f64();
    write_json(
        &out_dir.join("timing.json"),
        &serde_json::json!({ "wall_clock_seconds": wall_clock_seconds, "workers": workers }),
    )?;
    Ok(Outcome {
        summary,
        wall_clock_seconds,
    })
}
