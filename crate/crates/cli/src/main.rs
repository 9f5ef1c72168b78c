use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairtaste_cli::{
    load_instance, regret_slope, run_experiment_with, CliError, ExperimentConfig, Origin, Result,
    SlopePoint, WORKERS_ENV,
};
use fairtaste_core::instances::{kl_divergence, lowerbound_pair};
use fairtaste_core::io::{format_instance, Instance};
use fairtaste_core::metrics::{hypothesis_losses, GapFunctional};
use fairtaste_core::{brute_force_best_fair, Population, RateFunctional};

#[derive(Parser)]
#[command(
    name = "fairtaste",
    version,
    about = "Fair online classification under apple-tasting feedback"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated experiment and write traces, audits and a summary.
    Run(ExperimentArgs),
    /// Run an experiment and report per-replication fairness violations.
    Audit(ExperimentArgs),
    /// Brute-force the best fair policy of the configured instance.
    Benchmark(ExperimentArgs),
    /// Print the lower-bound instance pair and its tables.
    Lowerbound {
        #[arg(long)]
        gamma: f64,
        /// Write the d1 and d2 instance files into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the log-log regret slope across summary files.
    Slope {
        #[arg(required = true, num_args = 3..)]
        summaries: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    replications: Option<String>,
    #[arg(long = "T")]
    horizon: Option<String>,
    #[arg(long = "T0")]
    t0: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long)]
    nu: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long = "mu-max")]
    mu_max: Option<String>,
    #[arg(long = "mu-constant")]
    mu_constant: Option<String>,
    #[arg(long = "epoch-mode")]
    epoch_mode: Option<String>,
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings in config-file syntax.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

impl ExperimentArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let flags: [(&str, &str, &Option<String>); 13] = [
            ("--seed", "seed", &self.seed),
            ("--replications", "replications", &self.replications),
            ("--T", "T", &self.horizon),
            ("--T0", "T0", &self.t0),
            ("--alpha", "alpha", &self.alpha),
            ("--gamma", "gamma", &self.gamma),
            ("--delta", "delta", &self.delta),
            ("--nu", "nu", &self.nu),
            ("--eta", "eta", &self.eta),
            ("--mu-max", "mu_max", &self.mu_max),
            ("--mu-constant", "mu_constant", &self.mu_constant),
            ("--epoch-mode", "epoch_mode", &self.epoch_mode),
            ("--algorithm", "algorithm", &self.algorithm),
        ];
        for (flag, key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v, Origin::Flag(flag))?;
            }
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Flag {
                flag: "--set".into(),
                message: format!("expected KEY=VALUE, got {kv:?}"),
            })?;
            cfg.set(k.trim(), v, Origin::Flag("--set"))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
    }
}

fn cmd_run(args: &ExperimentArgs, audit: bool) -> Result<()> {
    let cfg = args.config()?;
    let outcome = run_experiment_with(&cfg, args.workers())?;
    let s = &outcome.summary;
    if audit {
        for r in &s.runs {
            println!(
                "replication {:>4} seed {:>6}  max|gap| {:.6}  threshold {:.6}  violating rounds {}",
                r.replication, r.seed, r.max_abs_gap, r.threshold, r.violating_rounds
            );
        }
        println!(
            "violation fraction {:.4} over {} replications (delta = {})",
            s.violation_fraction, s.replications, cfg.delta
        );
    } else {
        println!("instance        {}", s.instance);
        println!("algorithm       {}", s.algorithm);
        println!("T / T0          {} / {}", s.horizon, s.t0);
        println!("benchmark loss  {:.6}", s.benchmark_loss);
        println!(
            "mean regret     {:.3} ± {:.3}",
            s.mean_regret, s.stderr_regret
        );
        println!("mean beta       {:.6}", s.beta_mean);
        println!("violation frac  {:.4}", s.violation_fraction);
    }
    println!("wall clock      {:.3}s", outcome.wall_clock_seconds);
    println!("results in      {}", cfg.output_dir.display());
    Ok(())
}

fn cmd_benchmark(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.config()?;
    let inst = load_instance(&cfg)?;
    let (pi, loss) =
        brute_force_best_fair(&inst.distribution, &inst.class, cfg.gamma, cfg.functional)?;
    println!("instance {}  gamma {}", inst.description, cfg.gamma);
    for &(i, w) in pi.atoms() {
        println!("  {:<10} weight {w:.6}", inst.class.get(i).display_name(i));
    }
    println!("loss {loss:.12}");
    Ok(())
}

fn print_tables(
    name: &str,
    d: &fairtaste_core::TabularDistribution,
    class: &fairtaste_core::HypothesisClass,
) -> Result<()> {
    let m = d.cell_masses()?;
    let losses = hypothesis_losses(class, &m);
    let gaps = GapFunctional::new(&m, RateFunctional::FalsePositive)?.hypothesis_gaps(class);
    println!("{name}:");
    println!("  {:<10} {:>14} {:>14}", "classifier", "loss", "delta_fpr");
    for (i, h) in class.hypotheses().iter().enumerate() {
        println!(
            "  {:<10} {:>14.10} {:>14.10}",
            h.display_name(i),
            losses[i],
            gaps[i] + 0.0
        );
    }
    Ok(())
}

fn cmd_lowerbound(gamma: f64, out: Option<&PathBuf>) -> Result<()> {
    let lb = lowerbound_pair(gamma)?;
    print_tables("D1", &lb.d1, &lb.class)?;
    print_tables("D2", &lb.d2, &lb.class)?;
    let kl = kl_divergence(&lb.d1, &lb.d2)?;
    println!(
        "KL(D1 || D2) = {kl:.12e}   64 gamma^2 = {:.12e}",
        64.0 * gamma * gamma
    );
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, d) in [("d1.txt", &lb.d1), ("d2.txt", &lb.d2)] {
            let path = dir.join(name);
            let text = format_instance(&Instance {
                distribution: Some(d.clone()),
                class: Some(lb.class.clone()),
            });
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            println!("wrote {}", path.display());
        }
    } else {
        print!(
            "{}",
            format_instance(&Instance {
                distribution: Some(lb.d1.clone()),
                class: Some(lb.class.clone()),
            })
        );
    }
    Ok(())
}

fn cmd_slope(paths: &[PathBuf]) -> Result<()> {
    let mut points = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
        let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Json {
            path: p.display().to_string(),
            source: e,
        })?;
        let field = |k: &str| {
            v.get(k).and_then(|x| x.as_f64()).ok_or_else(|| {
                CliError::Invalid(format!("{}: missing numeric field {k}", p.display()))
            })
        };
        points.push(SlopePoint {
            horizon: field("horizon")?,
            mean_regret: field("mean_regret")?,
            stderr: field("stderr_regret")?,
        });
    }
    let fit = regret_slope(&points)?;
    for p in &fit.excluded {
        println!(
            "excluded T = {} (mean regret {} is not positive)",
            p.horizon, p.mean_regret
        );
    }
    println!("slope      {:.4}", fit.slope);
    println!("intercept  {:.4}", fit.intercept);
    println!("se         {:.4} (propagated)", fit.propagated_se);
    if let Some(se) = fit.residual_se {
        println!("se         {:.4} (residual)", se);
    }
    println!("95% upper  {:.4}", fit.upper_bound(1.645));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, false),
        Command::Audit(a) => cmd_run(a, true),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Lowerbound { gamma, out } => cmd_lowerbound(*gamma, out.as_ref()),
        Command::Slope { summaries } => cmd_slope(summaries),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
