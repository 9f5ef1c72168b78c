use std::fs;
use std::process::Command;

use fairtaste_cli::{run_experiment_with, Algorithm, ExperimentConfig, InstanceSource};
use fairtaste_core::EpochMode;

fn config(
    algorithm: Algorithm,
    horizon: usize,
    reps: usize,
    out: &std::path::Path,
) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        horizon,
        replications: reps,
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    }
}

#[test]
fn constant_plus_regret_is_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(Algorithm::ConstantPlus, 500, 1, dir.path());
    let s = run_experiment_with(&cfg, 1).unwrap().summary;
    // Plus loses 0.5 per round on D1; the 0-fair benchmark h2 loses 0.25 - 2 gamma.
    let per_round = 0.5 - (0.25 - 2.0 * cfg.gamma);
    assert!((s.benchmark_loss - 0.05).abs() < 1e-12);
    assert!((s.mean_regret - 500.0 * per_round).abs() < 1e-9);
    for p in &s.curve {
        assert!((p.mean_regret - p.round as f64 * per_round).abs() < 1e-9);
    }
    assert_eq!(s.curve.last().unwrap().round, 500);
}

#[test]
fn aggregate_is_mean_of_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(Algorithm::FairBandit, 800, 5, dir.path());
    cfg.epoch_mode = EpochMode::Doubling;
    let s = run_experiment_with(&cfg, 2).unwrap().summary;
    let mean = s.runs.iter().map(|r| r.regret).sum::<f64>() / 5.0;
    assert!((s.mean_regret - mean).abs() < 1e-9);
    assert!((0.0..=1.0).contains(&s.violation_fraction));
    assert_eq!(s.seeds, vec![0, 1, 2, 3, 4]);
    assert!((s.curve.last().unwrap().mean_regret - mean).abs() < 1e-9);
    for i in 0..5 {
        assert!(dir.path().join(format!("runs/trace_{i:04}.csv")).exists());
        assert!(dir.path().join(format!("runs/audit_{i:04}.csv")).exists());
    }
    let trace = fs::read_to_string(dir.path().join("runs/trace_0000.csv")).unwrap();
    assert!(trace
        .starts_with("round,phase,mu_t,num_Q_atoms,cd_iterations,oracle_calls,action,propensity,"));
    assert_eq!(trace.lines().count(), 801);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let mut seen = Vec::new();
    for workers in [1, 4] {
        let mut cfg = config(Algorithm::FairBandit, 600, 3, &out);
        cfg.base_seed = 11;
        run_experiment_with(&cfg, workers).unwrap();
        let files: Vec<Vec<u8>> = [
            "summary.json",
            "config.txt",
            "runs/trace_0002.csv",
            "runs/audit_0001.csv",
        ]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
        seen.push(files);
        fs::remove_dir_all(&out).unwrap();
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn different_seeds_differ() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = config(Algorithm::FairBandit, 600, 1, &dir.path().join("a"));
    a.base_seed = 1;
    let mut b = a.clone();
    b.base_seed = 2;
    b.output_dir = dir.path().join("b");
    run_experiment_with(&a, 1).unwrap();
    run_experiment_with(&b, 1).unwrap();
    let ta = fs::read(dir.path().join("a/runs/trace_0000.csv")).unwrap();
    let tb = fs::read(dir.path().join("b/runs/trace_0000.csv")).unwrap();
    assert_ne!(ta, tb);
}

#[test]
fn file_and_random_instances() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    fs::write(
        &inst,
        "num_contexts = 2\nmass = 0.25 0.25 0.25 0.25\npos_rate = 0.2 0.4 0.7 0.1\n\
         hypothesis = mix - + + -\nhypothesis = minus - - - -\nhypothesis = plus + + + +\n\
         hypothesis = +a - + - +\nhypothesis = -a + - + -\n",
    )
    .unwrap();
    let mut cfg = config(Algorithm::ExploreThenExploit, 300, 2, &dir.path().join("f"));
    cfg.instance = InstanceSource::File(inst);
    let s = run_experiment_with(&cfg, 1).unwrap().summary;
    assert!(s.instance.starts_with("file"));
    let mut cfg = config(Algorithm::FairBandit, 300, 1, &dir.path().join("r"));
    cfg.instance = InstanceSource::Random;
    cfg.epoch_mode = EpochMode::Doubling;
    let s = run_experiment_with(&cfg, 1).unwrap().summary;
    assert!(s.instance.starts_with("random"));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairtaste"))
}

#[test]
fn binary_run_with_config_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    fs::write(&cfg, "# small run\nT = 400\nreplications = 2\nepoch_mode = doubling\nalgorithm = constant_plus\n").unwrap();
    let out = dir.path().join("out");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--T", "300", "--seed", "5", "--out"])
        .arg(&out)
        .env("FAIRTASTE_WORKERS", "2")
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["horizon"], 300);
    assert_eq!(summary["seeds"], serde_json::json!([5, 6]));
    let timing: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("timing.json")).unwrap()).unwrap();
    assert_eq!(timing["workers"], 2);
}

#[test]
fn binary_reports_config_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "T = 100\n\ngamma = wide\n").unwrap();
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config line 3"), "{err}");
    let out = bin().args(["run", "--mu-max", "0.7"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu_max"));
}

#[test]
fn binary_lowerbound_benchmark_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["lowerbound", "--gamma", "0.05", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("KL(D1 || D2)"));
    let d1 = dir.path().join("d1.txt");
    assert!(fairtaste_core::io::read_instance_file(&d1).is_ok());

    let out = bin()
        .args(["benchmark", "--gamma", "0", "--set"])
        .arg(format!("instance=file:{}", d1.display()))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("loss 0.150000000000"));

    let mut paths = Vec::new();
    for t in [1000.0f64, 4000.0, 16000.0] {
        let p = dir.path().join(format!("s{t}.json"));
        let v = serde_json::json!({ "horizon": t, "mean_regret": 2.0 * t.sqrt(), "stderr_regret": 0.0 });
        fs::write(&p, v.to_string()).unwrap();
        paths.push(p);
    }
    let out = bin().arg("slope").args(&paths).output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("slope      0.5000"));
}
