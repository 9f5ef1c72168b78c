use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use fairtaste_bench::{csc_fixture, solve_fixture};
use fairtaste_core::bandit::{coordinate_descent, SolveContext};
use fairtaste_core::fair_csc::fair_csc_solve;
use fairtaste_core::{exact_csc, run, EpochMode, FairCscConfig, Schedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn csc(c: &mut Criterion) {
    let mut g = c.benchmark_group("exact_csc");
    for rows in [50, 500, 5000] {
        let (class, _, inst) = csc_fixture(8, 60, rows, 1);
        g.bench_with_input(BenchmarkId::from_parameter(rows), &inst, |b, inst| {
            b.iter(|| exact_csc(black_box(inst), &class))
        });
    }
    g.finish();
}

fn fair_csc(c: &mut Criterion) {
    let mut g = c.benchmark_group("fair_csc_solve");
    let (class, constraint, inst) = csc_fixture(4, 8, 50, 2);
    for nu in [1e-2, 1e-3, 1e-4] {
        let cfg = FairCscConfig::new(0.1, nu);
        g.bench_with_input(BenchmarkId::from_parameter(nu), &cfg, |b, cfg| {
            b.iter(|| fair_csc_solve(black_box(&inst), &constraint, &class, cfg).expect("solve"))
        });
    }
    g.finish();
}

fn descent(c: &mut Criterion) {
    let mut g = c.benchmark_group("coordinate_descent");
    for rounds in [100, 1000, 10000] {
        let f = solve_fixture(rounds, 20_000, 3);
        let ctx = SolveContext {
            class: &f.class,
            constraint: &f.constraint,
            fair: f.fair,
            horizon: 20_000,
        };
        let mu = (0.1f64 * 30.0 / (rounds as f64).sqrt()).min(0.25);
        g.bench_with_input(BenchmarkId::from_parameter(rounds), &rounds, |b, _| {
            b.iter(|| coordinate_descent(black_box(&f.history), &ctx, mu, None).expect("descent"))
        });
    }
    g.finish();
}

fn learner(c: &mut Criterion) {
    let mut g = c.benchmark_group("run");
    g.sample_size(10);
    let f = solve_fixture(1, 4000, 4);
    for (name, mode) in [
        ("doubling", EpochMode::Doubling),
        ("every_round", EpochMode::EveryRound),
    ] {
        let mut s = Schedule::new(4000, 0.1, 0.05);
        s.epoch_mode = mode;
        g.bench_function(name, |b| {
            b.iter(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(5);
                run(&f.distribution, &f.class, &s, &mut rng).expect("run")
            })
        });
    }
    g.finish();
}

criterion_group!(benches, csc, fair_csc, descent, learner);
criterion_main!(benches);
