use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use escalade::agents::{generate_synthetic_dataset, AgentProfile, SimulatedAgent, SyntheticDatasetSpec};
use escalade::bandit::run_adaptive_sampling;
use escalade::{rng, run_condition, wilson_ci, ConditionSpec, DagSpec, RouterOptions};

fn adaptive_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("adaptive_sampling");
    for (name, probs) in [
        ("degenerate", [1.0, 0.0, 0.0]),
        ("easy", [0.9, 0.05, 0.05]),
        ("uniform", [1.0 / 3.0; 3]),
    ] {
        let profile = AgentProfile::new(probs).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(name), &profile, |b, profile| {
            let mut stream = rng::stream(1);
            b.iter(|| {
                let mut source = || Ok(profile.sample(&mut stream));
                run_adaptive_sampling(&mut source, black_box(300), 0.05).unwrap()
            })
        });
    }
    group.finish();
}

fn wilson(c: &mut Criterion) {
    c.bench_function("wilson_ci", |b| {
        b.iter(|| wilson_ci(black_box(37), black_box(161), 1.96).unwrap())
    });
}

fn condition_sweep(c: &mut Criterion) {
    let data = generate_synthetic_dataset(&SyntheticDatasetSpec::default()).unwrap();
    let agent = SimulatedAgent::new(data.profiles.clone());
    let dag = DagSpec::default();
    let mut group = c.benchmark_group("run_condition");
    for condition in [
        ConditionSpec::MajorityVote { n: 5 },
        ConditionSpec::AdaptiveSampling {
            budget: 150,
            delta: 0.05,
        },
    ] {
        group.bench_function(condition.name(), |b| {
            b.iter(|| run_condition(&data.dataset, &condition, &agent, &dag, 7, 1, RouterOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, adaptive_sampling, wilson, condition_sweep);
criterion_main!(benches);
