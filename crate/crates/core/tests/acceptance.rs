//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line
//! before asserting.

use std::fs;

use escalade::agents::{generate_synthetic_dataset, AgentProfile, GapDistribution, SyntheticDatasetSpec};
use escalade::bounds::{dkw_epsilon, hoeffding_savings, min_samples};
use escalade::harness::{pulls_within_bounds, run_experiment, DatasetSource, ExperimentConfig};
use escalade::regret::{
    default_regret_scenario, delta_for_horizon, estimate_wrong_commit_rate, mean_final_regret, oracle_value,
    DeploymentConfig, LearningMode, OracleKind, RewardConfig,
};
use escalade::rng;
use escalade::trace::read_traces_jsonl;
use escalade::{wilson_ci, ConditionSpec, DagSpec, GroundTruth, DEFAULT_Z};
use rand::Rng;

fn verdict(criterion: u32, ok: bool, detail: String) {
    println!("criterion {criterion}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_01_bound_constants() {
    let savings = hoeffding_savings(3, 0.05).unwrap();
    let total_half = 3.0 * min_samples(0.05, 0.5).unwrap();
    let total_point_four = 3.0 * min_samples(0.05, 0.4).unwrap();
    let ok =
        (savings - 219.7).abs() <= 0.1 && (total_half - 88.5).abs() <= 0.1 && (total_point_four - 138.3).abs() <= 0.1;
    verdict(
        1,
        ok,
        format!("savings {savings:.3}, 3n*(0.5) {total_half:.3}, 3n*(0.4) {total_point_four:.3}"),
    );
}

#[test]
fn criterion_02_wilson_intervals() {
    let (a_low, a_high) = wilson_ci(5, 50, DEFAULT_Z).unwrap();
    let (b_low, b_high) = wilson_ci(161, 161, DEFAULT_Z).unwrap();
    let close = |x: f64, y: f64| (x - y).abs() <= 0.001;
    let ok = close(a_low, 0.044) && close(a_high, 0.214) && close(b_low, 0.977) && close(b_high, 1.0);
    verdict(
        2,
        ok,
        format!("5/50 -> ({a_low:.4}, {a_high:.4}), 161/161 -> ({b_low:.4}, {b_high:.4})"),
    );
}

#[test]
fn criterion_03_wrong_commit_rate() {
    let profiles = [(0.3, [0.6, 0.3, 0.1]), (0.5, [0.7, 0.2, 0.1]), (0.8, [0.9, 0.1, 0.0])];
    let mut ok = true;
    let mut detail = Vec::new();
    for (gap, probs) in profiles {
        let profile = AgentProfile::new(probs).unwrap();
        assert!((profile.gap() - gap).abs() < 1e-12);
        let est = estimate_wrong_commit_rate(&profile, 200, 0.05, 2000, 17).unwrap();
        ok &= est.rate <= 0.05 && est.ci_high <= 0.06;
        detail.push(format!(
            "gap {gap}: {}/{} wrong, {} escalated, upper {:.4}",
            est.wrong, est.runs, est.escalations, est.ci_high
        ));
    }
    verdict(3, ok, detail.join("; "));
}

#[test]
fn criterion_04_small_budgets_escalate_everything() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::synthetic_default(42, out.path());
    cfg.conditions = vec![
        ConditionSpec::AdaptiveSampling {
            budget: 10,
            delta: 0.05,
        },
        ConditionSpec::AdaptiveSampling {
            budget: 50,
            delta: 0.05,
        },
    ];
    let bundle = run_experiment(&cfg).unwrap();
    let mut ok = bundle.report.dataset.n == 161;
    let mut detail = Vec::new();
    for c in &bundle.report.conditions {
        let m = c.metrics.as_ref().unwrap();
        let shown = m.escalation.display();
        ok &= m.escalated == 161 && m.accuracy.is_none() && shown == "1.000 [0.977, 1.000]";
        detail.push(format!("{}: {shown}", c.condition));
    }
    verdict(4, ok, detail.join("; "));
}

#[test]
fn criterion_05_sample_complexity_inflection() {
    let out = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::synthetic_default(42, out.path());
    cfg.source = DatasetSource::Synthetic(SyntheticDatasetSpec {
        gap: GapDistribution::Fixed { gap: 0.5 },
        seed: 42,
        ..Default::default()
    });
    cfg.conditions = [60, 75, 90, 100, 120]
        .into_iter()
        .map(|budget| ConditionSpec::AdaptiveSampling { budget, delta: 0.05 })
        .collect();
    let bundle = run_experiment(&cfg).unwrap();
    let sweep = bundle.report.sweep.unwrap();
    assert_eq!(sweep.predicted_budget, Some(90));
    let steps = sweep.steps_from_prediction();
    let escalation: Vec<String> = sweep
        .points
        .iter()
        .map(|p| format!("B={} esc {:.3}", p.budget, p.escalation))
        .collect();
    verdict(
        5,
        steps.is_some_and(|s| s <= 1),
        format!(
            "inflection {:?}, predicted {:?}; {}",
            sweep.inflection_budget,
            sweep.predicted_budget,
            escalation.join(", ")
        ),
    );
}

#[test]
fn criterion_06_regret_growth_separation() {
    let scenario = generate_synthetic_dataset(&default_regret_scenario(2024)).unwrap();
    let dag = DagSpec::default();
    let seeds = [1, 2, 3, 4, 5];
    let mv = |t: u64| {
        let cfg = DeploymentConfig::new(t, ConditionSpec::MajorityVote { n: 1 }, 0);
        mean_final_regret(&cfg, &scenario, &dag, &seeds).unwrap()
    };
    let adaptive = |t: u64| {
        let mut cfg = DeploymentConfig::new(
            t,
            ConditionSpec::AdaptiveSampling {
                budget: 100,
                delta: delta_for_horizon(t),
            },
            0,
        );
        cfg.mode = LearningMode::CrossEpisode;
        mean_final_regret(&cfg, &scenario, &dag, &seeds).unwrap()
    };

    let mv_ratio = mv(2000) / mv(1000);
    let horizons = [100u64, 1_000, 10_000];
    let as_regret: Vec<f64> = horizons.iter().map(|&t| adaptive(t)).collect();
    let mv_regret: Vec<f64> = horizons.iter().map(|&t| mv(t)).collect();
    let per_episode: Vec<f64> = as_regret.iter().zip(horizons).map(|(r, t)| r / t as f64).collect();
    let decreasing = per_episode.windows(2).all(|w| w[1] < w[0]);
    // Adaptive stays below MV(1) from some tested horizon onward.
    let dominant_from = (0..horizons.len()).find(|&i| (i..horizons.len()).all(|j| as_regret[j] < mv_regret[j]));
    let ok = (mv_ratio - 2.0).abs() <= 0.2 && decreasing && dominant_from.is_some();
    verdict(
        6,
        ok,
        format!(
            "MV ratio {mv_ratio:.3}; AS Reg/T {per_episode:.4?}; AS {as_regret:.1?} vs MV {mv_regret:.1?}; dominant from T={:?}",
            dominant_from.map(|i| horizons[i])
        ),
    );
}

#[test]
fn criterion_07_dkw_coverage() {
    // Largest per-label deviation of empirical frequencies, for profiles
    // from uniform to skewed.
    let trials = 10_000;
    let profiles = [[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], [0.5, 0.3, 0.2], [0.7, 0.2, 0.1]];
    let mut detail = Vec::new();
    let mut ok = true;
    for n in [10u64, 100, 1000] {
        let eps = dkw_epsilon(n, 0.05).unwrap();
        for (p_index, probs) in profiles.iter().enumerate() {
            let profile = AgentProfile::new(*probs).unwrap();
            let mut rng = rng::stream(rng::derive_seed_index(rng::derive_seed_index(7, n), p_index as u64));
            let mut covered = 0;
            for _ in 0..trials {
                let mut counts = [0u64; 3];
                for _ in 0..n {
                    counts[profile.sample(&mut rng).index()] += 1;
                }
                let dev = counts
                    .iter()
                    .zip(probs)
                    .map(|(&c, p)| (c as f64 / n as f64 - p).abs())
                    .fold(0.0, f64::max);
                if dev <= eps {
                    covered += 1;
                }
            }
            let rate = covered as f64 / trials as f64;
            ok &= rate >= 0.95;
            detail.push(format!("n={n} p{p_index}: {rate:.4}"));
        }
    }
    verdict(7, ok, detail.join(", "));
}

/// Every deterministic policy on the chain, scored by first commit.
fn brute_force(profiles: &[AgentProfile], truth: GroundTruth, reward: &RewardConfig, kind: OracleKind) -> f64 {
    let allowed = |p: &AgentProfile, label: GroundTruth| match kind {
        OracleKind::GroundTruth => true,
        OracleKind::Argmax => {
            let probs = p.probs();
            let top = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            probs[label.as_label().index()] == top
        }
    };
    let choices = [Some(GroundTruth::Safe), Some(GroundTruth::Unsafe), None];
    let mut best = f64::NEG_INFINITY;
    let mut plan = vec![0usize; profiles.len()];
    loop {
        let mut value = Some(reward.human_review);
        for (p, &c) in profiles.iter().zip(&plan) {
            if let Some(label) = choices[c] {
                value = allowed(p, label).then(|| reward.commit(label, truth));
                break;
            }
        }
        if let Some(v) = value {
            best = best.max(v);
        }
        let mut i = 0;
        while i < plan.len() && plan[i] == 2 {
            plan[i] = 0;
            i += 1;
        }
        if i == plan.len() {
            return best;
        }
        plan[i] += 1;
    }
}

#[test]
fn criterion_08_oracle_equivalence() {
    let mut rng = rng::stream(8);
    let mut mismatches = 0;
    let instances = 100;
    for _ in 0..instances {
        let profiles: Vec<AgentProfile> = (0..3)
            .map(|_| {
                let w: [f64; 3] = [rng.random(), rng.random(), rng.random()];
                let total: f64 = w.iter().sum();
                AgentProfile::new([w[0] / total, w[1] / total, 1.0 - (w[0] + w[1]) / total]).unwrap()
            })
            .collect();
        let truth = if rng.random_bool(0.5) {
            GroundTruth::Safe
        } else {
            GroundTruth::Unsafe
        };
        let reward = RewardConfig {
            r_max: 1.0,
            human_review: rng.random_range(-0.5..=0.5),
        };
        for kind in [OracleKind::Argmax, OracleKind::GroundTruth] {
            if oracle_value(&profiles, truth, &reward, kind).unwrap() != brute_force(&profiles, truth, &reward, kind) {
                mismatches += 1;
            }
        }
    }
    verdict(
        8,
        mismatches == 0,
        format!("{mismatches} mismatches over {instances} instances x 2 oracles"),
    );
}

#[test]
fn criterion_09_pipeline_pull_bounds() {
    let out = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::synthetic_default(9, out.path());
    let bundle = run_experiment(&cfg).unwrap();
    let nodes = cfg.dag.len();
    let mut checked = 0;
    let mut violations = 0;
    for (condition, path) in cfg.conditions.iter().zip(&bundle.trace_files) {
        let traces = read_traces_jsonl(std::io::BufReader::new(fs::File::open(path).unwrap())).unwrap();
        for trace in &traces {
            checked += 1;
            if !pulls_within_bounds(condition, trace, nodes) {
                violations += 1;
            }
        }
    }
    let reported: usize = bundle.report.conditions.iter().map(|c| c.pull_bound_violations).sum();
    verdict(
        9,
        violations == 0 && reported == 0 && checked == 161 * cfg.conditions.len(),
        format!("{checked} traces checked, {violations} violations"),
    );
}

#[test]
fn criterion_10_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for (dir, parallelism) in dirs.iter().zip([1, 4]) {
        let mut cfg = ExperimentConfig::synthetic_default(10, dir.path());
        cfg.parallelism = parallelism;
        let bundle = run_experiment(&cfg).unwrap();
        reports.push(fs::read(bundle.report_json()).unwrap());
        traces.push(
            bundle
                .trace_files
                .iter()
                .map(|p| fs::read(p).unwrap())
                .collect::<Vec<_>>(),
        );
    }
    let ok = reports[0] == reports[1] && traces[0] == traces[1];
    verdict(
        10,
        ok,
        format!(
            "report.json {} bytes, {} trace files",
            reports[0].len(),
            traces[0].len()
        ),
    );
}
