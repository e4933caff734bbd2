use std::collections::HashMap;

use escalade::agents::{generate_synthetic_dataset, AgentProfile, ProfileTable, SimulatedAgent};
use escalade::bandit::{majority_vote, run_adaptive_sampling, EliminationState};
use escalade::bounds::{adaptive_regret_bound, dkw_epsilon, min_samples, mv_regret_bound, BoundConfig};
use escalade::dataset::{Dataset, InputRecord};
use escalade::label::{LabelCounts, LabelFrequencies};
use escalade::metrics::{compute_metrics, wilson_ci};
use escalade::regret::{default_regret_scenario, simulate_deployment, DeploymentConfig};
use escalade::rng;
use escalade::router::{run_condition, run_episode, ConditionSpec, RouterOptions};
use escalade::trace::{read_traces_jsonl, write_traces_jsonl, DecisionReason, EpisodeTrace, NodeRecord};
use escalade::{ActionLabel, DagSpec, GroundTruth, NodeId, Outcome};
use proptest::prelude::*;
use rand::Rng;

fn profile_strategy() -> impl Strategy<Value = AgentProfile> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0)
        .prop_filter("non-zero mass", |(a, b, c)| a + b + c > 1e-6)
        .prop_map(|(a, b, c)| {
            let total = a + b + c;
            AgentProfile::new([a / total, b / total, 1.0 - (a + b) / total]).unwrap()
        })
}

/// Profile whose modal label beats the runner-up by exactly `gap`.
fn gapped(gap: f64) -> AgentProfile {
    let third = (0.1f64).min((1.0 - gap) / 3.0);
    AgentProfile::new([(1.0 - third + gap) / 2.0, (1.0 - third - gap) / 2.0, third]).unwrap()
}

fn label_strategy() -> impl Strategy<Value = ActionLabel> {
    prop::sample::select(ActionLabel::ALL.to_vec())
}

fn counts_strategy() -> impl Strategy<Value = LabelCounts> {
    (0u64..500, 0u64..500, 0u64..500).prop_map(|(safe, unsafe_, escalate)| LabelCounts {
        safe,
        unsafe_,
        escalate,
    })
}

fn record_strategy() -> impl Strategy<Value = NodeRecord> {
    (
        "[a-z]{1,8}",
        counts_strategy(),
        (any::<f64>(), any::<f64>(), any::<f64>()),
        label_strategy(),
        prop::sample::select(vec![
            DecisionReason::Converged,
            DecisionReason::Label,
            DecisionReason::BudgetExhausted,
        ]),
    )
        .prop_filter("finite", |(_, _, (a, b, c), _, _)| {
            a.is_finite() && b.is_finite() && c.is_finite()
        })
        .prop_map(
            |(node, pulls, (safe, unsafe_, escalate), decision, reason)| NodeRecord {
                node: NodeId::new(node),
                pulls,
                frequencies: LabelFrequencies {
                    safe,
                    unsafe_,
                    escalate,
                },
                decision,
                reason,
            },
        )
}

fn trace_strategy() -> impl Strategy<Value = EpisodeTrace> {
    (
        "[ -~]{0,12}",
        prop::collection::vec(record_strategy(), 0..4),
        prop::sample::select(vec![
            Outcome::CommittedSafe,
            Outcome::CommittedUnsafe,
            Outcome::HumanReview,
        ]),
    )
        .prop_map(|(id, nodes, outcome)| EpisodeTrace::new(id, nodes, outcome))
}

fn one_input(profiles: &[AgentProfile]) -> (InputRecord, SimulatedAgent) {
    let input = InputRecord {
        id: "x".into(),
        text: String::new(),
        label: GroundTruth::Safe,
        group: None,
    };
    let mut table = ProfileTable::default();
    for (node, profile) in DagSpec::default().nodes().iter().zip(profiles) {
        table.insert("x", node.clone(), *profile);
    }
    (input, SimulatedAgent::new(table))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chains_have_declared_topological_order(names in prop::collection::hash_set("[a-z]{1,6}", 1..=5)) {
        let nodes: Vec<NodeId> = names.into_iter().map(NodeId::new).collect();
        let dag = DagSpec::chain(nodes.clone()).unwrap();
        prop_assert_eq!(dag.topological_order().unwrap(), nodes);
    }

    #[test]
    fn traces_round_trip(traces in prop::collection::vec(trace_strategy(), 0..5)) {
        let mut buf = Vec::new();
        write_traces_jsonl(&mut buf, &traces).unwrap();
        let back = read_traces_jsonl(buf.as_slice()).unwrap();
        prop_assert_eq!(back, traces);
    }

    #[test]
    fn wilson_contains_estimate_and_narrows(trials in 1u64..5_000, frac in 0.0f64..=1.0, z in 0.5f64..3.5) {
        let successes = (frac * trials as f64).round() as u64;
        let (low, high) = wilson_ci(successes, trials, z).unwrap();
        let p = successes as f64 / trials as f64;
        prop_assert!(low <= p && p <= high);
        let (low2, high2) = wilson_ci(2 * successes, 2 * trials, z).unwrap();
        prop_assert!(high2 - low2 < high - low);
    }

    #[test]
    fn elimination_accounting(profile in profile_strategy(), budget in 0u64..400, delta in 0.001f64..0.5, seed: u64) {
        let mut rng = rng::stream(seed);
        let mut source = || Ok(profile.sample(&mut rng));
        let mut state = EliminationState::new(delta).unwrap();
        let mut active_sizes = vec![state.active().len()];
        let mut spent = 0;
        // Advance in small slices to observe the active set between rounds.
        while spent < budget && state.survivor().is_none() {
            let step = state.advance(&mut source, 3.min(budget - spent)).unwrap();
            if step.pulls.total() == 0 {
                break;
            }
            spent += step.pulls.total();
            active_sizes.push(state.active().len());
        }
        prop_assert!(state.total_pulls() <= budget);
        prop_assert_eq!(state.total_pulls(), state.draws().total());
        let active_pulls: Vec<u64> = state.active().iter().map(|&a| state.pulls()[a]).collect();
        prop_assert!(active_pulls.windows(2).all(|w| w[0] == w[1]));
        prop_assert!(active_sizes.windows(2).all(|w| w[1] <= w[0]));
        prop_assert_eq!(state.active().len() + state.eliminations().len(), 3);
    }

    #[test]
    fn adaptive_sampling_is_deterministic(profile in profile_strategy(), budget in 3u64..300, seed: u64) {
        let run = || {
            let mut rng = rng::stream(seed);
            let mut source = || Ok(profile.sample(&mut rng));
            run_adaptive_sampling(&mut source, budget, 0.05).unwrap()
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn majority_vote_pulls_match_visited_nodes(
        profiles in prop::collection::vec(profile_strategy(), 3),
        n in 1u64..8,
        seed: u64,
    ) {
        let (input, agent) = one_input(&profiles);
        let dag = DagSpec::default();
        let trace = run_episode(&input, &ConditionSpec::MajorityVote { n }, &agent, &dag, seed, RouterOptions::default()).unwrap();
        prop_assert_eq!(trace.total_pulls, n * trace.nodes.len() as u64);
        prop_assert!((1..=3).contains(&trace.nodes.len()));
        // Nothing is visited after a commit.
        let commits: Vec<usize> = trace.nodes.iter().enumerate().filter(|(_, r)| r.decision.is_commit()).map(|(i, _)| i).collect();
        prop_assert!(commits.is_empty() || commits == vec![trace.nodes.len() - 1]);
    }

    #[test]
    fn adaptive_pulls_within_chain_budget(profiles in prop::collection::vec(profile_strategy(), 3), budget in 3u64..200, seed: u64) {
        let (input, agent) = one_input(&profiles);
        let condition = ConditionSpec::AdaptiveSampling { budget, delta: 0.05 };
        let trace = run_episode(&input, &condition, &agent, &DagSpec::default(), seed, RouterOptions::default()).unwrap();
        prop_assert!(trace.total_pulls <= 3 * budget);
    }

    #[test]
    fn single_agent_makes_one_call(profiles in prop::collection::vec(profile_strategy(), 3), seed: u64) {
        let (input, agent) = one_input(&profiles);
        let trace = run_episode(&input, &ConditionSpec::SingleAgent, &agent, &DagSpec::default(), seed, RouterOptions::default()).unwrap();
        prop_assert_eq!(trace.total_pulls, 1);
    }

    #[test]
    fn metrics_survive_serialization(traces in prop::collection::vec(trace_strategy(), 1..20), z in 0.5f64..3.0) {
        let truth: HashMap<String, GroundTruth> = traces
            .iter()
            .enumerate()
            .map(|(i, t)| (t.input_id.clone(), if i % 2 == 0 { GroundTruth::Safe } else { GroundTruth::Unsafe }))
            .collect();
        let direct = compute_metrics(&traces, &truth, None, z).unwrap();
        let mut buf = Vec::new();
        write_traces_jsonl(&mut buf, &traces).unwrap();
        let reread = compute_metrics(&read_traces_jsonl(buf.as_slice()).unwrap(), &truth, None, z).unwrap();
        prop_assert_eq!(&direct, &reread);
        prop_assert_eq!(direct.escalated + direct.non_escalated, direct.n);
    }

    #[test]
    fn calculators_are_pure(delta in 0.001f64..0.5, gap in 0.05f64..1.0, n in 1u64..10_000) {
        prop_assert_eq!(dkw_epsilon(n, delta).unwrap().to_bits(), dkw_epsilon(n, delta).unwrap().to_bits());
        prop_assert_eq!(min_samples(delta, gap).unwrap().to_bits(), min_samples(delta, gap).unwrap().to_bits());
        let cfg = BoundConfig { delta, gap_min: gap, ..Default::default() };
        prop_assert_eq!(mv_regret_bound(&cfg).unwrap().to_bits(), mv_regret_bound(&cfg).unwrap().to_bits());
        prop_assert_eq!(adaptive_regret_bound(&cfg).unwrap().to_bits(), adaptive_regret_bound(&cfg).unwrap().to_bits());
    }
}

#[test]
fn per_input_streams_are_independent() {
    let data = generate_synthetic_dataset(&escalade::agents::SyntheticDatasetSpec {
        inputs: 30,
        seed: 4,
        ..Default::default()
    })
    .unwrap();
    let dag = DagSpec::default();
    let condition = ConditionSpec::AdaptiveSampling {
        budget: 150,
        delta: 0.05,
    };
    let base = run_condition(
        &data.dataset,
        &condition,
        &SimulatedAgent::new(data.profiles.clone()),
        &dag,
        1,
        1,
        RouterOptions::default(),
    )
    .unwrap();

    // Perturb one input's profiles and drop another input entirely.
    let mut profiles = data.profiles.clone();
    let changed = data.dataset.records[3].id.clone();
    for node in dag.nodes() {
        profiles.insert(
            changed.clone(),
            node.clone(),
            AgentProfile::new([0.2, 0.2, 0.6]).unwrap(),
        );
    }
    let removed = data.dataset.records[7].id.clone();
    let subset = Dataset::new(
        data.dataset
            .records
            .iter()
            .filter(|r| r.id != removed)
            .cloned()
            .collect(),
    );
    let other = run_condition(
        &subset,
        &condition,
        &SimulatedAgent::new(profiles),
        &dag,
        1,
        4,
        RouterOptions::default(),
    )
    .unwrap();

    let by_id: HashMap<&str, &EpisodeTrace> = other.traces.iter().map(|t| (t.input_id.as_str(), t)).collect();
    for trace in &base.traces {
        if trace.input_id == changed || trace.input_id == removed {
            continue;
        }
        assert_eq!(by_id[trace.input_id.as_str()], trace);
    }
}

#[test]
fn best_arm_is_rarely_eliminated() {
    let delta = 0.05;
    for gap in [0.3, 0.5, 0.8] {
        let profile = gapped(gap);
        let best = profile.best().unwrap();
        let eliminated = (0..1000u64)
            .filter(|&i| {
                let mut rng = rng::stream(rng::derive_seed_index(31, i));
                let mut source = || Ok(profile.sample(&mut rng));
                let decision = run_adaptive_sampling(&mut source, 300, delta).unwrap();
                decision.state.eliminations().iter().any(|e| e.arm == best)
            })
            .count();
        assert!(eliminated as f64 / 1000.0 <= delta, "gap {gap}: {eliminated}");
    }
}

#[test]
fn easy_inputs_resolve_with_fewer_pulls() {
    let mean_pulls = |gap: f64| {
        let profile = gapped(gap);
        let total: u64 = (0..300u64)
            .map(|i| {
                let mut rng = rng::stream(rng::derive_seed_index(5, i));
                let mut source = || Ok(profile.sample(&mut rng));
                run_adaptive_sampling(&mut source, 300, 0.05)
                    .unwrap()
                    .state
                    .total_pulls()
            })
            .sum();
        total as f64 / 300.0
    };
    let easy = mean_pulls(0.8);
    let hard = mean_pulls(0.4);
    assert!(easy < hard, "{easy} vs {hard}");
}

#[test]
fn empirical_argmax_matches_best_after_min_samples() {
    let mut rng = rng::stream(2);
    for pair in 0..200u64 {
        let delta = rng.random_range(0.01..0.2);
        let gap = rng.random_range(0.3..0.9);
        let profile = gapped(gap);
        let best = profile.best().unwrap();
        let n = min_samples(delta, gap).unwrap().ceil() as u64;
        let mut draws = rng::stream(rng::derive_seed_index(77, pair));
        let hits = (0..1000)
            .filter(|_| {
                let mut source = || Ok(profile.sample(&mut draws));
                let vote = majority_vote(&mut source, n).unwrap();
                vote.label == best
            })
            .count();
        assert!(hits as f64 >= (1.0 - delta) * 1000.0, "delta {delta} gap {gap}: {hits}");
    }
}

#[test]
fn single_sample_regret_grows_linearly() {
    let scenario = generate_synthetic_dataset(&default_regret_scenario(2024)).unwrap();
    let slopes: Vec<f64> = (1..=5)
        .map(|seed| {
            let cfg = DeploymentConfig::new(10_000, ConditionSpec::MajorityVote { n: 1 }, seed);
            simulate_deployment(&cfg, &scenario, &DagSpec::default())
                .unwrap()
                .slope(5_001, 10_000)
        })
        .collect();
    let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
    assert!(mean > 0.0);
    assert!(slopes.iter().all(|s| (s - mean).abs() <= 0.2 * mean), "{slopes:?}");
}
