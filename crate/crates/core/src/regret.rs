//! Deployment simulation: oracle values, per-episode rewards and cumulative
//! regret of a routing policy over a stream of inputs.
//!
//! Rewards: a correct commit earns `+r_max`, a wrong commit `-r_max`,
//! escalation steps earn nothing and human review earns `human_review`
//! (0 by default).

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{
    AgentProfile, GapDistribution, NodeSampler, SimulatedAgent, SyntheticDataset, SyntheticDatasetSpec,
};
use crate::bandit::{self, BanditReason, EliminationState, DEFAULT_DELTA};
use crate::dag::{DagSpec, NodeId};
use crate::dataset::InputRecord;
use crate::error::{Error, Result};
use crate::label::{ActionLabel, GroundTruth, Outcome};
use crate::metrics::{wilson_ci, DEFAULT_Z};
use crate::rng;
use crate::router::{self, node_stream, ConditionSpec, RouterOptions};
use crate::trace::{DecisionReason, EpisodeTrace, NodeRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub r_max: f64,
    pub human_review: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r_max: 1.0,
            human_review: 0.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_max > 0.0 && self.r_max.is_finite()) {
            return Err(Error::Config(format!("r_max must be positive, got {}", self.r_max)));
        }
        if self.human_review.abs() > self.r_max {
            return Err(Error::Config(format!(
                "human review reward {} exceeds r_max {}",
                self.human_review, self.r_max
            )));
        }
        Ok(())
    }

    pub fn commit(&self, committed: GroundTruth, truth: GroundTruth) -> f64 {
        if committed == truth {
            self.r_max
        } else {
            -self.r_max
        }
    }

    pub fn outcome(&self, outcome: Outcome, truth: GroundTruth) -> f64 {
        match outcome.committed() {
            Some(label) => self.commit(label, truth),
            None => self.human_review,
        }
    }
}

/// What the oracle is allowed to commit at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    /// May commit either label, knowing the reference label.
    GroundTruth,
    /// May only commit the node's modal label (or escalate).
    Argmax,
}

impl OracleKind {
    /// Labels the oracle may commit at a node with this profile.
    pub fn commit_options(self, profile: &AgentProfile) -> Vec<GroundTruth> {
        match self {
            OracleKind::GroundTruth => vec![GroundTruth::Safe, GroundTruth::Unsafe],
            OracleKind::Argmax => {
                let top = ActionLabel::ALL
                    .iter()
                    .map(|&l| profile.prob(l))
                    .fold(f64::NEG_INFINITY, f64::max);
                [GroundTruth::Safe, GroundTruth::Unsafe]
                    .into_iter()
                    .filter(|g| profile.prob(g.as_label()) == top)
                    .collect()
            }
        }
    }
}

/// Best achievable value over deterministic chain policies, by backward
/// induction from human review. Ties favour committing.
pub fn oracle_value(
    profiles: &[AgentProfile],
    truth: GroundTruth,
    reward: &RewardConfig,
    kind: OracleKind,
) -> Result<f64> {
    Ok(oracle_plan(profiles, truth, reward, kind)?.0)
}

/// Oracle value plus the action it takes at each node of the chain.
pub fn oracle_plan(
    profiles: &[AgentProfile],
    truth: GroundTruth,
    reward: &RewardConfig,
    kind: OracleKind,
) -> Result<(f64, Vec<ActionLabel>)> {
    if profiles.is_empty() {
        return Err(Error::InvalidDag("oracle needs at least one node".into()));
    }
    let mut actions = vec![ActionLabel::Escalate; profiles.len()];
    let mut value = reward.human_review;
    for (i, profile) in profiles.iter().enumerate().rev() {
        let best_commit = kind
            .commit_options(profile)
            .into_iter()
            .map(|label| (reward.commit(label, truth), label))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((commit_value, label)) = best_commit {
            if commit_value >= value {
                value = commit_value;
                actions[i] = label.as_label();
            }
        }
    }
    Ok((value, actions))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretPoint {
    pub t: u64,
    pub oracle_value: f64,
    pub policy_value: f64,
    pub instant_regret: f64,
    pub cumulative_regret: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub points: Vec<RegretPoint>,
    /// Agent calls across all episodes.
    pub total_pulls: u64,
}

impl RegretCurve {
    pub fn push(&mut self, oracle_value: f64, policy_value: f64) {
        let previous = self.final_regret();
        let instant = oracle_value - policy_value;
        self.points.push(RegretPoint {
            t: self.points.len() as u64 + 1,
            oracle_value,
            policy_value,
            instant_regret: instant,
            cumulative_regret: previous + instant,
        });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cumulative regret after `t` episodes; zero at `t = 0`.
    pub fn cumulative_at(&self, t: u64) -> f64 {
        match t {
            0 => 0.0,
            t => self.points[(t as usize).min(self.points.len()) - 1].cumulative_regret,
        }
    }

    pub fn final_regret(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.cumulative_regret)
    }

    /// Least-squares slope of cumulative regret over episodes `from..=to`.
    pub fn slope(&self, from: u64, to: u64) -> f64 {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.t >= from && p.t <= to)
            .map(|p| (p.t as f64, p.cumulative_regret))
            .collect();
        let n = pts.len() as f64;
        let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
        cov / var
    }

    /// Columns: t, oracle_value, policy_value, instant_regret, cumulative_regret.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        for point in &self.points {
            writer.serialize(point)?;
        }
        if self.points.is_empty() {
            writer.write_record([
                "t",
                "oracle_value",
                "policy_value",
                "instant_regret",
                "cumulative_regret",
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearningMode {
    /// Each episode starts from scratch, exactly as a single routed input.
    /// Regret is linear whenever the budget is too small to converge.
    PerEpisode,
    /// Adaptive-sampling statistics persist per (node, input class) across
    /// episodes; once a class has converged the survivor is reused without
    /// further calls.
    CrossEpisode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeploymentConfig {
    pub episodes: u64,
    pub condition: ConditionSpec,
    pub reward: RewardConfig,
    pub oracle: OracleKind,
    pub mode: LearningMode,
    pub seed: u64,
    pub options: RouterOptions,
}

impl DeploymentConfig {
    pub fn new(episodes: u64, condition: ConditionSpec, seed: u64) -> Self {
        DeploymentConfig {
            episodes,
            condition,
            reward: RewardConfig::default(),
            oracle: OracleKind::Argmax,
            mode: LearningMode::PerEpisode,
            seed,
            options: RouterOptions::default(),
        }
    }
}

/// `1 / T`, kept inside (0, 1).
pub fn delta_for_horizon(episodes: u64) -> f64 {
    1.0 / episodes.max(2) as f64
}

/// Default scenario for regret experiments: four input classes whose node
/// gaps lie in [0.2, 0.5].
pub fn default_regret_scenario(seed: u64) -> SyntheticDatasetSpec {
    SyntheticDatasetSpec {
        inputs: 4,
        unsafe_fraction: 0.5,
        gap: GapDistribution::Uniform { low: 0.2, high: 0.5 },
        escalate_mass: 0.1,
        escalate_best_fraction: 0.0,
        nodes: DagSpec::default().nodes().to_vec(),
        seed,
    }
}

struct CrossEpisodeLearner {
    states: HashMap<(usize, String), EliminationState>,
    budget: u64,
    delta: f64,
}

impl CrossEpisodeLearner {
    fn decide(
        &mut self,
        agent: &SimulatedAgent,
        node_index: usize,
        node: &NodeId,
        input: &InputRecord,
        episode_seed: u64,
    ) -> Result<NodeRecord> {
        let state = match self.states.entry((node_index, input.id.clone())) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(EliminationState::new(self.delta)?),
        };
        let mut sampler = NodeSampler::new(agent, node, input, node_stream(episode_seed, node));
        let step = state.advance(&mut sampler, self.budget)?;
        let (decision, reason) = match step.survivor {
            Some(label) => (label, DecisionReason::Converged),
            None => (ActionLabel::Escalate, DecisionReason::BudgetExhausted),
        };
        Ok(NodeRecord {
            node: node.clone(),
            pulls: step.pulls,
            frequencies: state.estimates(),
            decision,
            reason,
        })
    }
}

/// Runs `cfg.episodes` episodes with inputs drawn uniformly at random from
/// `scenario`, scoring each against the oracle.
pub fn simulate_deployment(cfg: &DeploymentConfig, scenario: &SyntheticDataset, dag: &DagSpec) -> Result<RegretCurve> {
    cfg.reward.validate()?;
    cfg.condition.validate()?;
    let inputs = &scenario.dataset.records;
    if inputs.is_empty() {
        return Err(Error::InvalidDataset("deployment needs at least one input".into()));
    }
    let agent = SimulatedAgent::new(scenario.profiles.clone());
    let mut oracle_cache: HashMap<&str, f64> = HashMap::new();
    for input in inputs {
        let chain = scenario.profiles.chain(&input.id, dag.nodes())?;
        oracle_cache.insert(&input.id, oracle_value(&chain, input.label, &cfg.reward, cfg.oracle)?);
    }

    let mut picker = rng::stream(rng::derive_seed(cfg.seed, "deployment-inputs"));
    // Only consulted for adaptive sampling in cross-episode mode.
    let (budget, delta) = match cfg.condition {
        ConditionSpec::AdaptiveSampling { budget, delta } => (budget, delta),
        _ => (0, DEFAULT_DELTA),
    };
    let mut learner = CrossEpisodeLearner {
        states: HashMap::new(),
        budget,
        delta,
    };
    let mut curve = RegretCurve::default();
    for t in 0..cfg.episodes {
        let input = &inputs[picker.random_range(0..inputs.len())];
        let episode_seed = rng::derive_seed_index(cfg.seed, t);
        let trace = match (cfg.mode, cfg.condition) {
            (LearningMode::CrossEpisode, ConditionSpec::AdaptiveSampling { .. }) => {
                router::route_chain(dag, &input.id, dag.len(), cfg.options, |i, node| {
                    learner.decide(&agent, i, node, input, episode_seed)
                })
            }
            _ => router::run_episode(input, &cfg.condition, &agent, dag, episode_seed, cfg.options),
        }
        .map_err(|failure| failure.error)?;
        curve.total_pulls += trace.total_pulls;
        curve.push(
            oracle_cache[input.id.as_str()],
            cfg.reward.outcome(trace.outcome, input.label),
        );
    }
    Ok(curve)
}

/// Mean final regret over several seeds.
pub fn mean_final_regret(
    cfg: &DeploymentConfig,
    scenario: &SyntheticDataset,
    dag: &DagSpec,
    seeds: &[u64],
) -> Result<f64> {
    let finals = seeds
        .par_iter()
        .map(|&seed| simulate_deployment(&DeploymentConfig { seed, ..*cfg }, scenario, dag).map(|c| c.final_regret()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(finals.iter().sum::<f64>() / finals.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrongCommitEstimate {
    pub runs: u64,
    pub commits: u64,
    pub wrong: u64,
    pub escalations: u64,
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Set when no run converged, so the rate carries no information.
    pub no_commits: bool,
}

/// Fraction of adaptive-sampling runs that converge on a label other than
/// the profile's unique best. Budget exhaustion counts toward the run total
/// but not the numerator.
pub fn estimate_wrong_commit_rate(
    profile: &AgentProfile,
    budget: u64,
    delta: f64,
    runs: u64,
    seed: u64,
) -> Result<WrongCommitEstimate> {
    let best = profile
        .best()
        .ok_or_else(|| Error::InvalidSpec(format!("profile {:?} has no unique best label", profile.probs())))?;
    if runs == 0 {
        return Err(Error::domain("need at least one run"));
    }
    let outcomes = (0..runs)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(rng::derive_seed_index(seed, i));
            let mut source = || Ok(profile.sample(&mut rng));
            bandit::run_adaptive_sampling(&mut source, budget, delta).map(|d| (d.label, d.reason))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut commits = 0;
    let mut wrong = 0;
    let mut escalations = 0;
    for (label, reason) in outcomes {
        match reason {
            BanditReason::BudgetExhausted => escalations += 1,
            BanditReason::Converged => {
                commits += 1;
                if label != best {
                    wrong += 1;
                }
            }
        }
    }
    let (ci_low, ci_high) = wilson_ci(wrong, runs, DEFAULT_Z)?;
    Ok(WrongCommitEstimate {
        runs,
        commits,
        wrong,
        escalations,
        rate: wrong as f64 / runs as f64,
        ci_low,
        ci_high,
        no_commits: commits == 0,
    })
}

/// Re-scores finished traces against the oracle, in order.
pub fn regret_from_traces(
    traces: &[EpisodeTrace],
    scenario: &SyntheticDataset,
    dag: &DagSpec,
    reward: &RewardConfig,
    kind: OracleKind,
) -> Result<RegretCurve> {
    let truth = scenario.dataset.ground_truth();
    let mut curve = RegretCurve::default();
    for trace in traces {
        let label = *truth
            .get(&trace.input_id)
            .ok_or_else(|| Error::MissingGroundTruth(trace.input_id.clone()))?;
        let chain = scenario.profiles.chain(&trace.input_id, dag.nodes())?;
        curve.total_pulls += trace.total_pulls;
        curve.push(
            oracle_value(&chain, label, reward, kind)?,
            reward.outcome(trace.outcome, label),
        );
    }
    Ok(curve)
}
