//! Routes inputs through the escalation chain under a sampling condition.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{Agent, NodeSampler};
use crate::bandit::{self, check_delta, BanditReason, DEFAULT_DELTA};
use crate::dag::{DagSpec, NodeId};
use crate::dataset::{Dataset, InputRecord};
use crate::error::{Error, Result};
use crate::label::{LabelCounts, Outcome, K};
use crate::rng;
use crate::trace::{DecisionReason, EpisodeTrace, NodeRecord};

/// How each node turns agent calls into a decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionSpec {
    /// One call to the first node; its escalation goes straight to human review.
    SingleAgent,
    MajorityVote {
        n: u64,
    },
    AdaptiveSampling {
        budget: u64,
        delta: f64,
    },
}

impl ConditionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConditionSpec::SingleAgent => Ok(()),
            ConditionSpec::MajorityVote { n } if n >= 1 => Ok(()),
            ConditionSpec::MajorityVote { n } => Err(Error::Config(format!("majority vote needs n >= 1, got {n}"))),
            ConditionSpec::AdaptiveSampling { budget, delta } => {
                if budget < K as u64 {
                    return Err(Error::Config(format!(
                        "adaptive budget must be at least {K}, got {budget}"
                    )));
                }
                check_delta(delta).map_err(|e| Error::Config(e.to_string()))
            }
        }
    }

    /// Stable short name, also used for file names.
    pub fn name(&self) -> String {
        self.to_string()
    }

    /// Ten-condition comparison: single agent, MV 1/3/5, and six budgets.
    pub fn default_sweep(delta: f64) -> Vec<ConditionSpec> {
        let mut conditions = vec![
            ConditionSpec::SingleAgent,
            ConditionSpec::MajorityVote { n: 1 },
            ConditionSpec::MajorityVote { n: 3 },
            ConditionSpec::MajorityVote { n: 5 },
        ];
        conditions.extend(
            [10, 50, 75, 100, 124, 150]
                .into_iter()
                .map(|budget| ConditionSpec::AdaptiveSampling { budget, delta }),
        );
        conditions
    }
}

impl fmt::Display for ConditionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConditionSpec::SingleAgent => f.write_str("single-agent"),
            ConditionSpec::MajorityVote { n } => write!(f, "mv-{n}"),
            ConditionSpec::AdaptiveSampling { budget, delta } if delta == DEFAULT_DELTA => write!(f, "as-{budget}"),
            ConditionSpec::AdaptiveSampling { budget, delta } => write!(f, "as-{budget}-d{delta}"),
        }
    }
}

/// Accepts `single`, `single-agent`, `mv:N`, `mv-N`, `as:B`, `as-B`, `as:B:DELTA`.
impl FromStr for ConditionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let bad = || Error::Config(format!("unrecognized condition {s:?}"));
        if s == "single" || s == "single-agent" {
            return Ok(ConditionSpec::SingleAgent);
        }
        let parts: Vec<&str> = s.split([':', '-']).collect();
        let spec = match parts.as_slice() {
            ["mv", n] => ConditionSpec::MajorityVote {
                n: n.parse().map_err(|_| bad())?,
            },
            ["as", b] => ConditionSpec::AdaptiveSampling {
                budget: b.parse().map_err(|_| bad())?,
                delta: DEFAULT_DELTA,
            },
            ["as", b, d] => ConditionSpec::AdaptiveSampling {
                budget: b.parse().map_err(|_| bad())?,
                delta: d.trim_start_matches('d').parse().map_err(|_| bad())?,
            },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouterOptions {
    /// Send an input straight to human review as soon as one node runs out
    /// of budget, instead of trying the remaining nodes.
    pub early_escalate: bool,
}

/// An agent failure partway through a route.
#[derive(Debug, thiserror::Error)]
#[error("input {input_id}: {error}")]
pub struct RouteFailure {
    pub input_id: String,
    /// Nodes that completed before the failure.
    pub partial: Vec<NodeRecord>,
    #[source]
    pub error: Error,
}

/// Walks the chain, asking `decide` for each node's record until a node
/// commits. Useful for node policies other than the built-in conditions.
pub fn route_chain<F>(
    dag: &DagSpec,
    input_id: &str,
    max_nodes: usize,
    options: RouterOptions,
    mut decide: F,
) -> std::result::Result<EpisodeTrace, RouteFailure>
where
    F: FnMut(usize, &NodeId) -> Result<NodeRecord>,
{
    let mut records = Vec::new();
    for (i, node) in dag.nodes().iter().enumerate().take(max_nodes) {
        let record = match decide(i, node) {
            Ok(record) => record,
            Err(error) => {
                return Err(RouteFailure {
                    input_id: input_id.to_string(),
                    partial: records,
                    error,
                })
            }
        };
        let decision = record.decision;
        let reason = record.reason;
        records.push(record);
        if let Some(outcome) = Outcome::from_commit(decision) {
            return Ok(EpisodeTrace::new(input_id, records, outcome));
        }
        if options.early_escalate && reason == DecisionReason::BudgetExhausted {
            break;
        }
    }
    Ok(EpisodeTrace::new(input_id, records, Outcome::HumanReview))
}

pub(crate) fn node_stream(episode_seed: u64, node: &NodeId) -> rng::StreamRng {
    rng::stream(rng::derive_seed(episode_seed, node.as_str()))
}

pub(crate) fn vote_record(node: &NodeId, counts: LabelCounts, decision: crate::label::ActionLabel) -> NodeRecord {
    NodeRecord {
        node: node.clone(),
        pulls: counts,
        frequencies: counts.frequencies(),
        decision,
        reason: DecisionReason::Label,
    }
}

/// Routes one input. Each node draws from its own stream derived from `seed`.
pub fn run_episode<A: Agent + ?Sized>(
    input: &InputRecord,
    condition: &ConditionSpec,
    agent: &A,
    dag: &DagSpec,
    seed: u64,
    options: RouterOptions,
) -> std::result::Result<EpisodeTrace, RouteFailure> {
    let fail = |error| RouteFailure {
        input_id: input.id.clone(),
        partial: Vec::new(),
        error,
    };
    condition.validate().map_err(fail)?;
    let max_nodes = match condition {
        ConditionSpec::SingleAgent => 1,
        _ => dag.len(),
    };
    route_chain(dag, &input.id, max_nodes, options, |_, node| {
        let mut sampler = NodeSampler::new(agent, node, input, node_stream(seed, node));
        match *condition {
            ConditionSpec::SingleAgent => {
                let vote = bandit::majority_vote(&mut sampler, 1)?;
                Ok(vote_record(node, vote.counts, vote.label))
            }
            ConditionSpec::MajorityVote { n } => {
                let vote = bandit::majority_vote(&mut sampler, n)?;
                Ok(vote_record(node, vote.counts, vote.label))
            }
            ConditionSpec::AdaptiveSampling { budget, delta } => {
                let decision = bandit::run_adaptive_sampling(&mut sampler, budget, delta)?;
                Ok(NodeRecord {
                    node: node.clone(),
                    pulls: decision.state.pulls(),
                    frequencies: decision.state.estimates(),
                    decision: decision.label,
                    reason: match decision.reason {
                        BanditReason::Converged => DecisionReason::Converged,
                        BanditReason::BudgetExhausted => DecisionReason::BudgetExhausted,
                    },
                })
            }
        }
    })
}

#[derive(Debug)]
pub struct ConditionRun {
    pub condition: ConditionSpec,
    /// Successful traces in dataset order.
    pub traces: Vec<EpisodeTrace>,
    pub failures: Vec<RouteFailure>,
}

/// Routes every input. Seeds are derived per input id, so results do not
/// depend on `parallelism`.
pub fn run_condition<A: Agent + ?Sized>(
    dataset: &Dataset,
    condition: &ConditionSpec,
    agent: &A,
    dag: &DagSpec,
    seed: u64,
    parallelism: usize,
    options: RouterOptions,
) -> Result<ConditionRun> {
    if dataset.is_empty() {
        return Err(Error::InvalidDataset(
            "cannot run a condition on an empty dataset".into(),
        ));
    }
    condition.validate()?;
    let route =
        |input: &InputRecord| run_episode(input, condition, agent, dag, rng::derive_seed(seed, &input.id), options);
    let results: Vec<_> = if parallelism <= 1 {
        dataset.records.iter().map(route).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(|| dataset.records.par_iter().map(route).collect())
    };
    let mut run = ConditionRun {
        condition: *condition,
        traces: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for result in results {
        match result {
            Ok(trace) => run.traces.push(trace),
            Err(failure) => run.failures.push(failure),
        }
    }
    Ok(run)
}
