//! Confidence-gated escalation for chains of labeling agents.
//!
//! Each node of a chain samples an agent repeatedly and either commits a
//! label or escalates to the next node, ending at human review. Adaptive
//! sampling uses successive elimination over the three action labels;
//! fixed-sample majority vote and a single call are the baselines.
//!
//! Modules:
//! - [`bandit`]: successive elimination and majority vote
//! - [`bounds`]: concentration and regret bound calculators
//! - [`agents`]: simulated, replayed and remote label sources
//! - [`router`]: routes inputs through the chain under a condition
//! - [`metrics`]: accuracy, error rates and Wilson intervals
//! - [`regret`]: oracle values and deployment regret curves
//! - [`harness`]: configured sweeps and report files

pub mod agents;
pub mod bandit;
pub mod bounds;
pub mod dag;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod label;
pub mod metrics;
pub mod regret;
pub mod rng;
pub mod router;
pub mod trace;

pub use agents::{Agent, AgentProfile, ProfileTable, SimulatedAgent};
pub use bandit::{majority_vote, run_adaptive_sampling, BanditDecision, BanditReason, EliminationState, DEFAULT_DELTA};
pub use dag::{DagSpec, EscalationTarget, NodeId};
pub use dataset::{Dataset, InputRecord};
pub use error::{Error, Result};
pub use label::{ActionLabel, GroundTruth, LabelCounts, LabelFrequencies, Outcome, K};
pub use metrics::{compute_metrics, wilson_ci, MetricsReport, Proportion, DEFAULT_Z};
pub use router::{run_condition, run_episode, ConditionSpec, RouterOptions};
pub use trace::{DecisionReason, EpisodeTrace, NodeRecord};
