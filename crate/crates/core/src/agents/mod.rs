//! Label samplers behind one contract.
//!
//! * [`SimulatedAgent`] draws from known per-node, per-input distributions.
//! * [`ReplayAgent`] returns previously recorded labels in order.
//! * [`RemoteAgent`] calls a live HTTP endpoint.

mod profile;
mod remote;
mod replay;
mod synthetic;

pub use profile::{AgentProfile, ProfileRecord, ProfileTable};
pub use remote::{RemoteAgent, RetryPolicy, AGENT_URL_ENV};
pub use replay::{RecordingAgent, ReplayAgent, ReplayRecord};
pub use synthetic::{generate_synthetic_dataset, GapDistribution, SyntheticDataset, SyntheticDatasetSpec};

use crate::bandit::LabelSource;
use crate::dag::NodeId;
use crate::dataset::InputRecord;
use crate::error::Result;
use crate::label::ActionLabel;
use crate::rng::StreamRng;

/// A node-level label sampler. One call is one pull.
///
/// Implementations are shared across worker threads; any per-call
/// randomness must come from `rng`, which the router derives per
/// (input, node).
pub trait Agent: Send + Sync {
    fn sample(&self, node: &NodeId, input: &InputRecord, rng: &mut StreamRng) -> Result<ActionLabel>;
}

impl<A: Agent + ?Sized> Agent for &A {
    fn sample(&self, node: &NodeId, input: &InputRecord, rng: &mut StreamRng) -> Result<ActionLabel> {
        (**self).sample(node, input, rng)
    }
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn sample(&self, node: &NodeId, input: &InputRecord, rng: &mut StreamRng) -> Result<ActionLabel> {
        (**self).sample(node, input, rng)
    }
}

impl<A: Agent + ?Sized> Agent for std::sync::Arc<A> {
    fn sample(&self, node: &NodeId, input: &InputRecord, rng: &mut StreamRng) -> Result<ActionLabel> {
        (**self).sample(node, input, rng)
    }
}

/// Binds an agent to one (node, input) stream so the bandit can pull from it.
pub struct NodeSampler<'a, A: Agent + ?Sized> {
    agent: &'a A,
    node: &'a NodeId,
    input: &'a InputRecord,
    rng: StreamRng,
}

impl<'a, A: Agent + ?Sized> NodeSampler<'a, A> {
    pub fn new(agent: &'a A, node: &'a NodeId, input: &'a InputRecord, rng: StreamRng) -> Self {
        NodeSampler {
            agent,
            node,
            input,
            rng,
        }
    }
}

impl<A: Agent + ?Sized> LabelSource for NodeSampler<'_, A> {
    fn draw(&mut self) -> Result<ActionLabel> {
        self.agent.sample(self.node, self.input, &mut self.rng)
    }
}

/// Samples from a [`ProfileTable`].
#[derive(Debug, Clone, Default)]
pub struct SimulatedAgent {
    profiles: ProfileTable,
}

impl SimulatedAgent {
    pub fn new(profiles: ProfileTable) -> Self {
        SimulatedAgent { profiles }
    }

    pub fn profiles(&self) -> &ProfileTable {
        &self.profiles
    }
}

impl Agent for SimulatedAgent {
    fn sample(&self, node: &NodeId, input: &InputRecord, rng: &mut StreamRng) -> Result<ActionLabel> {
        Ok(self.profiles.get(&input.id, node)?.sample(rng))
    }
}
