//! Escalation topology: an ordered chain of agent nodes ending in human review.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn worker() -> Self {
        NodeId::new("worker")
    }

    pub fn risk() -> Self {
        NodeId::new("risk")
    }

    pub fn legal() -> Self {
        NodeId::new("legal")
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(name: &str) -> Self {
        NodeId::new(name)
    }
}

/// Where a node sends an input it escalates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EscalationTarget {
    Node(NodeId),
    HumanReview,
}

/// A validated escalation chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DagSpec {
    nodes: Vec<NodeId>,
    edges: BTreeMap<NodeId, EscalationTarget>,
}

impl Default for DagSpec {
    /// Worker, then Risk, then Legal, then human review.
    fn default() -> Self {
        DagSpec::chain([NodeId::worker(), NodeId::risk(), NodeId::legal()]).expect("default chain is valid")
    }
}

impl DagSpec {
    /// Builds a chain where each node escalates to the next and the last
    /// node escalates to human review.
    pub fn chain<I, N>(nodes: I) -> Result<Self>
    where
        I: IntoIterator<Item = N>,
        N: Into<NodeId>,
    {
        let nodes: Vec<NodeId> = nodes.into_iter().map(Into::into).collect();
        let edges = nodes
            .iter()
            .enumerate()
            .map(|(i, node)| {
                let target = match nodes.get(i + 1) {
                    Some(next) => EscalationTarget::Node(next.clone()),
                    None => EscalationTarget::HumanReview,
                };
                (node.clone(), target)
            })
            .collect();
        DagSpec::from_edges(nodes, edges)
    }

    /// Validates an explicit successor map against the declared node order.
    ///
    /// The map must describe a strict chain: one edge per node, no cycles,
    /// exactly one node escalating to human review, and a topological order
    /// equal to `nodes`.
    pub fn from_edges(nodes: Vec<NodeId>, edges: BTreeMap<NodeId, EscalationTarget>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidDag("chain must contain at least one node".into()));
        }
        let mut seen = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if seen.insert(node.clone(), i).is_some() {
                return Err(Error::InvalidDag(format!("duplicate node {node}")));
            }
        }
        if edges.len() != nodes.len() {
            return Err(Error::InvalidDag(format!(
                "expected {} escalation edges, found {}",
                nodes.len(),
                edges.len()
            )));
        }
        for (from, to) in &edges {
            if !seen.contains_key(from) {
                return Err(Error::InvalidDag(format!("edge from unknown node {from}")));
            }
            if let EscalationTarget::Node(to) = to {
                if !seen.contains_key(to) {
                    return Err(Error::InvalidDag(format!("edge {from} -> unknown node {to}")));
                }
            }
        }

        let dag = DagSpec { nodes, edges };
        let order = dag.topological_order()?;
        if order != dag.nodes {
            return Err(Error::InvalidDag(
                "escalation edges do not follow the declared node order".into(),
            ));
        }
        for (i, node) in dag.nodes.iter().enumerate() {
            let expected = match dag.nodes.get(i + 1) {
                Some(next) => EscalationTarget::Node(next.clone()),
                None => EscalationTarget::HumanReview,
            };
            if dag.edges[node] != expected {
                return Err(Error::InvalidDag(format!(
                    "node {node} must escalate to the next node or to human review"
                )));
            }
        }
        Ok(dag)
    }

    /// Kahn's algorithm over the escalation edges. Fails on a cycle.
    pub fn topological_order(&self) -> Result<Vec<NodeId>> {
        let mut in_degree: BTreeMap<&NodeId, usize> = self.nodes.iter().map(|n| (n, 0)).collect();
        for target in self.edges.values() {
            if let EscalationTarget::Node(to) = target {
                *in_degree.get_mut(to).expect("edge targets validated") += 1;
            }
        }
        // Seed in declaration order so the result is stable.
        let mut ready: VecDeque<&NodeId> = self.nodes.iter().filter(|n| in_degree[n] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(node) = ready.pop_front() {
            order.push(node.clone());
            if let Some(EscalationTarget::Node(to)) = self.edges.get(node) {
                let degree = in_degree.get_mut(to).expect("edge targets validated");
                *degree -= 1;
                if *degree == 0 {
                    ready.push_back(to);
                }
            }
        }
        if order.len() != self.nodes.len() {
            return Err(Error::InvalidDag("escalation edges contain a cycle".into()));
        }
        Ok(order)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Maximum episode length.
    pub fn diameter(&self) -> usize {
        self.nodes.len()
    }

    pub fn escalation_target(&self, node: &NodeId) -> Option<&EscalationTarget> {
        self.edges.get(node)
    }

    pub fn position(&self, node: &NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }
}
