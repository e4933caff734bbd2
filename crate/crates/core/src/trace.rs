//! Per-input route records and their JSONL form.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::dag::NodeId;
use crate::error::{Error, Result};
use crate::label::{ActionLabel, LabelCounts, LabelFrequencies, Outcome};

/// Why a node produced its decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecisionReason {
    /// Successive elimination left a single arm.
    Converged,
    /// The decision is the sampled (or plurality) label itself.
    Label,
    /// Elimination ran out of budget and the node escalated.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node: NodeId,
    /// Agent calls attributed to each arm. Under adaptive sampling these are
    /// the per-arm pull counts; under fixed sampling, the tally of drawn labels.
    pub pulls: LabelCounts,
    /// Empirical label frequencies over every draw made at this node.
    pub frequencies: LabelFrequencies,
    pub decision: ActionLabel,
    pub reason: DecisionReason,
}

impl NodeRecord {
    pub fn calls(&self) -> u64 {
        self.pulls.total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub input_id: String,
    pub nodes: Vec<NodeRecord>,
    pub outcome: Outcome,
    pub total_pulls: u64,
}

impl EpisodeTrace {
    /// Builds a trace and derives `total_pulls` from the node records.
    pub fn new(input_id: impl Into<String>, nodes: Vec<NodeRecord>, outcome: Outcome) -> Self {
        let total_pulls = nodes.iter().map(NodeRecord::calls).sum();
        EpisodeTrace {
            input_id: input_id.into(),
            nodes,
            outcome,
            total_pulls,
        }
    }

    pub fn visited(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter().map(|r| &r.node)
    }
}

pub fn write_traces_jsonl<W: Write>(mut out: W, traces: &[EpisodeTrace]) -> Result<()> {
    for trace in traces {
        serde_json::to_writer(&mut out, trace)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_traces_jsonl<R: BufRead>(input: R) -> Result<Vec<EpisodeTrace>> {
    let mut traces = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: "<traces>".into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        traces.push(trace);
    }
    Ok(traces)
}
