use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dag::NodeId;
use crate::error::{Error, Result};
use crate::label::{ActionLabel, LabelFrequencies, K};
use crate::rng::StreamRng;

const SUM_TOLERANCE: f64 = 1e-12;

/// True label distribution of one node on one input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LabelFrequencies", into = "LabelFrequencies")]
pub struct AgentProfile {
    probs: [f64; K],
}

impl AgentProfile {
    /// Probabilities in canonical order (safe, unsafe, escalate).
    pub fn new(probs: [f64; K]) -> Result<Self> {
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidSpec(format!("probabilities out of range: {probs:?}")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidSpec(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(AgentProfile { probs })
    }

    /// Like [`AgentProfile::new`] but also requires a unique best label with
    /// at least `floor` of separation.
    pub fn with_min_gap(probs: [f64; K], floor: f64) -> Result<Self> {
        let profile = Self::new(probs)?;
        if floor.is_nan() || floor <= 0.0 || profile.gap() < floor {
            return Err(Error::InvalidSpec(format!(
                "gap {} below floor {floor} for {probs:?}",
                profile.gap()
            )));
        }
        Ok(profile)
    }

    pub fn probs(&self) -> [f64; K] {
        self.probs
    }

    pub fn prob(&self, label: ActionLabel) -> f64 {
        self.probs[label.index()]
    }

    /// The modal label, or `None` when the top probability is shared.
    pub fn best(&self) -> Option<ActionLabel> {
        let top = self.probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut leaders = ActionLabel::ALL.into_iter().filter(|&l| self.prob(l) == top);
        match (leaders.next(), leaders.next()) {
            (Some(only), None) => Some(only),
            _ => None,
        }
    }

    /// Top probability minus the runner-up. Zero when the top is shared.
    pub fn gap(&self) -> f64 {
        let mut sorted = self.probs;
        sorted.sort_by(|a, b| b.total_cmp(a));
        sorted[0] - sorted[1]
    }

    pub fn sample(&self, rng: &mut StreamRng) -> ActionLabel {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for label in ActionLabel::ALL {
            acc += self.prob(label);
            if u < acc {
                return label;
            }
        }
        // Rounding left `acc` a hair under 1; fall back to the last label with mass.
        ActionLabel::ALL
            .into_iter()
            .rev()
            .find(|&l| self.prob(l) > 0.0)
            .expect("profile has positive mass")
    }
}

impl TryFrom<LabelFrequencies> for AgentProfile {
    type Error = Error;

    fn try_from(f: LabelFrequencies) -> Result<Self> {
        AgentProfile::new([f.safe, f.unsafe_, f.escalate])
    }
}

impl From<AgentProfile> for LabelFrequencies {
    fn from(p: AgentProfile) -> Self {
        LabelFrequencies {
            safe: p.probs[0],
            unsafe_: p.probs[1],
            escalate: p.probs[2],
        }
    }
}

/// One line of a profiles file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub input_id: String,
    pub node: NodeId,
    pub profile: AgentProfile,
}

/// Profiles keyed by input id, then node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileTable {
    by_input: HashMap<String, BTreeMap<NodeId, AgentProfile>>,
}

impl ProfileTable {
    pub fn insert(&mut self, input_id: impl Into<String>, node: NodeId, profile: AgentProfile) {
        self.by_input.entry(input_id.into()).or_default().insert(node, profile);
    }

    pub fn get(&self, input_id: &str, node: &NodeId) -> Result<&AgentProfile> {
        self.by_input
            .get(input_id)
            .and_then(|nodes| nodes.get(node))
            .ok_or_else(|| Error::MissingProfile {
                node: node.to_string(),
                input_id: input_id.to_string(),
            })
    }

    /// Profiles for `input_id` in the order of `nodes`.
    pub fn chain(&self, input_id: &str, nodes: &[NodeId]) -> Result<Vec<AgentProfile>> {
        nodes.iter().map(|n| self.get(input_id, n).copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.by_input.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records sorted by input id then node, for stable output.
    pub fn records(&self) -> Vec<ProfileRecord> {
        let mut ids: Vec<&String> = self.by_input.keys().collect();
        ids.sort();
        ids.into_iter()
            .flat_map(|id| {
                self.by_input[id].iter().map(move |(node, profile)| ProfileRecord {
                    input_id: id.clone(),
                    node: node.clone(),
                    profile: *profile,
                })
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for record in self.records() {
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut table = ProfileTable::default();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: ProfileRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: "<profiles>".into(),
                line: i + 1,
                message: e.to_string(),
            })?;
            table.insert(record.input_id, record.node, record.profile);
        }
        Ok(table)
    }
}
