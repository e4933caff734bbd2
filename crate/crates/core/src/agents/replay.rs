use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, Write};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::Agent;
use crate::dag::NodeId;
use crate::dataset::InputRecord;
use crate::error::{Error, Result};
use crate::label::ActionLabel;
use crate::rng::StreamRng;

/// One recorded agent call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub node: NodeId,
    pub input_id: String,
    pub label: ActionLabel,
}

type CallKey = (NodeId, String);

/// Serves recorded labels per (node, input) in file order.
#[derive(Debug, Default)]
pub struct ReplayAgent {
    queues: Mutex<BTreeMap<CallKey, VecDeque<ActionLabel>>>,
}

impl ReplayAgent {
    pub fn new(records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        let mut queues: BTreeMap<CallKey, VecDeque<ActionLabel>> = BTreeMap::new();
        for r in records {
            queues.entry((r.node, r.input_id)).or_default().push_back(r.label);
        }
        ReplayAgent {
            queues: Mutex::new(queues),
        }
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        Ok(Self::new(read_records(input)?))
    }

    /// Labels still queued across all keys.
    pub fn remaining(&self) -> usize {
        self.queues
            .lock()
            .expect("replay lock")
            .values()
            .map(VecDeque::len)
            .sum()
    }
}

pub(crate) fn read_records<R: BufRead>(input: R) -> Result<Vec<ReplayRecord>> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: "<replay>".into(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(records)
}

impl Agent for ReplayAgent {
    fn sample(&self, node: &NodeId, input: &InputRecord, _rng: &mut StreamRng) -> Result<ActionLabel> {
        let mut queues = self.queues.lock().expect("replay lock");
        queues
            .get_mut(&(node.clone(), input.id.clone()))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| Error::ReplayExhausted {
                node: node.to_string(),
                input_id: input.id.clone(),
            })
    }
}

/// Wraps another agent and keeps every successful call for later replay.
#[derive(Debug)]
pub struct RecordingAgent<A> {
    inner: A,
    calls: Mutex<BTreeMap<CallKey, Vec<ActionLabel>>>,
}

impl<A: Agent> RecordingAgent<A> {
    pub fn new(inner: A) -> Self {
        RecordingAgent {
            inner,
            calls: Mutex::new(BTreeMap::new()),
        }
    }

    /// Calls grouped by (node, input), each group in call order.
    pub fn records(&self) -> Vec<ReplayRecord> {
        let calls = self.calls.lock().expect("recording lock");
        calls
            .iter()
            .flat_map(|((node, input_id), labels)| {
                labels.iter().map(move |&label| ReplayRecord {
                    node: node.clone(),
                    input_id: input_id.clone(),
                    label,
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
}

impl<A: Agent> Agent for RecordingAgent<A> {
    fn sample(&self, node: &NodeId, input: &InputRecord, rng: &mut StreamRng) -> Result<ActionLabel> {
        let label = self.inner.sample(node, input, rng)?;
        self.calls
            .lock()
            .expect("recording lock")
            .entry((node.clone(), input.id.clone()))
            .or_default()
            .push(label);
        Ok(label)
    }
}
