//! Seeded generator of labeled inputs with known per-node label distributions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{AgentProfile, ProfileTable};
use crate::dag::{DagSpec, NodeId};
use crate::dataset::{Dataset, InputRecord};
use crate::error::{Error, Result};
use crate::label::{ActionLabel, GroundTruth};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GapDistribution {
    Fixed { gap: f64 },
    Uniform { low: f64, high: f64 },
}

impl GapDistribution {
    fn validate(&self) -> Result<()> {
        let ok = |g: f64| g > 0.0 && g <= 1.0;
        match *self {
            GapDistribution::Fixed { gap } if ok(gap) => Ok(()),
            GapDistribution::Uniform { low, high } if ok(low) && ok(high) && low <= high => Ok(()),
            other => Err(Error::InvalidSpec(format!("gaps must lie in (0, 1]: {other:?}"))),
        }
    }

    fn draw(&self, rng: &mut rng::StreamRng) -> f64 {
        match *self {
            GapDistribution::Fixed { gap } => gap,
            GapDistribution::Uniform { low, high } if low == high => low,
            GapDistribution::Uniform { low, high } => rng.random_range(low..=high),
        }
    }

    pub fn min(&self) -> f64 {
        match *self {
            GapDistribution::Fixed { gap } => gap,
            GapDistribution::Uniform { low, .. } => low,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDatasetSpec {
    pub inputs: usize,
    /// Probability that an input's reference label is unsafe.
    pub unsafe_fraction: f64,
    /// Gap between the modal label and the runner-up, drawn per (node, input).
    pub gap: GapDistribution,
    /// Mass on the third label, capped at `(1 - gap) / 3` so the gap stays exact.
    pub escalate_mass: f64,
    /// Probability that a node's modal label is `escalate` rather than the
    /// reference label.
    pub escalate_best_fraction: f64,
    pub nodes: Vec<NodeId>,
    pub seed: u64,
}

impl Default for SyntheticDatasetSpec {
    fn default() -> Self {
        SyntheticDatasetSpec {
            inputs: 161,
            unsafe_fraction: 0.4,
            gap: GapDistribution::Fixed { gap: 0.5 },
            escalate_mass: 0.1,
            escalate_best_fraction: 0.0,
            nodes: DagSpec::default().nodes().to_vec(),
            seed: 0,
        }
    }
}

impl SyntheticDatasetSpec {
    fn validate(&self) -> Result<()> {
        if self.inputs == 0 {
            return Err(Error::InvalidSpec("need at least one input".into()));
        }
        if self.nodes.is_empty() {
            return Err(Error::InvalidSpec("need at least one node".into()));
        }
        for (name, value) in [
            ("unsafe_fraction", self.unsafe_fraction),
            ("escalate_mass", self.escalate_mass),
            ("escalate_best_fraction", self.escalate_best_fraction),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidSpec(format!("{name} must lie in [0, 1], got {value}")));
            }
        }
        self.gap.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub profiles: ProfileTable,
}

/// Profile with modal label `best`, runner-up `runner_up` and the remaining
/// label holding `min(third_mass, (1 - gap) / 3)`.
pub(crate) fn profile_with_gap(
    best: ActionLabel,
    runner_up: ActionLabel,
    gap: f64,
    third_mass: f64,
) -> Result<AgentProfile> {
    let third = third_mass.min((1.0 - gap) / 3.0).max(0.0);
    let mut probs = [third; 3];
    probs[best.index()] = (1.0 - third + gap) / 2.0;
    probs[runner_up.index()] = (1.0 - third - gap) / 2.0;
    AgentProfile::new(probs)
}

pub fn generate_synthetic_dataset(spec: &SyntheticDatasetSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = rng::stream(spec.seed);
    let mut records = Vec::with_capacity(spec.inputs);
    let mut profiles = ProfileTable::default();
    let width = spec.inputs.to_string().len().max(4);
    for i in 0..spec.inputs {
        let id = format!("syn-{i:0width$}");
        let truth = if rng.random_bool(spec.unsafe_fraction) {
            GroundTruth::Unsafe
        } else {
            GroundTruth::Safe
        };
        for node in &spec.nodes {
            let gap = spec.gap.draw(&mut rng);
            let escalate_best = rng.random_bool(spec.escalate_best_fraction);
            let profile = if escalate_best {
                profile_with_gap(ActionLabel::Escalate, truth.as_label(), gap, spec.escalate_mass)?
            } else {
                profile_with_gap(truth.as_label(), truth.other().as_label(), gap, spec.escalate_mass)?
            };
            profiles.insert(id.clone(), node.clone(), profile);
        }
        records.push(InputRecord {
            text: format!("synthetic input {i}"),
            id,
            label: truth,
            group: None,
        });
    }
    Ok(SyntheticDataset {
        dataset: Dataset::new(records),
        profiles,
    })
}
