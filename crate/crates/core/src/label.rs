//! The shared three-label action space and the terminal outcomes of a route.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of label arms. Every node shares the same action space.
pub const K: usize = 3;

/// A node's answer for one input.
///
/// Variants are declared in canonical order, so the derived `Ord` agrees
/// with [`ActionLabel::ordinal`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionLabel {
    Safe,
    Unsafe,
    Escalate,
}

impl ActionLabel {
    pub const ALL: [ActionLabel; K] = [ActionLabel::Safe, ActionLabel::Unsafe, ActionLabel::Escalate];

    /// Position in the canonical ordering, starting at 1.
    pub fn ordinal(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_ordinal(ordinal: u8) -> Option<Self> {
        match ordinal {
            1..=3 => Some(Self::ALL[ordinal as usize - 1]),
            _ => None,
        }
    }

    /// Zero-based array index, used for per-arm tables.
    pub fn index(self) -> usize {
        match self {
            ActionLabel::Safe => 0,
            ActionLabel::Unsafe => 1,
            ActionLabel::Escalate => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ActionLabel::Safe => "safe",
            ActionLabel::Unsafe => "unsafe",
            ActionLabel::Escalate => "escalate",
        }
    }

    pub fn is_commit(self) -> bool {
        self != ActionLabel::Escalate
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Case-insensitive, whitespace-trimmed. Anything outside the three tokens
/// is an error; nothing is coerced to `Escalate`.
impl FromStr for ActionLabel {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let token = text.trim();
        Self::ALL
            .into_iter()
            .find(|label| token.eq_ignore_ascii_case(label.as_str()))
            .ok_or_else(|| Error::UnparseableLabel(text.to_string()))
    }
}

pub fn encode_label(label: ActionLabel) -> u8 {
    label.ordinal()
}

pub fn decode_label(ordinal: u8) -> Option<ActionLabel> {
    ActionLabel::from_ordinal(ordinal)
}

pub fn parse_label(text: &str) -> Result<ActionLabel> {
    text.parse()
}

/// Reference label of a dataset record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruth {
    Safe,
    Unsafe,
}

impl GroundTruth {
    pub fn as_label(self) -> ActionLabel {
        match self {
            GroundTruth::Safe => ActionLabel::Safe,
            GroundTruth::Unsafe => ActionLabel::Unsafe,
        }
    }

    pub fn other(self) -> Self {
        match self {
            GroundTruth::Safe => GroundTruth::Unsafe,
            GroundTruth::Unsafe => GroundTruth::Safe,
        }
    }
}

/// Terminal state of one routed input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    CommittedSafe,
    CommittedUnsafe,
    HumanReview,
}

impl Outcome {
    /// Outcome produced by a committing label; `None` for `Escalate`.
    pub fn from_commit(label: ActionLabel) -> Option<Self> {
        match label {
            ActionLabel::Safe => Some(Outcome::CommittedSafe),
            ActionLabel::Unsafe => Some(Outcome::CommittedUnsafe),
            ActionLabel::Escalate => None,
        }
    }

    pub fn committed(self) -> Option<GroundTruth> {
        match self {
            Outcome::CommittedSafe => Some(GroundTruth::Safe),
            Outcome::CommittedUnsafe => Some(GroundTruth::Unsafe),
            Outcome::HumanReview => None,
        }
    }

    pub fn is_escalated(self) -> bool {
        self == Outcome::HumanReview
    }
}

/// One counter per label, serialized as `{safe, unsafe, escalate}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub safe: u64,
    #[serde(rename = "unsafe")]
    pub unsafe_: u64,
    pub escalate: u64,
}

impl LabelCounts {
    pub fn total(&self) -> u64 {
        self.safe + self.unsafe_ + self.escalate
    }

    pub fn frequencies(&self) -> LabelFrequencies {
        let n = self.total();
        if n == 0 {
            return LabelFrequencies::default();
        }
        let n = n as f64;
        LabelFrequencies {
            safe: self.safe as f64 / n,
            unsafe_: self.unsafe_ as f64 / n,
            escalate: self.escalate as f64 / n,
        }
    }
}

impl Index<ActionLabel> for LabelCounts {
    type Output = u64;

    fn index(&self, label: ActionLabel) -> &u64 {
        match label {
            ActionLabel::Safe => &self.safe,
            ActionLabel::Unsafe => &self.unsafe_,
            ActionLabel::Escalate => &self.escalate,
        }
    }
}

impl IndexMut<ActionLabel> for LabelCounts {
    fn index_mut(&mut self, label: ActionLabel) -> &mut u64 {
        match label {
            ActionLabel::Safe => &mut self.safe,
            ActionLabel::Unsafe => &mut self.unsafe_,
            ActionLabel::Escalate => &mut self.escalate,
        }
    }
}

/// Empirical label frequencies over all draws at a node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelFrequencies {
    pub safe: f64,
    #[serde(rename = "unsafe")]
    pub unsafe_: f64,
    pub escalate: f64,
}

impl LabelFrequencies {
    pub fn get(&self, label: ActionLabel) -> f64 {
        match label {
            ActionLabel::Safe => self.safe,
            ActionLabel::Unsafe => self.unsafe_,
            ActionLabel::Escalate => self.escalate,
        }
    }
}
