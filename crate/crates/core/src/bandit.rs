//! Successive elimination over the three label arms, with escalation when the
//! budget runs out before a single arm survives.
//!
//! One agent call yields one categorical draw. A round pulls every active
//! arm once, i.e. makes `|active|` calls, and bumps each active arm's pull
//! count. The empirical distribution is the frequency of each label over all
//! draws so far. After the round, an arm `c` is dropped when
//!
//! ```text
//! p̂(leader) - w(leader) > p̂(c) + w(c),   w(c) = sqrt(ln(4 K T_c² / δ) / (2 T_c))
//! ```
//!
//! A round is only started if it fits in the remaining budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{ActionLabel, LabelCounts, LabelFrequencies, K};

pub const DEFAULT_DELTA: f64 = 0.05;

/// Half-width of the per-arm confidence interval after `pulls` pulls.
pub fn confidence_width(pulls: u64, arms: usize, delta: f64) -> Result<f64> {
    if pulls == 0 {
        return Err(Error::domain("confidence width needs at least one pull"));
    }
    if arms < 2 {
        return Err(Error::domain(format!("need at least two arms, got {arms}")));
    }
    check_delta(delta)?;
    let t = pulls as f64;
    Ok(((4.0 * arms as f64 * t * t / delta).ln() / (2.0 * t)).sqrt())
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "confidence delta must lie in (0, 1), got {delta}"
        )))
    }
}

/// Anything that produces one label per call.
pub trait LabelSource {
    fn draw(&mut self) -> Result<ActionLabel>;
}

impl<F> LabelSource for F
where
    F: FnMut() -> Result<ActionLabel>,
{
    fn draw(&mut self) -> Result<ActionLabel> {
        self()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elimination {
    pub round: u64,
    pub arm: ActionLabel,
}

/// Elimination bookkeeping for one node on one input.
///
/// Eliminated arms keep their statistics but receive no further pulls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EliminationState {
    delta: f64,
    /// Per-arm pull counts `T_c`.
    pulls: LabelCounts,
    /// How often each label was drawn.
    draws: LabelCounts,
    active: Vec<ActionLabel>,
    widths: [Option<f64>; K],
    rounds: u64,
    eliminations: Vec<Elimination>,
}

/// Result of one call to [`EliminationState::advance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Advance {
    pub survivor: Option<ActionLabel>,
    /// Pulls spent during this call only.
    pub pulls: LabelCounts,
}

impl EliminationState {
    pub fn new(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(EliminationState {
            delta,
            pulls: LabelCounts::default(),
            draws: LabelCounts::default(),
            active: ActionLabel::ALL.to_vec(),
            widths: [None; K],
            rounds: 0,
            eliminations: Vec::new(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn pulls(&self) -> LabelCounts {
        self.pulls
    }

    pub fn draws(&self) -> LabelCounts {
        self.draws
    }

    pub fn total_pulls(&self) -> u64 {
        self.pulls.total()
    }

    pub fn active(&self) -> &[ActionLabel] {
        &self.active
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    pub fn eliminations(&self) -> &[Elimination] {
        &self.eliminations
    }

    /// Width computed for `arm` after the latest round, if it has been pulled.
    pub fn width(&self, arm: ActionLabel) -> Option<f64> {
        self.widths[arm.index()]
    }

    pub fn estimates(&self) -> LabelFrequencies {
        self.draws.frequencies()
    }

    pub fn survivor(&self) -> Option<ActionLabel> {
        match self.active.as_slice() {
            [only] => Some(*only),
            _ => None,
        }
    }

    /// Runs complete rounds until one arm survives or the next round would
    /// spend more than `budget` pulls in this call.
    pub fn advance<S: LabelSource + ?Sized>(&mut self, source: &mut S, budget: u64) -> Result<Advance> {
        let mut spent = LabelCounts::default();
        while self.active.len() > 1 {
            let round_cost = self.active.len() as u64;
            if spent.total() + round_cost > budget {
                break;
            }
            for i in 0..self.active.len() {
                let arm = self.active[i];
                let label = source.draw()?;
                self.draws[label] += 1;
                self.pulls[arm] += 1;
                spent[arm] += 1;
            }
            self.rounds += 1;
            self.eliminate()?;
        }
        Ok(Advance {
            survivor: self.survivor(),
            pulls: spent,
        })
    }

    fn eliminate(&mut self) -> Result<()> {
        let estimates = self.estimates();
        for &arm in &self.active {
            self.widths[arm.index()] = Some(confidence_width(self.pulls[arm], K, self.delta)?);
        }
        // Leader among active arms; ties go to the earlier label.
        let leader = self
            .active
            .iter()
            .copied()
            .reduce(|best, arm| {
                if estimates.get(arm) > estimates.get(best) {
                    arm
                } else {
                    best
                }
            })
            .expect("active set is never empty");
        let width = |arm: ActionLabel| self.widths[arm.index()].expect("width set for active arm");
        let floor = estimates.get(leader) - width(leader);
        let (keep, dropped): (Vec<_>, Vec<_>) = self
            .active
            .iter()
            .partition(|&&arm| floor <= estimates.get(arm) + width(arm));
        let round = self.rounds;
        self.eliminations
            .extend(dropped.into_iter().map(|arm| Elimination { round, arm }));
        self.active = keep;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BanditReason {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditDecision {
    pub label: ActionLabel,
    pub reason: BanditReason,
    pub budget: u64,
    pub state: EliminationState,
}

/// Adaptive sampling for one node and one input.
///
/// Returns the surviving arm when elimination converges within `budget`
/// pulls, otherwise `Escalate` with reason `BudgetExhausted`. A budget
/// smaller than one round escalates without calling the agent.
pub fn run_adaptive_sampling<S: LabelSource + ?Sized>(
    source: &mut S,
    budget: u64,
    delta: f64,
) -> Result<BanditDecision> {
    let mut state = EliminationState::new(delta)?;
    let step = state.advance(source, budget)?;
    let (label, reason) = match step.survivor {
        Some(arm) => (arm, BanditReason::Converged),
        None => (ActionLabel::Escalate, BanditReason::BudgetExhausted),
    };
    Ok(BanditDecision {
        label,
        reason,
        budget,
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vote {
    pub label: ActionLabel,
    pub counts: LabelCounts,
}

/// Draws exactly `n` labels and returns the plurality winner. Any tie for
/// the top count returns `Escalate`.
pub fn majority_vote<S: LabelSource + ?Sized>(source: &mut S, n: u64) -> Result<Vote> {
    if n == 0 {
        return Err(Error::domain("majority vote needs at least one sample"));
    }
    let mut counts = LabelCounts::default();
    for _ in 0..n {
        counts[source.draw()?] += 1;
    }
    Ok(Vote {
        label: plurality(&counts),
        counts,
    })
}

pub(crate) fn plurality(counts: &LabelCounts) -> ActionLabel {
    let top = ActionLabel::ALL.iter().map(|&l| counts[l]).max().unwrap_or(0);
    let mut leaders = ActionLabel::ALL.into_iter().filter(|&l| counts[l] == top);
    match (leaders.next(), leaders.next()) {
        (Some(only), None) => only,
        _ => ActionLabel::Escalate,
    }
}
