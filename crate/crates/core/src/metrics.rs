//! Classification metrics over trace sets, each proportion with a Wilson
//! score interval.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{GroundTruth, Outcome};
use crate::trace::EpisodeTrace;

pub const DEFAULT_Z: f64 = 1.96;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_ci(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::domain("Wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(Error::domain(format!("{successes} successes out of {trials} trials")));
    }
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::domain(format!("z must be positive, got {z}")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    // At p = 0 or 1 the closed form lands on the boundary analytically.
    let low = if successes == 0 {
        0.0
    } else {
        ((center - spread) / denom).clamp(0.0, p)
    };
    let high = if successes == trials {
        1.0
    } else {
        ((center + spread) / denom).clamp(p, 1.0)
    };
    Ok((low, high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub numerator: u64,
    pub denominator: u64,
}

impl Proportion {
    /// `None` for an empty denominator.
    pub fn new(numerator: u64, denominator: u64, z: f64) -> Result<Option<Self>> {
        if denominator == 0 {
            return Ok(None);
        }
        let (ci_low, ci_high) = wilson_ci(numerator, denominator, z)?;
        Ok(Some(Proportion {
            estimate: numerator as f64 / denominator as f64,
            ci_low,
            ci_high,
            numerator,
            denominator,
        }))
    }

    /// `0.768 [0.695, 0.827]`
    pub fn display(&self) -> String {
        format!("{:.3} [{:.3}, {:.3}]", self.estimate, self.ci_low, self.ci_high)
    }
}

fn display_opt(p: &Option<Proportion>) -> String {
    p.as_ref().map_or_else(|| "---".to_string(), Proportion::display)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: u64,
    pub escalated: u64,
    pub non_escalated: u64,
    /// Correct commits over non-escalated inputs.
    pub accuracy: Option<Proportion>,
    /// Safe inputs committed unsafe, over non-escalated safe inputs.
    pub fpr: Option<Proportion>,
    /// Unsafe inputs committed safe, over non-escalated unsafe inputs.
    pub fnr: Option<Proportion>,
    pub escalation: Proportion,
    pub total_pulls: u64,
    pub avg_pulls: f64,
    /// FNR restricted to the flagged subset, when one was given.
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "present")]
    pub sw_fnr: Option<Option<Proportion>>,
}

/// A field that is present, even as `null`, reads back as `Some`.
fn present<'de, D, T>(deserializer: D) -> std::result::Result<Option<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    T::deserialize(deserializer).map(Some)
}

#[derive(Default)]
struct Confusion {
    correct: u64,
    committed: u64,
    safe_committed: u64,
    safe_as_unsafe: u64,
    unsafe_committed: u64,
    unsafe_as_safe: u64,
}

impl Confusion {
    fn add(&mut self, truth: GroundTruth, committed: GroundTruth) {
        self.committed += 1;
        if truth == committed {
            self.correct += 1;
        }
        match truth {
            GroundTruth::Safe => {
                self.safe_committed += 1;
                if committed == GroundTruth::Unsafe {
                    self.safe_as_unsafe += 1;
                }
            }
            GroundTruth::Unsafe => {
                self.unsafe_committed += 1;
                if committed == GroundTruth::Safe {
                    self.unsafe_as_safe += 1;
                }
            }
        }
    }
}

pub fn compute_metrics(
    traces: &[EpisodeTrace],
    ground_truth: &HashMap<String, GroundTruth>,
    flagged: Option<&HashSet<String>>,
    z: f64,
) -> Result<MetricsReport> {
    let mut all = Confusion::default();
    let mut sw = Confusion::default();
    let mut escalated = 0u64;
    let mut total_pulls = 0u64;
    for trace in traces {
        let truth = *ground_truth
            .get(&trace.input_id)
            .ok_or_else(|| Error::MissingGroundTruth(trace.input_id.clone()))?;
        total_pulls += trace.total_pulls;
        match trace.outcome {
            Outcome::HumanReview => escalated += 1,
            outcome => {
                let committed = outcome.committed().expect("non-escalated outcome commits");
                all.add(truth, committed);
                if flagged.is_some_and(|f| f.contains(&trace.input_id)) {
                    sw.add(truth, committed);
                }
            }
        }
    }
    let n = traces.len() as u64;
    if n == 0 {
        return Err(Error::InvalidDataset("no traces to score".into()));
    }
    Ok(MetricsReport {
        n,
        escalated,
        non_escalated: all.committed,
        accuracy: Proportion::new(all.correct, all.committed, z)?,
        fpr: Proportion::new(all.safe_as_unsafe, all.safe_committed, z)?,
        fnr: Proportion::new(all.unsafe_as_safe, all.unsafe_committed, z)?,
        escalation: Proportion::new(escalated, n, z)?.expect("n > 0"),
        total_pulls,
        avg_pulls: total_pulls as f64 / n as f64,
        sw_fnr: match flagged {
            Some(_) => Some(Proportion::new(sw.unsafe_as_safe, sw.unsafe_committed, z)?),
            None => None,
        },
    })
}

/// Aligned text table, one row per named report.
pub fn render_table(rows: &[(String, &MetricsReport)]) -> String {
    let with_sw = rows.iter().any(|(_, r)| r.sw_fnr.is_some());
    let mut header = vec!["Condition", "Accuracy", "FPR", "FNR"];
    if with_sw {
        header.push("SW FNR");
    }
    header.extend(["Esc.", "Avg pulls"]);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, r)| {
            let mut row = vec![
                name.clone(),
                display_opt(&r.accuracy),
                display_opt(&r.fpr),
                display_opt(&r.fnr),
            ];
            if with_sw {
                row.push(r.sw_fnr.as_ref().map_or_else(|| "---".to_string(), display_opt));
            }
            row.push(r.escalation.display());
            row.push(format!("{:.2}", r.avg_pulls));
            row
        })
        .collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.iter().map(|h| h.to_string()).collect());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in body {
        out.push_str(&line(row));
        out.push('\n');
    }
    out
}
