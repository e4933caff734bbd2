//! Runs a configured sweep and writes its artifacts.
//!
//! Layout of the output directory:
//! - `traces/<condition>.jsonl`: one trace per successfully routed input
//! - `failures/<condition>.jsonl`: inputs whose agent calls failed, if any
//! - `report.json`, `report.txt`: metrics per condition and the sweep summary
//! - `metadata.json`: wall-clock time and environment, the only
//!   non-deterministic file

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::{AgentMode, DatasetSource, ExperimentConfig};
use crate::agents::{
    generate_synthetic_dataset, Agent, ProfileTable, RemoteAgent, ReplayAgent, RetryPolicy, SimulatedAgent,
};
use crate::bounds::min_samples;
use crate::dataset::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::label::K;
use crate::metrics::{compute_metrics, render_table, MetricsReport};
use crate::router::{run_condition, ConditionSpec};
use crate::trace::{read_traces_jsonl, write_traces_jsonl, EpisodeTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub undecodable_lines: usize,
    pub duplicate_ids: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub input_id: String,
    pub error: String,
    pub completed_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition: String,
    pub spec: ConditionSpec,
    /// Absent when every input failed.
    pub metrics: Option<MetricsReport>,
    pub failures: Vec<FailureRecord>,
    /// Traces whose pull count broke the condition's ceiling.
    pub pull_bound_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub budget: u64,
    pub escalation: f64,
}

/// Where adaptive sampling stops escalating everything, next to the budget
/// predicted from the sample-complexity bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    /// Smallest swept budget with escalation rate below 1.
    pub inflection_budget: Option<u64>,
    /// Smallest gap among the simulated profiles.
    pub gap: Option<f64>,
    /// `K * ceil(n*(delta, gap))`.
    pub predicted_budget: Option<u64>,
}

impl SweepSummary {
    /// Index distance between the inflection and the predicted budget on the
    /// swept grid, where the prediction snaps to the nearest swept budget.
    pub fn steps_from_prediction(&self) -> Option<usize> {
        let inflection = self.inflection_budget?;
        let predicted = self.predicted_budget?;
        let grid: Vec<u64> = self.points.iter().map(|p| p.budget).collect();
        let at = grid.iter().position(|&b| b == inflection)?;
        let nearest = grid
            .iter()
            .enumerate()
            .min_by_key(|(_, &b)| b.abs_diff(predicted))
            .map(|(i, _)| i)?;
        Some(at.abs_diff(nearest))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub seed: u64,
    pub dataset: DatasetSummary,
    pub conditions: Vec<ConditionReport>,
    pub sweep: Option<SweepSummary>,
}

impl ExperimentReport {
    pub fn has_failures(&self) -> bool {
        self.conditions.iter().any(|c| !c.failures.is_empty())
    }

    pub fn render_text(&self) -> String {
        let rows: Vec<(String, &MetricsReport)> = self
            .conditions
            .iter()
            .filter_map(|c| c.metrics.as_ref().map(|m| (c.condition.clone(), m)))
            .collect();
        let mut text = format!("seed {}  inputs {}\n\n", self.seed, self.dataset.n);
        text.push_str(&render_table(&rows));
        for c in self.conditions.iter().filter(|c| !c.failures.is_empty()) {
            text.push_str(&format!("\n{}: {} inputs failed", c.condition, c.failures.len()));
        }
        if let Some(sweep) = &self.sweep {
            let show = |b: Option<u64>| b.map_or("none".to_string(), |b| b.to_string());
            text.push_str(&format!(
                "\nbudget sweep: first non-degenerate budget {}, predicted {}",
                show(sweep.inflection_budget),
                show(sweep.predicted_budget)
            ));
            if let Some(gap) = sweep.gap {
                text.push_str(&format!(" (gap {gap:.3})"));
            }
            text.push('\n');
        }
        text
    }
}

/// The report plus where it was written.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub report: ExperimentReport,
    pub out_dir: PathBuf,
    /// Trace file per condition, in condition order.
    pub trace_files: Vec<PathBuf>,
}

impl ReportBundle {
    pub fn report_json(&self) -> PathBuf {
        self.out_dir.join("report.json")
    }
}

/// Ceiling on calls for one input: `budget` per node under adaptive
/// sampling, `n` per node under majority vote, one for a single agent.
pub fn pull_ceiling(condition: &ConditionSpec, nodes: usize) -> u64 {
    match *condition {
        ConditionSpec::SingleAgent => 1,
        ConditionSpec::MajorityVote { n } => n * nodes as u64,
        ConditionSpec::AdaptiveSampling { budget, .. } => budget * nodes as u64,
    }
}

/// Whether a trace's pull count is possible under the condition.
pub fn pulls_within_bounds(condition: &ConditionSpec, trace: &EpisodeTrace, nodes: usize) -> bool {
    let pulls = trace.total_pulls;
    match *condition {
        ConditionSpec::MajorityVote { n } => pulls.is_multiple_of(n) && (1..=nodes as u64).contains(&(pulls / n)),
        _ => pulls <= pull_ceiling(condition, nodes),
    }
}

struct Prepared {
    dataset: Dataset,
    summary: DatasetSummary,
    profiles: Option<ProfileTable>,
}

fn config_io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("cannot read {}: {e}", path.display()))
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    match &cfg.source {
        DatasetSource::Synthetic(spec) => {
            let data = generate_synthetic_dataset(spec)?;
            Ok(Prepared {
                summary: DatasetSummary {
                    n: data.dataset.len(),
                    undecodable_lines: 0,
                    duplicate_ids: 0,
                },
                dataset: data.dataset,
                profiles: Some(data.profiles),
            })
        }
        DatasetSource::Jsonl {
            path,
            stratify_k,
            dataset_seed,
            profiles,
        } => {
            let loaded = load_dataset(path, *stratify_k, *dataset_seed).map_err(|e| match e {
                Error::Io(io) => config_io(path, io),
                other => other,
            })?;
            let profiles = match profiles {
                Some(p) => Some(ProfileTable::read_jsonl(BufReader::new(
                    File::open(p).map_err(|e| config_io(p, e))?,
                ))?),
                None => None,
            };
            Ok(Prepared {
                summary: DatasetSummary {
                    n: loaded.dataset.len(),
                    undecodable_lines: loaded.undecodable_lines.len(),
                    duplicate_ids: loaded.duplicate_ids.len(),
                },
                dataset: loaded.dataset,
                profiles,
            })
        }
    }
}

fn build_agent(cfg: &ExperimentConfig, profiles: Option<&ProfileTable>) -> Result<Box<dyn Agent>> {
    Ok(match &cfg.agent {
        AgentMode::Simulated => Box::new(SimulatedAgent::new(
            profiles
                .cloned()
                .ok_or_else(|| Error::Config("simulated agent needs profiles".into()))?,
        )),
        AgentMode::Replay { path } => Box::new(ReplayAgent::read_jsonl(BufReader::new(
            File::open(path).map_err(|e| config_io(path, e))?,
        ))?),
        AgentMode::Remote { url } => Box::new(RemoteAgent::new(url, RetryPolicy::default())?),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn sweep_summary(
    cfg: &ExperimentConfig,
    conditions: &[ConditionReport],
    profiles: &ProfileTable,
) -> Option<SweepSummary> {
    let mut points: Vec<(SweepPoint, f64)> = conditions
        .iter()
        .filter_map(|c| match (c.spec, &c.metrics) {
            (ConditionSpec::AdaptiveSampling { budget, delta }, Some(m)) => Some((
                SweepPoint {
                    budget,
                    escalation: m.escalation.estimate,
                },
                delta,
            )),
            _ => None,
        })
        .collect();
    if points.is_empty() {
        return None;
    }
    points.sort_by_key(|(p, _)| p.budget);
    let inflection_budget = points.iter().find(|(p, _)| p.escalation < 1.0).map(|(p, _)| p.budget);
    let gap = profiles
        .records()
        .iter()
        .map(|r| r.profile.gap())
        .filter(|g| *g > 0.0)
        .min_by(f64::total_cmp);
    let delta = points.first().map_or(cfg.delta, |(_, d)| *d);
    let predicted_budget = gap
        .and_then(|g| min_samples(delta, g).ok())
        .map(|n| K as u64 * n.ceil() as u64);
    Some(SweepSummary {
        points: points.into_iter().map(|(p, _)| p).collect(),
        inflection_budget,
        gap,
        predicted_budget,
    })
}

/// Runs every condition in order and writes the artifacts under `cfg.out`.
///
/// Configuration problems fail before anything is written. Agent failures
/// are isolated per input and recorded; outputs are kept either way.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ReportBundle> {
    let started = SystemTime::now();
    let prepared = prepare(cfg)?;
    let agent = build_agent(cfg, prepared.profiles.as_ref())?;
    let truth = prepared.dataset.ground_truth();
    let flagged = cfg.sw_group.as_deref().map(|g| prepared.dataset.group_members(g));
    let nodes = cfg.dag.len();

    fs::create_dir_all(cfg.out.join("traces"))?;
    let mut conditions = Vec::with_capacity(cfg.conditions.len());
    let mut trace_files = Vec::with_capacity(cfg.conditions.len());
    for condition in &cfg.conditions {
        let name = condition.name();
        let run = run_condition(
            &prepared.dataset,
            condition,
            agent.as_ref(),
            &cfg.dag,
            cfg.seed,
            cfg.parallelism,
            cfg.options,
        )?;
        let trace_path = cfg.out.join("traces").join(format!("{name}.jsonl"));
        write_traces_jsonl(BufWriter::new(File::create(&trace_path)?), &run.traces)?;
        trace_files.push(trace_path);

        let failures: Vec<FailureRecord> = run
            .failures
            .iter()
            .map(|f| FailureRecord {
                input_id: f.input_id.clone(),
                error: f.error.to_string(),
                completed_nodes: f.partial.len(),
            })
            .collect();
        if !failures.is_empty() {
            let dir = cfg.out.join("failures");
            fs::create_dir_all(&dir)?;
            let mut out = BufWriter::new(File::create(dir.join(format!("{name}.jsonl")))?);
            for failure in &failures {
                serde_json::to_writer(&mut out, failure)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
        let metrics = match run.traces.is_empty() {
            true => None,
            false => Some(compute_metrics(&run.traces, &truth, flagged.as_ref(), cfg.z)?),
        };
        conditions.push(ConditionReport {
            condition: name,
            spec: *condition,
            metrics,
            failures,
            pull_bound_violations: run
                .traces
                .iter()
                .filter(|t| !pulls_within_bounds(condition, t, nodes))
                .count(),
        });
    }

    let sweep = match (&cfg.agent, &prepared.profiles) {
        (AgentMode::Simulated, Some(profiles)) => sweep_summary(cfg, &conditions, profiles),
        _ => None,
    };
    let report = ExperimentReport {
        seed: cfg.seed,
        dataset: prepared.summary,
        conditions,
        sweep,
    };
    write_json(&cfg.out.join("report.json"), &report)?;
    fs::write(cfg.out.join("report.txt"), report.render_text())?;

    let finished = SystemTime::now();
    let secs = |t: SystemTime| t.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
    write_json(
        &cfg.out.join("metadata.json"),
        &serde_json::json!({
            "started_unix": secs(started),
            "finished_unix": secs(finished),
            "version": env!("CARGO_PKG_VERSION"),
            "out": cfg.out,
            "config": cfg,
        }),
    )?;
    Ok(ReportBundle {
        report,
        out_dir: cfg.out.clone(),
        trace_files,
    })
}

/// Reads a trace file and scores it against `dataset`.
pub fn metrics_from_trace_file(
    path: &Path,
    dataset: &Dataset,
    flagged_group: Option<&str>,
    z: f64,
) -> Result<MetricsReport> {
    let traces = read_traces_jsonl(BufReader::new(File::open(path).map_err(|e| config_io(path, e))?))?;
    let flagged = flagged_group.map(|g| dataset.group_members(g));
    compute_metrics(&traces, &dataset.ground_truth(), flagged.as_ref(), z)
}

/// Loads the dataset a config describes, without running anything.
pub fn dataset_for(cfg: &ExperimentConfig) -> Result<Dataset> {
    prepare(cfg).map(|p| p.dataset)
}
