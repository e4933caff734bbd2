//! Experiment configuration.
//!
//! The config file is flat TOML: one `key = value` per line, values are
//! strings, numbers, booleans or lists. Every key is optional except `seed`,
//! which may instead come from the command line.
//!
//! ```toml
//! seed = 42
//! out = "runs/default"
//! parallelism = 4
//! delta = 0.05
//! z = 1.96
//! early_escalate = false
//! conditions = ["single", "mv:1", "mv:3", "as:100", "as:150:0.01"]
//!
//! # agent = "simulated" | "replay" | "remote"
//! agent = "simulated"
//! agent_url = "http://localhost:8080"   # remote only
//! replay = "calls.jsonl"                # replay only
//!
//! # Either a JSONL dataset...
//! dataset = "data.jsonl"
//! profiles = "profiles.jsonl"           # simulated agent with a file dataset
//! stratify_k = 50
//! dataset_seed = 42
//! sw_group = "SuicideWatch"             # subset for the extra FNR column
//!
//! # ...or a synthetic one (used when `dataset` is absent).
//! synthetic_inputs = 161
//! synthetic_gap = 0.5                   # or synthetic_gap_low / synthetic_gap_high
//! synthetic_unsafe_fraction = 0.4
//! synthetic_escalate_mass = 0.1
//! synthetic_escalate_best_fraction = 0.0
//! synthetic_seed = 7
//! ```
//!
//! Relative paths are resolved against the config file's directory.
//! `as:B` conditions take the file-level `delta`; `as:B:D` overrides it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{GapDistribution, SyntheticDatasetSpec, AGENT_URL_ENV};
use crate::bandit::{check_delta, DEFAULT_DELTA};
use crate::dag::DagSpec;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_Z;
use crate::router::{ConditionSpec, RouterOptions};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub delta: Option<f64>,
    pub z: Option<f64>,
    pub early_escalate: Option<bool>,
    pub conditions: Option<Vec<String>>,
    pub agent: Option<String>,
    pub agent_url: Option<String>,
    pub replay: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub stratify_k: Option<usize>,
    pub dataset_seed: Option<u64>,
    pub sw_group: Option<String>,
    pub synthetic_inputs: Option<usize>,
    pub synthetic_gap: Option<f64>,
    pub synthetic_gap_low: Option<f64>,
    pub synthetic_gap_high: Option<f64>,
    pub synthetic_unsafe_fraction: Option<f64>,
    pub synthetic_escalate_mass: Option<f64>,
    pub synthetic_escalate_best_fraction: Option<f64>,
    pub synthetic_seed: Option<u64>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub agent_url: Option<String>,
    pub parallelism: Option<usize>,
    pub early_escalate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Jsonl {
        path: PathBuf,
        stratify_k: Option<usize>,
        dataset_seed: u64,
        /// Per-(input, node) distributions for the simulated agent.
        profiles: Option<PathBuf>,
    },
    Synthetic(SyntheticDatasetSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AgentMode {
    Simulated,
    Replay { path: PathBuf },
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub conditions: Vec<ConditionSpec>,
    pub seed: u64,
    pub parallelism: usize,
    pub out: PathBuf,
    pub agent: AgentMode,
    pub delta: f64,
    pub z: f64,
    pub options: RouterOptions,
    pub sw_group: Option<String>,
    pub dag: DagSpec,
}

impl ExperimentConfig {
    /// Default ten-condition sweep on a 161-input synthetic dataset.
    pub fn synthetic_default(seed: u64, out: impl Into<PathBuf>) -> Self {
        ExperimentConfig {
            source: DatasetSource::Synthetic(SyntheticDatasetSpec {
                seed,
                ..Default::default()
            }),
            conditions: ConditionSpec::default_sweep(DEFAULT_DELTA),
            seed,
            parallelism: default_parallelism(),
            out: out.into(),
            agent: AgentMode::Simulated,
            delta: DEFAULT_DELTA,
            z: DEFAULT_Z,
            options: RouterOptions::default(),
            sw_group: None,
            dag: DagSpec::default(),
        }
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base, overrides)
    }

    pub fn from_toml(text: &str, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_file(file, base_dir, overrides)
    }

    pub fn from_file(file: ConfigFile, base_dir: &Path, overrides: &Overrides) -> Result<Self> {
        let resolve = |p: PathBuf| if p.is_absolute() { p } else { base_dir.join(p) };
        let seed = overrides
            .seed
            .or(file.seed)
            .ok_or_else(|| Error::Config("a seed is required (config `seed` or --seed)".into()))?;
        let delta = file.delta.unwrap_or(DEFAULT_DELTA);
        check_delta(delta).map_err(|e| Error::Config(e.to_string()))?;
        let z = file.z.unwrap_or(DEFAULT_Z);
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Config(format!("z must be positive, got {z}")));
        }

        let conditions = match file.conditions {
            None => ConditionSpec::default_sweep(delta),
            Some(names) => names.iter().map(|n| parse_condition(n, delta)).collect::<Result<_>>()?,
        };
        if conditions.is_empty() {
            return Err(Error::Config("at least one condition is required".into()));
        }

        let parallelism = overrides
            .parallelism
            .or(file.parallelism)
            .unwrap_or_else(default_parallelism);
        if parallelism == 0 {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }

        let agent = match file.agent.as_deref().unwrap_or("simulated") {
            "simulated" => AgentMode::Simulated,
            "replay" => AgentMode::Replay {
                path: resolve(
                    file.replay
                        .ok_or_else(|| Error::Config("replay agent needs `replay`".into()))?,
                ),
            },
            "remote" => {
                let url = overrides
                    .agent_url
                    .clone()
                    .or(file.agent_url)
                    .or_else(|| std::env::var(AGENT_URL_ENV).ok())
                    .ok_or_else(|| {
                        Error::Config(format!(
                            "remote agent needs `agent_url`, --agent-url or {AGENT_URL_ENV}"
                        ))
                    })?;
                AgentMode::Remote { url }
            }
            other => return Err(Error::Config(format!("unknown agent mode {other:?}"))),
        };

        let source = match file.dataset {
            Some(path) => DatasetSource::Jsonl {
                path: resolve(path),
                stratify_k: file.stratify_k,
                dataset_seed: file.dataset_seed.unwrap_or(seed),
                profiles: file.profiles.map(resolve),
            },
            None => {
                let defaults = SyntheticDatasetSpec::default();
                let gap = match (file.synthetic_gap, file.synthetic_gap_low, file.synthetic_gap_high) {
                    (Some(gap), None, None) => GapDistribution::Fixed { gap },
                    (None, Some(low), Some(high)) => GapDistribution::Uniform { low, high },
                    (None, None, None) => defaults.gap,
                    _ => {
                        return Err(Error::Config(
                            "give either synthetic_gap or both synthetic_gap_low and synthetic_gap_high".into(),
                        ))
                    }
                };
                DatasetSource::Synthetic(SyntheticDatasetSpec {
                    inputs: file.synthetic_inputs.unwrap_or(defaults.inputs),
                    unsafe_fraction: file.synthetic_unsafe_fraction.unwrap_or(defaults.unsafe_fraction),
                    gap,
                    escalate_mass: file.synthetic_escalate_mass.unwrap_or(defaults.escalate_mass),
                    escalate_best_fraction: file
                        .synthetic_escalate_best_fraction
                        .unwrap_or(defaults.escalate_best_fraction),
                    nodes: defaults.nodes,
                    seed: file.synthetic_seed.unwrap_or(seed),
                })
            }
        };
        if matches!(agent, AgentMode::Simulated) {
            if let DatasetSource::Jsonl { profiles: None, .. } = source {
                return Err(Error::Config(
                    "simulated agent with a file dataset needs `profiles`".into(),
                ));
            }
        }

        Ok(ExperimentConfig {
            source,
            conditions,
            seed,
            parallelism,
            out: overrides
                .out
                .clone()
                .or(file.out.map(resolve))
                .unwrap_or_else(|| PathBuf::from("escalade-out")),
            agent,
            delta,
            z,
            options: RouterOptions {
                early_escalate: overrides.early_escalate || file.early_escalate.unwrap_or(false),
            },
            sw_group: file.sw_group,
            dag: DagSpec::default(),
        })
    }
}

/// `as:B` inherits `delta`; everything else parses as written.
fn parse_condition(name: &str, delta: f64) -> Result<ConditionSpec> {
    let spec: ConditionSpec = name.parse()?;
    let explicit_delta = name.trim().split([':', '-']).count() > 2;
    Ok(match spec {
        ConditionSpec::AdaptiveSampling { budget, .. } if !explicit_delta => {
            ConditionSpec::AdaptiveSampling { budget, delta }
        }
        other => other,
    })
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml(text, Path::new("/cfg"), &Overrides::default())
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse("seed = 3").unwrap();
        assert_eq!(cfg.conditions.len(), 10);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.agent, AgentMode::Simulated);
        assert!(matches!(cfg.source, DatasetSource::Synthetic(ref s) if s.inputs == 161 && s.seed == 3));
    }

    #[test]
    fn seed_is_required() {
        assert!(parse("parallelism = 2").unwrap_err().is_config_error());
        let cfg = ExperimentConfig::from_toml(
            "",
            Path::new("."),
            &Overrides {
                seed: Some(9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn conditions_inherit_delta() {
        let cfg = parse("seed = 1\ndelta = 0.1\nconditions = [\"as:100\", \"as:100:0.01\", \"mv:3\"]").unwrap();
        assert_eq!(
            cfg.conditions,
            vec![
                ConditionSpec::AdaptiveSampling {
                    budget: 100,
                    delta: 0.1
                },
                ConditionSpec::AdaptiveSampling {
                    budget: 100,
                    delta: 0.01
                },
                ConditionSpec::MajorityVote { n: 3 },
            ]
        );
    }

    #[test]
    fn relative_paths_resolve_against_config_dir() {
        let cfg = parse("seed = 1\ndataset = \"d.jsonl\"\nprofiles = \"/abs/p.jsonl\"\nout = \"o\"").unwrap();
        assert_eq!(cfg.out, PathBuf::from("/cfg/o"));
        match cfg.source {
            DatasetSource::Jsonl { path, profiles, .. } => {
                assert_eq!(path, PathBuf::from("/cfg/d.jsonl"));
                assert_eq!(profiles, Some(PathBuf::from("/abs/p.jsonl")));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn config_errors() {
        for text in [
            "seed = 1\nconditions = []",
            "seed = 1\nconditions = [\"as:2\"]",
            "seed = 1\nconditions = [\"bogus\"]",
            "seed = 1\nunknown_key = 4",
            "seed = 1\nagent = \"replay\"",
            "seed = 1\nagent = \"carrier-pigeon\"",
            "seed = 1\ndataset = \"d.jsonl\"",
            "seed = 1\ndelta = 1.5",
            "seed = 1\nparallelism = 0",
            "seed = 1\nsynthetic_gap = 0.5\nsynthetic_gap_low = 0.2",
            "seed = ",
        ] {
            let err = parse(text).unwrap_err();
            assert!(err.is_config_error(), "{text}: {err}");
        }
    }

    #[test]
    fn overrides_win() {
        let cfg = ExperimentConfig::from_toml(
            "seed = 1\nparallelism = 8\nagent = \"remote\"\nagent_url = \"http://a\"",
            Path::new("."),
            &Overrides {
                seed: Some(2),
                parallelism: Some(1),
                agent_url: Some("http://b".into()),
                early_escalate: true,
                out: Some("x".into()),
            },
        )
        .unwrap();
        assert_eq!(cfg.seed, 2);
        assert_eq!(cfg.parallelism, 1);
        assert_eq!(cfg.agent, AgentMode::Remote { url: "http://b".into() });
        assert!(cfg.options.early_escalate);
        assert_eq!(cfg.out, PathBuf::from("x"));
    }
}
