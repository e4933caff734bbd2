//! Experiment orchestration: configuration, dataset loading, condition
//! sweeps and report files.

mod config;
mod experiment;

pub use crate::dataset::{load_dataset, LoadedDataset};
pub use config::{AgentMode, ConfigFile, DatasetSource, ExperimentConfig, Overrides};
pub use experiment::{
    dataset_for, metrics_from_trace_file, pull_ceiling, pulls_within_bounds, run_experiment, ConditionReport,
    DatasetSummary, ExperimentReport, FailureRecord, ReportBundle, SweepPoint, SweepSummary,
};
