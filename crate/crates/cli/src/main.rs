//! `escalade` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime failure (any
//! outputs already written are kept).

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use escalade::agents::{generate_synthetic_dataset, GapDistribution, SyntheticDatasetSpec, AGENT_URL_ENV};
use escalade::bounds::{BoundConfig, BoundsReport};
use escalade::dataset::load_dataset;
use escalade::harness::{dataset_for, metrics_from_trace_file, run_experiment, ExperimentConfig, Overrides};
use escalade::metrics::render_table;
use escalade::regret::{
    default_regret_scenario, delta_for_horizon, simulate_deployment, DeploymentConfig, LearningMode, OracleKind,
};
use escalade::{ConditionSpec, DagSpec, Error, Result, RouterOptions, DEFAULT_Z};

#[derive(Parser)]
#[command(
    name = "escalade",
    version,
    about = "Confidence-gated escalation for chains of labeling agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a condition sweep and write traces and reports.
    Run(RunArgs),
    /// Evaluate the concentration and regret bound calculators.
    Bounds(BoundsArgs),
    /// Simulate deployment and write a cumulative regret curve.
    Regret(RegretArgs),
    /// Recompute metrics from a trace file.
    Metrics(MetricsArgs),
    /// Generate a synthetic dataset and its agent profiles.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (flat TOML). Without one, runs the default sweep on
    /// a synthetic dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = AGENT_URL_ENV)]
    agent_url: Option<String>,
    #[arg(long)]
    parallelism: Option<usize>,
    /// Send an input to human review as soon as one node exhausts its budget.
    #[arg(long)]
    early_escalate: bool,
    /// Print the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, default_value_t = 3)]
    arms: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    gap: f64,
    #[arg(long, default_value_t = 0.4)]
    gap_min: f64,
    /// Decision steps per episode.
    #[arg(long, default_value_t = 3)]
    horizon: u64,
    #[arg(long, default_value_t = 1.0)]
    r_max: f64,
    #[arg(long, default_value_t = 3)]
    nodes: u64,
    /// Samples per node (majority vote; also the DKW sample size).
    #[arg(long, default_value_t = 5)]
    samples: u64,
    #[arg(long, default_value_t = 100)]
    episodes: u64,
    #[arg(long, default_value_t = 1.0)]
    constant: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    PerEpisode,
    CrossEpisode,
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleArg {
    Argmax,
    GroundTruth,
}

#[derive(Args)]
struct RegretArgs {
    #[arg(long, default_value_t = 1000)]
    episodes: u64,
    /// `single`, `mv:N` or `as:B`; adaptive conditions use delta = 1/T
    /// unless given as `as:B:DELTA`.
    #[arg(long, default_value = "as:100")]
    condition: String,
    #[arg(long, value_enum, default_value_t = ModeArg::CrossEpisode)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = OracleArg::Argmax)]
    oracle: OracleArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed for the input classes and their profiles.
    #[arg(long, default_value_t = 2024)]
    scenario_seed: u64,
    /// CSV destination for the per-episode curve.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    early_escalate: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct MetricsArgs {
    /// Trace file written by `run`.
    #[arg(long)]
    traces: PathBuf,
    /// Dataset with reference labels.
    #[arg(long, conflicts_with = "config")]
    dataset: Option<PathBuf>,
    /// Take the dataset from an experiment config instead.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Group whose FNR is reported separately.
    #[arg(long)]
    sw_group: Option<String>,
    #[arg(long, default_value_t = DEFAULT_Z)]
    z: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 161)]
    inputs: usize,
    #[arg(long, conflicts_with_all = ["gap_low", "gap_high"])]
    gap: Option<f64>,
    #[arg(long, requires = "gap_high")]
    gap_low: Option<f64>,
    #[arg(long, requires = "gap_low")]
    gap_high: Option<f64>,
    #[arg(long, default_value_t = 0.4)]
    unsafe_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    escalate_mass: f64,
    #[arg(long, default_value_t = 0.0)]
    escalate_best_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `data.jsonl` and `profiles.jsonl`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: bool,
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let overrides = Overrides {
        seed: args.seed,
        out: args.out,
        agent_url: args.agent_url,
        parallelism: args.parallelism,
        early_escalate: args.early_escalate,
    };
    let cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path, &overrides)?,
        None => ExperimentConfig::from_toml("", Path::new("."), &overrides)?,
    };
    let bundle = run_experiment(&cfg)?;
    if args.json {
        print_json(&bundle.report)?;
    } else {
        print!("{}", bundle.report.render_text());
        println!("\nwrote {}", bundle.out_dir.display());
    }
    Ok(match bundle.report.has_failures() {
        true => {
            eprintln!("some inputs failed; see {}", bundle.out_dir.join("failures").display());
            ExitCode::from(2)
        }
        false => ExitCode::SUCCESS,
    })
}

fn bounds(args: BoundsArgs) -> Result<ExitCode> {
    let report = BoundsReport::evaluate(&BoundConfig {
        arms: args.arms,
        delta: args.delta,
        epsilon: args.epsilon,
        gap: args.gap,
        gap_min: args.gap_min,
        horizon: args.horizon,
        r_max: args.r_max,
        nodes: args.nodes,
        samples: args.samples,
        episodes: args.episodes,
        constant: args.constant,
    })?;
    if args.json {
        print_json(&report)?;
    } else {
        print!("{}", report.render_table());
    }
    Ok(ExitCode::SUCCESS)
}

fn regret(args: RegretArgs) -> Result<ExitCode> {
    let explicit_delta = args.condition.split([':', '-']).count() > 2;
    let condition = match args.condition.parse::<ConditionSpec>()? {
        ConditionSpec::AdaptiveSampling { budget, .. } if !explicit_delta => ConditionSpec::AdaptiveSampling {
            budget,
            delta: delta_for_horizon(args.episodes),
        },
        other => other,
    };
    let scenario = generate_synthetic_dataset(&default_regret_scenario(args.scenario_seed))?;
    let cfg = DeploymentConfig {
        mode: match args.mode {
            ModeArg::PerEpisode => LearningMode::PerEpisode,
            ModeArg::CrossEpisode => LearningMode::CrossEpisode,
        },
        oracle: match args.oracle {
            OracleArg::Argmax => OracleKind::Argmax,
            OracleArg::GroundTruth => OracleKind::GroundTruth,
        },
        options: RouterOptions {
            early_escalate: args.early_escalate,
        },
        ..DeploymentConfig::new(args.episodes, condition, args.seed)
    };
    let curve = simulate_deployment(&cfg, &scenario, &DagSpec::default())?;
    if let Some(path) = &args.out {
        curve.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let summary = serde_json::json!({
        "condition": condition.name(),
        "episodes": args.episodes,
        "cumulative_regret": curve.final_regret(),
        "regret_per_episode": if args.episodes == 0 { 0.0 } else { curve.final_regret() / args.episodes as f64 },
        "total_pulls": curve.total_pulls,
    });
    if args.json {
        print_json(&summary)?;
    } else {
        println!(
            "{}: T={} cumulative regret {:.3} ({:.4} per episode), {} agent calls",
            condition,
            args.episodes,
            curve.final_regret(),
            summary["regret_per_episode"].as_f64().unwrap_or(0.0),
            curve.total_pulls
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn metrics(args: MetricsArgs) -> Result<ExitCode> {
    let dataset = match (&args.dataset, &args.config) {
        (Some(path), _) => load_dataset(path, None, 0)?.dataset,
        (None, Some(config)) => dataset_for(&ExperimentConfig::load(
            config,
            &Overrides {
                seed: args.seed,
                ..Default::default()
            },
        )?)?,
        (None, None) => return Err(Error::Config("give --dataset or --config".into())),
    };
    let report = metrics_from_trace_file(&args.traces, &dataset, args.sw_group.as_deref(), args.z)?;
    if args.json {
        print_json(&report)?;
    } else {
        let name = args
            .traces
            .file_stem()
            .map_or_else(|| "traces".to_string(), |s| s.to_string_lossy().into_owned());
        print!("{}", render_table(&[(name, &report)]));
    }
    Ok(ExitCode::SUCCESS)
}

fn gen(args: GenArgs) -> Result<ExitCode> {
    let gap = match (args.gap, args.gap_low, args.gap_high) {
        (_, Some(low), Some(high)) => GapDistribution::Uniform { low, high },
        (Some(gap), _, _) => GapDistribution::Fixed { gap },
        _ => SyntheticDatasetSpec::default().gap,
    };
    let spec = SyntheticDatasetSpec {
        inputs: args.inputs,
        unsafe_fraction: args.unsafe_fraction,
        gap,
        escalate_mass: args.escalate_mass,
        escalate_best_fraction: args.escalate_best_fraction,
        seed: args.seed,
        ..Default::default()
    };
    let data = generate_synthetic_dataset(&spec)?;
    fs::create_dir_all(&args.out)?;
    data.dataset
        .write_jsonl(BufWriter::new(File::create(args.out.join("data.jsonl"))?))?;
    data.profiles
        .write_jsonl(BufWriter::new(File::create(args.out.join("profiles.jsonl"))?))?;
    if args.json {
        print_json(&serde_json::json!({ "spec": spec, "inputs": data.dataset.len(), "out": args.out }))?;
    } else {
        println!("wrote {} inputs to {}", data.dataset.len(), args.out.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return match err.use_stderr() {
                true => ExitCode::from(1),
                false => ExitCode::SUCCESS,
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bounds(args) => bounds(args),
        Command::Regret(args) => regret(args),
        Command::Metrics(args) => metrics(args),
        Command::Gen(args) => gen(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_config_error() { 1 } else { 2 })
        }
    }
}
