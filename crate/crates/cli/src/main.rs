//! `flowcast`: command-line entry point wiring simulation, cleaning,
//! profiling, prediction and evaluation into reproducible runs.
//!
//! Every flag can also be supplied through an optional TOML config file
//! (`--config`); explicit flags win. Environment variables are deliberately
//! not consulted, so a command line plus its input files pins a run exactly.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use flowcast_cli::dates::{parse_date_ranges, parse_horizons};
use flowcast_cli::run::{self, GraphInputs};
use flowcast_core::cleaning::CleaningConfig;
use flowcast_core::flowdata::TimeGrid;
use flowcast_core::graph::{StationId, DEFAULT_SPEED_MPS};
use flowcast_core::predictors::Method;
use serde::Deserialize;

#[derive(Parser)]
#[command(
    name = "flowcast",
    version,
    about = "Graph-based motorway traffic flow prediction toolkit"
)]
struct Cli {
    /// TOML file supplying defaults for any long flag (flags override it)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic flow dataset from a scenario file
    Simulate(SimulateArgs),
    /// Detect and impute flow outliers against daily profiles
    Clean(CleanArgs),
    /// Compute per-station day-of-week mean flow profiles
    Profile(ProfileArgs),
    /// Emit forecasts for one method at a fixed horizon
    Predict(PredictArgs),
    /// Score methods over a train/test split and horizon sweep
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Stations CSV with header id,kind
    #[arg(long, value_name = "FILE")]
    graph_stations: Option<PathBuf>,
    /// Edges CSV with header from,to,length_m
    #[arg(long, value_name = "FILE")]
    graph_edges: Option<PathBuf>,
    /// Reference speed in metres per second
    #[arg(long, value_name = "M_PER_S")]
    speed_mps: Option<f64>,
}

#[derive(Args)]
struct GridArgs {
    /// Reporting interval length in seconds
    #[arg(long, value_name = "SECS")]
    interval_secs: Option<u32>,
    /// Reporting intervals per day
    #[arg(long, value_name = "N")]
    intervals_per_day: Option<u32>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Scenario TOML file
    #[arg(long, value_name = "FILE")]
    scenario: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override the scenario's random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's day count
    #[arg(long)]
    days: Option<u32>,
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Flow CSV to clean
    #[arg(long, value_name = "FILE")]
    flows: Option<PathBuf>,
    /// Training date ranges for the profiles, e.g. 2017-02-01..2017-04-30
    #[arg(long, value_name = "RANGES")]
    train: Option<String>,
    /// Dates to drop from the training range (public holidays and the like)
    #[arg(long, value_name = "RANGES")]
    exclude: Option<String>,
    /// Moving-average window, in intervals
    #[arg(long, value_name = "N")]
    window_w: Option<usize>,
    /// Outlier threshold multiplier (must be positive)
    #[arg(long, value_name = "K")]
    threshold_k: Option<f64>,
    /// Weight of recent clean neighbours when imputing, in [0, 1]
    #[arg(long, value_name = "A")]
    alpha: Option<f64>,
    /// Restrict cleaning to these stations (repeatable)
    #[arg(long, value_name = "ID")]
    station: Vec<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    #[command(flatten)]
    grid: GridArgs,
    /// Flow CSV to profile
    #[arg(long, value_name = "FILE")]
    flows: Option<PathBuf>,
    /// Training date ranges
    #[arg(long, value_name = "RANGES")]
    train: Option<String>,
    /// Dates to drop from the training range (public holidays and the like)
    #[arg(long, value_name = "RANGES")]
    exclude: Option<String>,
    /// Restrict to these stations (repeatable)
    #[arg(long, value_name = "ID")]
    station: Vec<String>,
    /// Output CSV path
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Flow CSV with the observations
    #[arg(long, value_name = "FILE")]
    flows: Option<PathBuf>,
    /// Training date ranges for the profiles
    #[arg(long, value_name = "RANGES")]
    train: Option<String>,
    /// Dates to drop from the training range (public holidays and the like)
    #[arg(long, value_name = "RANGES")]
    exclude: Option<String>,
    /// Dates to predict over (prediction times)
    #[arg(long, value_name = "RANGES")]
    test: Option<String>,
    /// Forecasting method: dpp, bktr or intr
    #[arg(long, value_name = "METHOD")]
    method: Option<String>,
    /// Past horizon in intervals (1..=5)
    #[arg(long, value_name = "N")]
    r: Option<String>,
    /// Future horizon in intervals (1..=5)
    #[arg(long, value_name = "N")]
    p: Option<String>,
    /// Target stations (repeatable; default: all feasible)
    #[arg(long, value_name = "ID")]
    station: Vec<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Flow CSV with the observations
    #[arg(long, value_name = "FILE")]
    flows: Option<PathBuf>,
    /// Training date ranges for the profiles
    #[arg(long, value_name = "RANGES")]
    train: Option<String>,
    /// Dates to drop from the training range (public holidays and the like)
    #[arg(long, value_name = "RANGES")]
    exclude: Option<String>,
    /// Test date ranges (must not overlap training)
    #[arg(long, value_name = "RANGES")]
    test: Option<String>,
    /// Methods to score (repeatable or comma-separated; default all)
    #[arg(long, value_name = "METHOD")]
    method: Vec<String>,
    /// Past horizons, a value or inclusive range like 1..5
    #[arg(long, value_name = "N|A..B")]
    r: Option<String>,
    /// Future horizons, a value or inclusive range like 1..5
    #[arg(long, value_name = "N|A..B")]
    p: Option<String>,
    /// Restrict to these target stations (repeatable)
    #[arg(long, value_name = "ID")]
    station: Vec<String>,
    /// Worker threads (output is identical for any value)
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

/// Config-file counterpart of the flags; kebab-case keys match the flag
/// spellings.
#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConfigFile {
    graph_stations: Option<PathBuf>,
    graph_edges: Option<PathBuf>,
    speed_mps: Option<f64>,
    interval_secs: Option<u32>,
    intervals_per_day: Option<u32>,
    flows: Option<PathBuf>,
    scenario: Option<PathBuf>,
    out: Option<PathBuf>,
    train: Option<String>,
    exclude: Option<String>,
    test: Option<String>,
    method: Option<String>,
    r: Option<String>,
    p: Option<String>,
    station: Option<Vec<String>>,
    window_w: Option<usize>,
    threshold_k: Option<f64>,
    alpha: Option<f64>,
    seed: Option<u64>,
    days: Option<u32>,
    jobs: Option<usize>,
}

fn load_config(path: Option<&PathBuf>) -> Result<ConfigFile> {
    match path {
        None => Ok(ConfigFile::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
        }
    }
}

fn resolve_grid(args: &GridArgs, cfg: &ConfigFile) -> Result<TimeGrid> {
    let secs = args.interval_secs.or(cfg.interval_secs).unwrap_or(180);
    let ipd = args
        .intervals_per_day
        .or(cfg.intervals_per_day)
        .unwrap_or(480);
    Ok(TimeGrid::new(secs, ipd)?)
}

fn resolve_graph(args: &GraphArgs, grid: TimeGrid, cfg: &ConfigFile) -> Result<GraphInputs> {
    Ok(GraphInputs {
        stations: args
            .graph_stations
            .clone()
            .or_else(|| cfg.graph_stations.clone())
            .context("--graph-stations is required")?,
        edges: args
            .graph_edges
            .clone()
            .or_else(|| cfg.graph_edges.clone())
            .context("--graph-edges is required")?,
        speed_mps: args
            .speed_mps
            .or(cfg.speed_mps)
            .unwrap_or(DEFAULT_SPEED_MPS),
        grid,
    })
}

fn resolve_days(
    flag: &Option<String>,
    cfg: Option<&String>,
    name: &str,
) -> Result<Vec<flowcast_core::Day>> {
    let text = flag
        .as_deref()
        .or(cfg.map(String::as_str))
        .with_context(|| format!("--{name} is required"))?;
    parse_date_ranges(text).with_context(|| format!("--{name}"))
}

/// Training days with any excluded dates (public holidays) removed.
fn resolve_train_days(
    train: &Option<String>,
    exclude: &Option<String>,
    cfg: &ConfigFile,
) -> Result<Vec<flowcast_core::Day>> {
    let mut days = resolve_days(train, cfg.train.as_ref(), "train")?;
    let text = exclude.as_deref().or(cfg.exclude.as_deref());
    if let Some(text) = text {
        let dropped: std::collections::BTreeSet<flowcast_core::Day> = parse_date_ranges(text)
            .context("--exclude")?
            .into_iter()
            .collect();
        days.retain(|d| !dropped.contains(d));
    }
    Ok(days)
}

fn resolve_stations(flags: &[String], cfg: Option<&Vec<String>>) -> Result<Vec<StationId>> {
    let source: Vec<String> = if flags.is_empty() {
        cfg.cloned().unwrap_or_default()
    } else {
        flags.to_vec()
    };
    source.into_iter().map(|s| Ok(StationId::new(s)?)).collect()
}

fn parse_method(name: &str) -> Result<Method> {
    Method::from_name(name)
        .with_context(|| format!("unknown method {name:?}, expected dpp, bktr or intr"))
}

fn resolve_methods(flags: &[String], cfg: Option<&String>) -> Result<BTreeSet<Method>> {
    let mut names: Vec<String> = Vec::new();
    if flags.is_empty() {
        if let Some(joined) = cfg {
            names.extend(joined.split(',').map(|s| s.trim().to_owned()));
        }
    } else {
        for flag in flags {
            names.extend(flag.split(',').map(|s| s.trim().to_owned()));
        }
    }
    if names.is_empty() {
        return Ok(Method::ALL.into_iter().collect());
    }
    names.iter().map(|n| parse_method(n)).collect()
}

fn resolve_horizon(flag: &Option<String>, cfg: Option<&String>, name: &str) -> Result<Vec<u32>> {
    let text = flag
        .as_deref()
        .or(cfg.map(String::as_str))
        .unwrap_or("1..5");
    parse_horizons(text).with_context(|| format!("--{name}"))
}

fn resolve_single_horizon(flag: &Option<String>, cfg: Option<&String>, name: &str) -> Result<u32> {
    let values = resolve_horizon(flag, cfg, name)?;
    if values.len() != 1 {
        bail!("--{name} takes a single value for this command");
    }
    Ok(values[0])
}

fn resolve_out(flag: &Option<PathBuf>, cfg: &ConfigFile) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| cfg.out.clone())
        .context("--out is required")
}

fn dispatch(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_ref())?;
    match cli.command {
        Command::Simulate(args) => {
            let grid = resolve_grid(&args.grid, &cfg)?;
            run::cmd_simulate(&run::SimulateOpts {
                graph: resolve_graph(&args.graph, grid, &cfg)?,
                scenario: args
                    .scenario
                    .or_else(|| cfg.scenario.clone())
                    .context("--scenario is required")?,
                out: resolve_out(&args.out, &cfg)?,
                seed: args.seed.or(cfg.seed),
                days: args.days.or(cfg.days),
            })
        }
        Command::Clean(args) => {
            let grid = resolve_grid(&args.grid, &cfg)?;
            let config = CleaningConfig {
                window_w: args.window_w.or(cfg.window_w).unwrap_or(20),
                threshold_k: args.threshold_k.or(cfg.threshold_k).unwrap_or(4.0),
                recent_weight: args.alpha.or(cfg.alpha).unwrap_or(0.5),
            };
            run::cmd_clean(&run::CleanOpts {
                graph: resolve_graph(&args.graph, grid, &cfg)?,
                flows: args
                    .flows
                    .or_else(|| cfg.flows.clone())
                    .context("--flows is required")?,
                train_days: resolve_train_days(&args.train, &args.exclude, &cfg)?,
                stations: resolve_stations(&args.station, cfg.station.as_ref())?,
                config,
                out: resolve_out(&args.out, &cfg)?,
            })
        }
        Command::Profile(args) => {
            let grid = resolve_grid(&args.grid, &cfg)?;
            run::cmd_profile(&run::ProfileOpts {
                flows: args
                    .flows
                    .or_else(|| cfg.flows.clone())
                    .context("--flows is required")?,
                grid,
                train_days: resolve_train_days(&args.train, &args.exclude, &cfg)?,
                stations: resolve_stations(&args.station, cfg.station.as_ref())?,
                out: resolve_out(&args.out, &cfg)?,
            })
        }
        Command::Predict(args) => {
            let grid = resolve_grid(&args.grid, &cfg)?;
            let method = parse_method(
                args.method
                    .as_deref()
                    .or(cfg.method.as_deref())
                    .context("--method is required")?,
            )?;
            run::cmd_predict(&run::PredictOpts {
                graph: resolve_graph(&args.graph, grid, &cfg)?,
                flows: args
                    .flows
                    .or_else(|| cfg.flows.clone())
                    .context("--flows is required")?,
                train_days: resolve_train_days(&args.train, &args.exclude, &cfg)?,
                test_days: resolve_days(&args.test, cfg.test.as_ref(), "test")?,
                method,
                r: resolve_single_horizon(&args.r, cfg.r.as_ref(), "r")?,
                p: resolve_single_horizon(&args.p, cfg.p.as_ref(), "p")?,
                stations: resolve_stations(&args.station, cfg.station.as_ref())?,
                out: resolve_out(&args.out, &cfg)?,
            })
        }
        Command::Evaluate(args) => {
            let grid = resolve_grid(&args.grid, &cfg)?;
            let jobs = args
                .jobs
                .or(cfg.jobs)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            if jobs == 0 {
                bail!("--jobs must be at least 1");
            }
            run::cmd_evaluate(&run::EvaluateOpts {
                graph: resolve_graph(&args.graph, grid, &cfg)?,
                flows: args
                    .flows
                    .or_else(|| cfg.flows.clone())
                    .context("--flows is required")?,
                train_days: resolve_train_days(&args.train, &args.exclude, &cfg)?,
                test_days: resolve_days(&args.test, cfg.test.as_ref(), "test")?,
                methods: resolve_methods(&args.method, cfg.method.as_ref())?,
                r_values: resolve_horizon(&args.r, cfg.r.as_ref(), "r")?,
                p_values: resolve_horizon(&args.p, cfg.p.as_ref(), "p")?,
                stations: resolve_stations(&args.station, cfg.station.as_ref())?,
                jobs,
                out: resolve_out(&args.out, &cfg)?,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
