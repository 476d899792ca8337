//! Subcommand implementations. Each takes fully resolved options (flags
//! merged over the optional config file), reads its inputs, runs the core
//! operations and writes the output files. Diagnostics go to stderr; data
//! goes to files only.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use flowcast_core::cleaning::{detect_outliers, impute, CleaningConfig, OutlierMask};
use flowcast_core::eval::EvaluationPlan;
use flowcast_core::flowdata::{
    compute_daily_profile, Day, FlowSeries, FlowStore, ProfileSet, TimeGrid,
};
use flowcast_core::graph::{build_graph, MotorwayGraph, StationId};
use flowcast_core::predictors::{
    feasible_targets, plan_route, predict_bktr_planned, predict_dpp, predict_intr_planned, Method,
    PredictError,
};
use flowcast_core::simulator::{inject_anomalies, simulate};
use flowcast_core::Timestamp;

use crate::formats;
use crate::scenario::{build_scenario, load_scenario_file};

pub struct GraphInputs {
    pub stations: PathBuf,
    pub edges: PathBuf,
    pub speed_mps: f64,
    pub grid: TimeGrid,
}

impl GraphInputs {
    pub fn load(&self) -> Result<MotorwayGraph> {
        let topo = formats::read_topology(&self.stations, &self.edges)?;
        let graph = build_graph(&topo, self.speed_mps, self.grid.interval_secs())?;
        Ok(graph)
    }
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn load_flows(path: &Path, grid: TimeGrid) -> Result<FlowStore> {
    let store = formats::read_flows(path, grid)?;
    Ok(store)
}

/// Profiles for every station present in the store, from the training days.
fn build_profiles(store: &FlowStore, train_days: &[Day]) -> Result<ProfileSet> {
    let stations: Vec<StationId> = store.stations().cloned().collect();
    let mut profiles = ProfileSet::new();
    for station in stations {
        let profile = compute_daily_profile(store, &station, train_days)
            .with_context(|| format!("training profile for {station}"))?;
        profiles.insert(station, profile);
    }
    Ok(profiles)
}

fn check_stations_known(store: &FlowStore, graph: &MotorwayGraph) -> Result<()> {
    for station in store.stations() {
        if graph.kind(station).is_none() {
            bail!("flow data references {station}, which is not in the graph");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub struct SimulateOpts {
    pub graph: GraphInputs,
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub days: Option<u32>,
}

pub fn cmd_simulate(opts: &SimulateOpts) -> Result<()> {
    let graph = opts.graph.load()?;
    let file = load_scenario_file(&opts.scenario)?;
    let (scenario, anomalies) = build_scenario(&file, &graph, opts.seed, opts.days)?;
    let (store, truth) = simulate(&graph, &scenario)?;
    ensure_out_dir(&opts.out)?;

    if anomalies.items.is_empty() {
        formats::write_flows(&store, &opts.out.join("flows.csv"))?;
    } else {
        let (corrupted, masks) = inject_anomalies(&store, &anomalies)?;
        formats::write_flows(&corrupted, &opts.out.join("flows.csv"))?;
        let truth_dir = opts.out.join("ground_truth");
        ensure_out_dir(&truth_dir)?;
        formats::write_flows(&store, &truth_dir.join("clean_flows.csv"))?;
        formats::write_masks(&masks, &truth_dir.join("anomaly_mask.csv"))?;
    }
    eprintln!(
        "simulated {} day(s), {} vehicles, seed {}",
        scenario.days,
        truth.vehicles.len(),
        scenario.seed
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// clean
// ---------------------------------------------------------------------------

pub struct CleanOpts {
    pub graph: GraphInputs,
    pub flows: PathBuf,
    pub train_days: Vec<Day>,
    pub stations: Vec<StationId>,
    pub config: CleaningConfig,
    pub out: PathBuf,
}

pub fn cmd_clean(opts: &CleanOpts) -> Result<()> {
    opts.config.validate()?;
    let graph = opts.graph.load()?;
    let store = load_flows(&opts.flows, opts.graph.grid)?;
    check_stations_known(&store, &graph)?;
    let profiles = build_profiles(&store, &opts.train_days)?;

    let restrict: Option<BTreeSet<&StationId>> = if opts.stations.is_empty() {
        None
    } else {
        Some(opts.stations.iter().collect())
    };

    let grid = *store.grid();
    let mut cleaned = FlowStore::new(grid);
    let mut masks: Vec<OutlierMask> = Vec::new();
    let mut flagged = 0usize;
    for (station, day, counts) in store.iter() {
        let skip = restrict.as_ref().is_some_and(|set| !set.contains(station));
        let series = FlowSeries::new(station.clone(), day, counts.to_vec(), &grid)?;
        if skip {
            cleaned.insert_series(series)?;
            continue;
        }
        let profile = &profiles[station];
        let mask = detect_outliers(&series, profile, &opts.config)?;
        let repaired = impute(&series, &mask, profile, &opts.config)?;
        flagged += mask.flagged().count();
        cleaned.insert_series(repaired)?;
        masks.push(mask);
    }

    ensure_out_dir(&opts.out)?;
    formats::write_flows(&cleaned, &opts.out.join("cleaned_flows.csv"))?;
    formats::write_masks(&masks, &opts.out.join("mask.csv"))?;
    eprintln!(
        "cleaned {} series, {flagged} interval(s) imputed",
        masks.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

pub struct ProfileOpts {
    pub flows: PathBuf,
    pub grid: TimeGrid,
    pub train_days: Vec<Day>,
    pub stations: Vec<StationId>,
    pub out: PathBuf,
}

pub fn cmd_profile(opts: &ProfileOpts) -> Result<()> {
    let store = load_flows(&opts.flows, opts.grid)?;
    let mut profiles = build_profiles(&store, &opts.train_days)?;
    if !opts.stations.is_empty() {
        let keep: BTreeSet<&StationId> = opts.stations.iter().collect();
        profiles.retain(|station, _| keep.contains(station));
        if profiles.is_empty() {
            bail!("none of the requested stations appear in the flow data");
        }
    }
    if let Some(parent) = opts.out.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_out_dir(parent)?;
        }
    }
    formats::write_profiles(&profiles, &opts.out)?;
    eprintln!("wrote {} profile(s)", profiles.len());
    Ok(())
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

pub struct PredictOpts {
    pub graph: GraphInputs,
    pub flows: PathBuf,
    pub train_days: Vec<Day>,
    pub test_days: Vec<Day>,
    pub method: Method,
    pub r: u32,
    pub p: u32,
    pub stations: Vec<StationId>,
    pub out: PathBuf,
}

pub fn cmd_predict(opts: &PredictOpts) -> Result<()> {
    let graph = opts.graph.load()?;
    let store = load_flows(&opts.flows, opts.graph.grid)?;
    check_stations_known(&store, &graph)?;
    let profiles = build_profiles(&store, &opts.train_days)?;
    let grid = store.grid();

    let feasible = feasible_targets(&graph, opts.r, opts.p);
    let requested: Vec<StationId> = if opts.stations.is_empty() {
        feasible.iter().cloned().collect()
    } else {
        opts.stations.clone()
    };
    let mut infeasible: Vec<(StationId, String)> = Vec::new();
    let mut targets: Vec<StationId> = Vec::new();
    for station in requested {
        if !graph.is_mainline(&station) {
            infeasible.push((station, "not a mainline station".to_owned()));
        } else if !feasible.contains(&station) {
            infeasible.push((
                station,
                "no upstream origin within range at this horizon".to_owned(),
            ));
        } else {
            targets.push(station);
        }
    }

    ensure_out_dir(&opts.out)?;
    if !infeasible.is_empty() {
        let lines: String = infeasible
            .iter()
            .map(|(s, why)| format!("{s},{why}\n"))
            .collect();
        fs::write(
            opts.out.join("infeasible.csv"),
            format!("station_id,reason\n{lines}"),
        )?;
    }
    if targets.is_empty() {
        bail!("no feasible target stations at r={}, p={}", opts.r, opts.p);
    }

    let mut rows: Vec<formats::ForecastRow> = Vec::new();
    let mut skipped = 0usize;
    for station in &targets {
        let plan = match opts.method {
            Method::Dpp => None,
            _ => Some(plan_route(&graph, station, opts.r, opts.p)?),
        };
        for &day in &opts.test_days {
            for interval in 0..grid.intervals_per_day() {
                let at = Timestamp::new(day, interval);
                let forecast = match (&opts.method, &plan) {
                    (Method::Dpp, _) => predict_dpp(&profiles, station, at, opts.p, grid),
                    (Method::Bktr, Some(plan)) => predict_bktr_planned(plan, &store, &profiles, at),
                    (Method::Intr, Some(plan)) => {
                        predict_intr_planned(plan, &graph, &store, &profiles, at)
                    }
                    _ => unreachable!(),
                };
                match forecast {
                    Ok(f) => rows.push(formats::ForecastRow {
                        station: station.clone(),
                        at: at.offset(i64::from(opts.p), grid),
                        method: opts.method,
                        r: opts.r,
                        p: opts.p,
                        value: f.value,
                    }),
                    Err(PredictError::MissingData { .. }) => skipped += 1,
                    Err(e) => return Err(e.into()),
                }
            }
        }
    }
    formats::write_forecasts(&rows, &opts.out.join("forecasts.csv"))?;
    eprintln!(
        "wrote {} forecast(s) for {} station(s), skipped {skipped} timestamp(s), {} infeasible",
        rows.len(),
        targets.len(),
        infeasible.len()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

pub struct EvaluateOpts {
    pub graph: GraphInputs,
    pub flows: PathBuf,
    pub train_days: Vec<Day>,
    pub test_days: Vec<Day>,
    pub methods: BTreeSet<Method>,
    pub r_values: Vec<u32>,
    pub p_values: Vec<u32>,
    pub stations: Vec<StationId>,
    pub jobs: usize,
    pub out: PathBuf,
}

pub fn cmd_evaluate(opts: &EvaluateOpts) -> Result<()> {
    let graph = opts.graph.load()?;
    let store = load_flows(&opts.flows, opts.graph.grid)?;
    check_stations_known(&store, &graph)?;
    let profiles = build_profiles(&store, &opts.train_days)?;

    let plan = EvaluationPlan {
        train_days: opts.train_days.clone(),
        test_days: opts.test_days.clone(),
        stations: if opts.stations.is_empty() {
            None
        } else {
            Some(opts.stations.iter().cloned().collect())
        },
        methods: opts.methods.clone(),
        r_values: opts.r_values.clone(),
        p_values: opts.p_values.clone(),
    };
    let report =
        crate::parallel::run_evaluation_parallel(&graph, &store, &profiles, &plan, opts.jobs)?;

    ensure_out_dir(&opts.out)?;
    formats::write_report(&report, &opts.out.join("report.json"))?;
    formats::write_boxplot(&report, &opts.out.join("boxplot.csv"))?;
    let cells: usize = report
        .cells
        .values()
        .flat_map(|m| m.values())
        .map(|c| c.len())
        .sum();
    eprintln!(
        "evaluated {} method(s) over {} horizon combination(s): {cells} station cell(s)",
        plan.methods.len(),
        plan.r_values.len() * plan.p_values.len()
    );
    Ok(())
}
