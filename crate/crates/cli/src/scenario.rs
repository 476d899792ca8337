//! Scenario configuration files: a TOML schema describing demand shapes,
//! exit probabilities, noise and injected anomalies, expanded into the core
//! scenario types against a concrete graph and grid.
//!
//! ```toml
//! days = 7
//! start-date = "2017-10-02"
//! seed = 42
//! mode = "deterministic"          # or "poisson"
//! noise-sigma = 0.0
//! daily-multiplier-sigma = 0.0
//!
//! [demand.head]                   # demand entering at the mainline head
//! weekday = { base = 10.0, peaks = [{ centre-hour = 8.5, height = 20.0, width-hours = 1.2 }] }
//! weekend = { base = 8.0 }
//!
//! [demand.entries]                # default for every entry station
//! weekday = { base = 2.0 }
//! weekend = { base = 2.0 }
//!
//! [demand.overrides."41E"]        # per-station override
//! weekday = { base = 5.0 }
//! weekend = { base = 3.0 }
//!
//! [exits]
//! default-prob = 0.15
//!
//! [exits.overrides]
//! "39X" = 0.3
//!
//! [[anomalies]]
//! station = "23A"
//! date = "2017-10-03"
//! from-interval = 240
//! to-interval = 260
//! kind = "dropout"                # or "spike"
//! magnitude = 1.0
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use flowcast_core::graph::{MotorwayGraph, StationId, StationKind};
use flowcast_core::simulator::{
    AnomalyItem, AnomalyKind, AnomalySpec, ArrivalMode, DemandPattern, Scenario,
};
use flowcast_core::synthetic::{peaked_curve, Peak};
use serde::Deserialize;

use crate::dates::parse_date;

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ScenarioFile {
    pub days: u32,
    pub start_date: String,
    #[serde(default)]
    pub seed: u64,
    pub mode: String,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub daily_multiplier_sigma: f64,
    #[serde(default)]
    pub arrival_spread: Option<ArrivalSpreadSpec>,
    #[serde(default)]
    pub demand: DemandSection,
    #[serde(default)]
    pub exits: ExitSection,
    #[serde(default)]
    pub anomalies: Vec<AnomalyEntry>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct DemandSection {
    pub head: Option<PatternSpec>,
    /// Default demand applied to every entry station without an override.
    pub entries: Option<PatternSpec>,
    #[serde(default)]
    pub overrides: BTreeMap<String, PatternSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PatternSpec {
    pub weekday: CurveSpec,
    pub weekend: CurveSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct CurveSpec {
    pub base: f64,
    #[serde(default)]
    pub peaks: Vec<PeakSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PeakSpec {
    pub centre_hour: f64,
    pub height: f64,
    pub width_hours: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExitSection {
    #[serde(default)]
    pub default_prob: f64,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

/// Fraction of each interval during which arrivals cross the detector;
/// narrower than the full interval models platooned traffic.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ArrivalSpreadSpec {
    pub offset_frac: f64,
    pub width_frac: f64,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct AnomalyEntry {
    pub station: String,
    pub date: String,
    pub from_interval: u32,
    pub to_interval: u32,
    pub kind: String,
    pub magnitude: f64,
}

impl CurveSpec {
    fn expand(&self, intervals_per_day: usize) -> Vec<f64> {
        let per_hour = intervals_per_day as f64 / 24.0;
        let peaks: Vec<Peak> = self
            .peaks
            .iter()
            .map(|p| Peak {
                centre_slot: p.centre_hour * per_hour,
                height: p.height,
                width_slots: p.width_hours * per_hour,
            })
            .collect();
        peaked_curve(intervals_per_day, self.base, &peaks)
    }
}

impl PatternSpec {
    fn expand(&self, intervals_per_day: usize) -> DemandPattern {
        DemandPattern {
            weekday: self.weekday.expand(intervals_per_day),
            weekend: self.weekend.expand(intervals_per_day),
        }
    }
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing scenario {}", path.display()))
}

/// Expand a parsed scenario file against a graph. `seed` and `days` from the
/// command line override the file when given.
pub fn build_scenario(
    file: &ScenarioFile,
    graph: &MotorwayGraph,
    seed_override: Option<u64>,
    days_override: Option<u32>,
) -> Result<(Scenario, AnomalySpec)> {
    let mode = ArrivalMode::from_name(&file.mode)
        .with_context(|| format!("unknown mode {:?}", file.mode))?;
    let start_day = parse_date(&file.start_date)?;
    let ipd = (86_400 / graph.interval_secs()) as usize;

    let mut scenario = Scenario::new(
        start_day,
        days_override.unwrap_or(file.days),
        seed_override.unwrap_or(file.seed),
        mode,
    );
    scenario.noise_sigma = file.noise_sigma;
    scenario.daily_multiplier_sigma = file.daily_multiplier_sigma;
    if let Some(spread) = file.arrival_spread {
        scenario.arrival_spread = flowcast_core::simulator::ArrivalSpread {
            offset_frac: spread.offset_frac,
            width_frac: spread.width_frac,
        };
    }

    if let Some(head) = &file.demand.head {
        scenario
            .demand
            .insert(graph.head().clone(), head.expand(ipd));
    }
    for (id, kind) in graph.stations() {
        if kind == StationKind::Entry {
            let spec = file
                .demand
                .overrides
                .get(id.as_str())
                .or(file.demand.entries.as_ref());
            if let Some(spec) = spec {
                scenario.demand.insert(id.clone(), spec.expand(ipd));
            }
        }
    }
    for station in file.demand.overrides.keys() {
        let id = StationId::new(station.clone())?;
        if graph.kind(&id) != Some(StationKind::Entry) && &id != graph.head() {
            bail!("demand override {station} is not an entry station");
        }
        if &id == graph.head() {
            let spec = &file.demand.overrides[station];
            scenario.demand.insert(id, spec.expand(ipd));
        }
    }

    for (id, kind) in graph.stations() {
        if kind == StationKind::Exit {
            let prob = file
                .exits
                .overrides
                .get(id.as_str())
                .copied()
                .unwrap_or(file.exits.default_prob);
            if prob > 0.0 {
                scenario.exit_probs.insert(id.clone(), prob);
            }
        }
    }
    for station in file.exits.overrides.keys() {
        let id = StationId::new(station.clone())?;
        if graph.kind(&id) != Some(StationKind::Exit) {
            bail!("exit override {station} is not an exit station");
        }
    }

    let mut anomalies = AnomalySpec::default();
    for entry in &file.anomalies {
        let kind = match entry.kind.as_str() {
            "dropout" => AnomalyKind::Dropout,
            "spike" => AnomalyKind::Spike,
            other => bail!("unknown anomaly kind {other:?}"),
        };
        anomalies.items.push(AnomalyItem {
            station: StationId::new(entry.station.clone())?,
            day: parse_date(&entry.date)?,
            from_interval: entry.from_interval,
            to_interval: entry.to_interval,
            kind,
            magnitude: entry.magnitude,
        });
    }

    Ok((scenario, anomalies))
}
