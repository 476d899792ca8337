//! Vehicle-level synthetic traffic generation.
//!
//! Vehicles enter at the mainline head and at entry stations, travel
//! downstream at exactly the graph's reference speed, take each exit
//! independently with a configured probability, and bump the count of every
//! detector they cross in the interval containing the crossing time. Because
//! the kinematics match the predictors' travel-time model exactly, the output
//! is a ground-truth oracle: on aligned noiseless scenarios the graph
//! predictors must reproduce it with zero error.
//!
//! Runs are single-threaded and draw every random number from one seeded
//! generator in a fixed order, so a scenario and seed pin the output exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::cleaning::{Flag, OutlierMask};
use crate::flowdata::{Day, FlowSeries, FlowStore, TimeGrid, SECONDS_PER_DAY};
use crate::graph::{MotorwayGraph, StationId, StationKind};

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    InvalidScenario { message: String },
    OutOfRangeSpec { message: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::InvalidScenario { message } => write!(f, "invalid scenario: {message}"),
            SimError::OutOfRangeSpec { message } => {
                write!(f, "anomaly spec out of range: {message}")
            }
        }
    }
}

impl core::error::Error for SimError {}

fn invalid(message: String) -> SimError {
    SimError::InvalidScenario { message }
}

/// How per-interval arrival counts are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalMode {
    /// `round(rate)` vehicles per interval, evenly spaced inside it, and
    /// exit splits by deterministic per-batch counting. Every day of equal
    /// demand produces identical counts — the aligned verification mode.
    Deterministic,
    /// Seeded Poisson counts, uniform arrival times, Bernoulli exits.
    Poisson,
}

impl ArrivalMode {
    pub fn name(self) -> &'static str {
        match self {
            ArrivalMode::Deterministic => "deterministic",
            ArrivalMode::Poisson => "poisson",
        }
    }

    pub fn from_name(name: &str) -> Option<ArrivalMode> {
        match name {
            "deterministic" => Some(ArrivalMode::Deterministic),
            "poisson" => Some(ArrivalMode::Poisson),
            _ => None,
        }
    }
}

/// Where inside each interval the source's vehicles cross the detector, as a
/// fraction of the interval length. The default covers the whole interval;
/// a narrower window models platooned arrivals, which breaks the
/// uniform-arrival assumption the interpolating predictor relies on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrivalSpread {
    pub offset_frac: f64,
    pub width_frac: f64,
}

impl Default for ArrivalSpread {
    fn default() -> Self {
        ArrivalSpread {
            offset_frac: 0.0,
            width_frac: 1.0,
        }
    }
}

/// Expected vehicles per interval for one source station, one curve per
/// weekday/weekend regime (the curves' length must match the grid).
#[derive(Debug, Clone, PartialEq)]
pub struct DemandPattern {
    pub weekday: Vec<f64>,
    pub weekend: Vec<f64>,
}

impl DemandPattern {
    pub fn uniform(curve: Vec<f64>) -> DemandPattern {
        DemandPattern {
            weekday: curve.clone(),
            weekend: curve,
        }
    }

    pub fn curve(&self, weekend: bool) -> &[f64] {
        if weekend {
            &self.weekend
        } else {
            &self.weekday
        }
    }
}

/// A complete synthetic-traffic configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub days: u32,
    pub start_day: Day,
    pub seed: u64,
    pub mode: ArrivalMode,
    /// Demand per source station: the mainline head and any entry stations.
    /// Sources without a pattern emit no vehicles.
    pub demand: BTreeMap<StationId, DemandPattern>,
    /// Probability that a vehicle passing an exit's diverge takes it.
    /// Exits without an entry here are never taken.
    pub exit_probs: BTreeMap<StationId, f64>,
    /// Standard deviation of additive detector noise on every recorded
    /// count, clamped at zero. Zero disables noise.
    pub noise_sigma: f64,
    /// Standard deviation of the per-day demand multiplier around 1.0.
    /// Zero disables the perturbation.
    pub daily_multiplier_sigma: f64,
    /// Within-interval placement of arrivals at every source.
    pub arrival_spread: ArrivalSpread,
}

impl Scenario {
    pub fn new(start_day: Day, days: u32, seed: u64, mode: ArrivalMode) -> Scenario {
        Scenario {
            days,
            start_day,
            seed,
            mode,
            demand: BTreeMap::new(),
            exit_probs: BTreeMap::new(),
            noise_sigma: 0.0,
            daily_multiplier_sigma: 0.0,
            arrival_spread: ArrivalSpread::default(),
        }
    }

    fn validate(&self, graph: &MotorwayGraph, grid: &TimeGrid) -> Result<(), SimError> {
        let ipd = grid.intervals_per_day() as usize;
        for (station, pattern) in &self.demand {
            let kind = graph
                .kind(station)
                .ok_or_else(|| invalid(format!("demand station {station} not in graph")))?;
            let is_head = station == graph.head();
            if kind != StationKind::Entry && !is_head {
                return Err(invalid(format!(
                    "demand station {station} must be an entry or the mainline head"
                )));
            }
            for curve in [&pattern.weekday, &pattern.weekend] {
                if curve.len() != ipd {
                    return Err(invalid(format!(
                        "demand curve for {station} has {} slots, grid needs {ipd}",
                        curve.len()
                    )));
                }
                if curve.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid(format!(
                        "negative or non-finite rate for {station}"
                    )));
                }
            }
        }
        for (station, q) in &self.exit_probs {
            if graph.kind(station) != Some(StationKind::Exit) {
                return Err(invalid(format!("{station} is not an exit station")));
            }
            if !(0.0..=1.0).contains(q) {
                return Err(invalid(format!("exit probability {q} for {station}")));
            }
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(invalid(format!("noise sigma {}", self.noise_sigma)));
        }
        if !self.daily_multiplier_sigma.is_finite() || self.daily_multiplier_sigma < 0.0 {
            return Err(invalid(format!(
                "daily multiplier sigma {}",
                self.daily_multiplier_sigma
            )));
        }
        let spread = self.arrival_spread;
        if !spread.offset_frac.is_finite()
            || spread.offset_frac < 0.0
            || !spread.width_frac.is_finite()
            || spread.width_frac <= 0.0
            || spread.offset_frac + spread.width_frac > 1.0
        {
            return Err(invalid(format!(
                "arrival spread offset {} width {}",
                spread.offset_frac, spread.width_frac
            )));
        }
        Ok(())
    }
}

/// One simulated vehicle: where and when it entered, and the exit it took
/// (indices into [`SimulationTruth::stations`]). With constant speed these
/// three values determine every crossing time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleRecord {
    pub origin: u32,
    pub entry_time: f64,
    pub exit_taken: Option<u32>,
}

/// Ground-truth metadata retained alongside the generated counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTruth {
    /// Station table the vehicle records index into (sorted by id).
    pub stations: Vec<StationId>,
    pub vehicles: Vec<VehicleRecord>,
    pub day_multipliers: Vec<f64>,
}

impl SimulationTruth {
    pub fn station_index(&self, station: &StationId) -> Option<u32> {
        self.stations.binary_search(station).ok().map(|i| i as u32)
    }

    /// Seconds (from the scenario start) at which a vehicle crosses the given
    /// station, or `None` if its path never touches it.
    pub fn crossing_time(
        &self,
        graph: &MotorwayGraph,
        vehicle: &VehicleRecord,
        station: &StationId,
    ) -> Option<f64> {
        let origin = &self.stations[vehicle.origin as usize];
        if station == origin {
            return Some(vehicle.entry_time);
        }
        // Position of the vehicle's virtual start on the mainline axis: an
        // entry origin sits its ramp length before the merge point.
        let (first_idx, start_pos) = match graph.ramp_attach_index(origin) {
            Some((merge_idx, ramp_len)) => (merge_idx, graph.position_at(merge_idx) - ramp_len),
            None => (graph.mainline_index_of(origin)?, 0.0),
        };
        let last_idx = match vehicle.exit_taken {
            Some(x) => graph.ramp_attach_index(&self.stations[x as usize])?.0,
            None => graph.mainline().len() - 1,
        };
        let time_at = |pos: f64| vehicle.entry_time + (pos - start_pos) / graph.speed_mps();
        if let Some(idx) = graph.mainline_index_of(station) {
            return (first_idx..=last_idx)
                .contains(&idx)
                .then(|| time_at(graph.position_at(idx)));
        }
        if let Some(x) = vehicle.exit_taken {
            if &self.stations[x as usize] == station {
                let (div_idx, ramp_len) = graph.ramp_attach_index(station)?;
                return Some(time_at(graph.position_at(div_idx) + ramp_len));
            }
        }
        None
    }
}

struct SimRun<'a> {
    graph: &'a MotorwayGraph,
    mode: ArrivalMode,
    exit_probs: &'a BTreeMap<StationId, f64>,
    stations: Vec<StationId>,
    station_index: BTreeMap<StationId, u32>,
    /// Flat per-station counts, indexed `day * ipd + slot`.
    counts: Vec<Vec<f64>>,
    vehicles: Vec<VehicleRecord>,
    days: u32,
    interval_secs: f64,
    ipd: usize,
}

impl SimRun<'_> {
    fn record(&mut self, station: u32, time: f64) {
        let day = libm::floor(time / f64::from(SECONDS_PER_DAY));
        if day < 0.0 || day >= f64::from(self.days) {
            return;
        }
        let within = time - day * f64::from(SECONDS_PER_DAY);
        let slot = (libm::floor(within / self.interval_secs) as usize).min(self.ipd - 1);
        self.counts[station as usize][day as usize * self.ipd + slot] += 1.0;
    }

    /// Walk one batch of vehicles that entered at `origin` at times `t0s`
    /// down the motorway, counting crossings and deciding exits.
    fn spawn_batch(&mut self, origin: &StationId, t0s: &[f64], rng: &mut ChaCha8Rng) {
        let origin_idx = self.station_index[origin];
        let base_vid = self.vehicles.len();
        for &t0 in t0s {
            self.vehicles.push(VehicleRecord {
                origin: origin_idx,
                entry_time: t0,
                exit_taken: None,
            });
            self.record(origin_idx, t0);
        }
        let (first_node, start_pos) = match self.graph.ramp_attach_index(origin) {
            Some((merge_idx, ramp_len)) => {
                (merge_idx, self.graph.position_at(merge_idx) - ramp_len)
            }
            None => (0, 0.0),
        };

        let mut alive: Vec<usize> = (0..t0s.len()).collect();
        for node_idx in first_node..self.graph.mainline().len() {
            if alive.is_empty() {
                break;
            }
            let node = self.graph.mainline()[node_idx].clone();
            let node_station = self.station_index[&node];
            let dist = self.graph.position_at(node_idx) - start_pos;
            let travel = dist / self.graph.speed_mps();
            if node_idx != first_node
                || !matches!(self.graph.kind(origin), Some(StationKind::Mainline))
            {
                for &j in &alive {
                    self.record(node_station, t0s[j] + travel);
                }
            }
            for ramp in self.graph.exits_from(&node).to_vec() {
                if alive.is_empty() {
                    break;
                }
                let q = self.exit_probs.get(&ramp.station).copied().unwrap_or(0.0);
                if q == 0.0 {
                    continue;
                }
                let exit_station = self.station_index[&ramp.station];
                let exit_travel = (dist + ramp.ramp_len_m) / self.graph.speed_mps();
                let taken: Vec<usize> = match self.mode {
                    ArrivalMode::Deterministic => {
                        let k = libm::round(alive.len() as f64 * q) as usize;
                        alive[..k].to_vec()
                    }
                    ArrivalMode::Poisson => alive
                        .iter()
                        .copied()
                        .filter(|_| rng.gen::<f64>() < q)
                        .collect(),
                };
                for &j in &taken {
                    self.record(exit_station, t0s[j] + exit_travel);
                    self.vehicles[base_vid + j].exit_taken = Some(exit_station);
                }
                alive.retain(|j| !taken.contains(j));
            }
        }
    }
}

/// Run a scenario over the graph, producing the recorded counts and the
/// vehicle-level ground truth.
pub fn simulate(
    graph: &MotorwayGraph,
    scenario: &Scenario,
) -> Result<(FlowStore, SimulationTruth), SimError> {
    let interval_secs = graph.interval_secs();
    if !SECONDS_PER_DAY.is_multiple_of(interval_secs) {
        return Err(invalid(format!(
            "graph interval of {interval_secs} s does not tile a day"
        )));
    }
    let grid = TimeGrid::new(interval_secs, SECONDS_PER_DAY / interval_secs)
        .expect("divisibility checked above");
    scenario.validate(graph, &grid)?;

    let stations: Vec<StationId> = graph.stations().map(|(id, _)| id.clone()).collect();
    let station_index: BTreeMap<StationId, u32> = stations
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i as u32))
        .collect();
    let ipd = grid.intervals_per_day() as usize;
    let days = scenario.days;

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let day_multipliers: Vec<f64> = if scenario.daily_multiplier_sigma > 0.0 {
        let dist = Normal::new(1.0, scenario.daily_multiplier_sigma)
            .map_err(|e| invalid(format!("demand multiplier distribution: {e}")))?;
        (0..days).map(|_| dist.sample(&mut rng).max(0.05)).collect()
    } else {
        vec![1.0; days as usize]
    };

    let mut run = SimRun {
        graph,
        mode: scenario.mode,
        exit_probs: &scenario.exit_probs,
        counts: vec![vec![0.0; days as usize * ipd]; stations.len()],
        stations,
        station_index,
        vehicles: Vec::new(),
        days,
        interval_secs: f64::from(interval_secs),
        ipd,
    };

    let d = f64::from(interval_secs);
    for day in 0..days {
        let weekend = scenario
            .start_day
            .offset(i64::from(day))
            .day_of_week()
            .is_weekend();
        let day_base = f64::from(day) * f64::from(SECONDS_PER_DAY);
        for (station, pattern) in &scenario.demand {
            let curve = pattern.curve(weekend);
            for (slot, base_rate) in curve.iter().enumerate() {
                let rate = base_rate * day_multipliers[day as usize];
                let n = match scenario.mode {
                    ArrivalMode::Deterministic => libm::round(rate) as usize,
                    ArrivalMode::Poisson => {
                        if rate > 0.0 {
                            let dist = Poisson::new(rate)
                                .map_err(|e| invalid(format!("arrival rate {rate}: {e}")))?;
                            dist.sample(&mut rng) as usize
                        } else {
                            0
                        }
                    }
                };
                if n == 0 {
                    continue;
                }
                let window_start =
                    day_base + slot as f64 * d + scenario.arrival_spread.offset_frac * d;
                let window_len = scenario.arrival_spread.width_frac * d;
                let t0s: Vec<f64> = match scenario.mode {
                    ArrivalMode::Deterministic => (0..n)
                        .map(|j| window_start + (j as f64 + 0.5) * window_len / n as f64)
                        .collect(),
                    ArrivalMode::Poisson => (0..n)
                        .map(|_| window_start + rng.gen::<f64>() * window_len)
                        .collect(),
                };
                run.spawn_batch(station, &t0s, &mut rng);
            }
        }
    }

    if scenario.noise_sigma > 0.0 {
        let dist = Normal::new(0.0, scenario.noise_sigma)
            .map_err(|e| invalid(format!("noise distribution: {e}")))?;
        for series in run.counts.iter_mut() {
            for value in series.iter_mut() {
                *value = (*value + dist.sample(&mut rng)).max(0.0);
            }
        }
    }

    let mut store = FlowStore::new(grid);
    for (i, station) in run.stations.iter().enumerate() {
        for day in 0..days as usize {
            let counts: Vec<Option<f64>> = run.counts[i][day * ipd..(day + 1) * ipd]
                .iter()
                .map(|v| Some(*v))
                .collect();
            let series = FlowSeries::new(
                station.clone(),
                scenario.start_day.offset(day as i64),
                counts,
                &grid,
            )
            .expect("simulated counts are non-negative");
            store.insert_series(series).expect("unique station-days");
        }
    }

    Ok((
        store,
        SimulationTruth {
            stations: run.stations,
            vehicles: run.vehicles,
            day_multipliers,
        },
    ))
}

/// What an injected anomaly does to the touched counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnomalyKind {
    /// Scale counts towards zero: `v * (1 - magnitude)`.
    Dropout,
    /// Scale counts up: `v * magnitude`.
    Spike,
}

/// One anomaly: a station-day interval range `[from, to)` and a magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyItem {
    pub station: StationId,
    pub day: Day,
    pub from_interval: u32,
    pub to_interval: u32,
    pub kind: AnomalyKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnomalySpec {
    pub items: Vec<AnomalyItem>,
}

/// Corrupt a store with the given anomalies. Returns the corrupted store and
/// ground-truth masks flagging exactly the touched intervals (missing
/// intervals stay untouched and unflagged).
pub fn inject_anomalies(
    store: &FlowStore,
    spec: &AnomalySpec,
) -> Result<(FlowStore, Vec<OutlierMask>), SimError> {
    let ipd = store.grid().intervals_per_day();
    let mut by_series: BTreeMap<(StationId, Day), Vec<&AnomalyItem>> = BTreeMap::new();
    for item in &spec.items {
        if item.from_interval >= item.to_interval || item.to_interval > ipd {
            return Err(SimError::OutOfRangeSpec {
                message: format!(
                    "interval range [{}, {}) outside grid of {ipd}",
                    item.from_interval, item.to_interval
                ),
            });
        }
        if store.series(&item.station, item.day).is_none() {
            return Err(SimError::OutOfRangeSpec {
                message: format!("no series for {} on {}", item.station, item.day),
            });
        }
        let bad_magnitude = match item.kind {
            AnomalyKind::Dropout => !(0.0..=1.0).contains(&item.magnitude),
            AnomalyKind::Spike => !item.magnitude.is_finite() || item.magnitude < 0.0,
        };
        if bad_magnitude {
            return Err(SimError::OutOfRangeSpec {
                message: format!("magnitude {} for {:?}", item.magnitude, item.kind),
            });
        }
        by_series
            .entry((item.station.clone(), item.day))
            .or_default()
            .push(item);
    }

    let mut corrupted = FlowStore::new(*store.grid());
    let mut masks = Vec::new();
    for (station, day, counts) in store.iter() {
        let mut counts: Vec<Option<f64>> = counts.to_vec();
        if let Some(items) = by_series.get(&(station.clone(), day)) {
            let mut flags = vec![Flag::Clean; counts.len()];
            for item in items {
                for slot in item.from_interval..item.to_interval {
                    if let Some(v) = counts[slot as usize] {
                        counts[slot as usize] = Some(match item.kind {
                            AnomalyKind::Dropout => v * (1.0 - item.magnitude),
                            AnomalyKind::Spike => v * item.magnitude,
                        });
                        flags[slot as usize] = Flag::Outlier;
                    }
                }
            }
            masks.push(OutlierMask {
                station: station.clone(),
                day,
                flags,
            });
        }
        corrupted
            .insert_series(FlowSeries::from_raw(station.clone(), day, counts))
            .expect("copy of a valid store");
    }
    Ok((corrupted, masks))
}
