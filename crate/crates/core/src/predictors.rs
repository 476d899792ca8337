//! The three forecasting methods: the daily-profile baseline, backtracking
//! and interpolation.
//!
//! All predictors are pure functions over an immutable graph, flow store and
//! profile set, so any number may run concurrently. The two graph methods
//! share the same upstream search and traversal: the flow observed at an
//! origin `u` roughly `(r + p) * d * speed` metres upstream is carried
//! downstream, adding the entries and subtracting the exits met on the way,
//! each read at its aligned time interval. Where an aligned interval lies in
//! the future, the day-of-week historical mean stands in.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use crate::flowdata::{FlowStore, ProfileSet, TimeGrid, Timestamp};
use crate::graph::{GraphError, MotorwayGraph, StationId, TraversalResult};

/// Forecasting method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Daily-profile baseline: predict the historical mean.
    Dpp,
    /// Backtracking: upstream flow plus entries minus exits at rounded
    /// intervals.
    Bktr,
    /// Interpolation: ramp contributions blended across the two intervals
    /// their travel time overlaps.
    Intr,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Dpp, Method::Bktr, Method::Intr];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dpp => "dpp",
            Method::Bktr => "bktr",
            Method::Intr => "intr",
        }
    }

    pub fn from_name(name: &str) -> Option<Method> {
        Self::ALL.iter().copied().find(|m| m.name() == name)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What a forecast term was read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Observed,
    Historical,
    Interpolated,
}

/// One signed term of a forecast: positive for the origin and entries,
/// negative for exits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastComponent {
    pub station: StationId,
    pub value: f64,
    pub source: Source,
}

/// A single-point forecast with its full term breakdown. The components sum
/// exactly to `raw`; `value` is `raw` clamped at zero, since exits can
/// transiently exceed upstream flow under noise.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub value: f64,
    pub raw: f64,
    pub method: Method,
    pub origin: Option<StationId>,
    pub components: Vec<ForecastComponent>,
}

impl Forecast {
    fn from_components(
        method: Method,
        origin: Option<StationId>,
        components: Vec<ForecastComponent>,
    ) -> Forecast {
        let raw = components.iter().map(|c| c.value).sum();
        Forecast {
            value: if raw > 0.0 { raw } else { 0.0 },
            raw,
            method,
            origin,
            components,
        }
    }
}

/// A forecast request: predict station `target` at `p` intervals past the
/// current time `at`, using observations back to `at - r`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub target: StationId,
    pub at: Timestamp,
    pub past_horizon: u32,
    pub future_horizon: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictError {
    Graph(GraphError),
    MissingData {
        station: StationId,
        at: Timestamp,
    },
    MissingProfile {
        station: StationId,
    },
    /// Horizons must be at least one interval.
    InvalidHorizon {
        past_horizon: u32,
        future_horizon: u32,
    },
}

impl fmt::Display for PredictError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictError::Graph(e) => write!(f, "{e}"),
            PredictError::MissingData { station, at } => {
                write!(f, "missing observation for {station} at {at}")
            }
            PredictError::MissingProfile { station } => {
                write!(f, "no daily profile for {station}")
            }
            PredictError::InvalidHorizon {
                past_horizon,
                future_horizon,
            } => write!(
                f,
                "horizons must be >= 1, got r={past_horizon}, p={future_horizon}"
            ),
        }
    }
}

impl core::error::Error for PredictError {}

impl From<GraphError> for PredictError {
    fn from(e: GraphError) -> Self {
        PredictError::Graph(e)
    }
}

impl PredictError {
    /// True for the per-timestamp data gaps that an evaluation run skips
    /// rather than aborts on.
    pub fn is_missing_data(&self) -> bool {
        matches!(self, PredictError::MissingData { .. })
    }
}

/// The reusable part of a graph prediction: origin selection and traversal
/// depend only on (target, r, p), so sweeping many timestamps plans once.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutePlan {
    pub target: StationId,
    pub past_horizon: u32,
    pub future_horizon: u32,
    pub traversal: TraversalResult,
}

/// Select the origin and traverse the segment for (target, r, p).
pub fn plan_route(
    graph: &MotorwayGraph,
    target: &StationId,
    past_horizon: u32,
    future_horizon: u32,
) -> Result<RoutePlan, PredictError> {
    if past_horizon < 1 || future_horizon < 1 {
        return Err(PredictError::InvalidHorizon {
            past_horizon,
            future_horizon,
        });
    }
    let origin = graph.find_optimal_upstream(target, past_horizon, future_horizon)?;
    let traversal = graph.traverse_collect(&origin, target, past_horizon)?;
    Ok(RoutePlan {
        target: target.clone(),
        past_horizon,
        future_horizon,
        traversal,
    })
}

/// Daily-profile baseline: the historical mean for the target's day of week
/// at slot `t + p`.
pub fn predict_dpp(
    profiles: &ProfileSet,
    target: &StationId,
    at: Timestamp,
    future_horizon: u32,
    grid: &TimeGrid,
) -> Result<Forecast, PredictError> {
    let profile = profiles.get(target).ok_or(PredictError::MissingProfile {
        station: target.clone(),
    })?;
    let target_ts = at.offset(i64::from(future_horizon), grid);
    let value = profile.value_at(target_ts);
    Ok(Forecast::from_components(
        Method::Dpp,
        None,
        Vec::from([ForecastComponent {
            station: target.clone(),
            value,
            source: Source::Historical,
        }]),
    ))
}

fn observed(store: &FlowStore, station: &StationId, at: Timestamp) -> Result<f64, PredictError> {
    store.value(station, at).ok_or(PredictError::MissingData {
        station: station.clone(),
        at,
    })
}

fn historical_mean(
    profiles: &ProfileSet,
    station: &StationId,
    at: Timestamp,
) -> Result<f64, PredictError> {
    let profile = profiles.get(station).ok_or(PredictError::MissingProfile {
        station: station.clone(),
    })?;
    Ok(profile.value_at(at))
}

/// A ramp value at a signed offset from the current time: observed flow for
/// past intervals, the day-of-week historical mean otherwise.
fn aligned_value(
    store: &FlowStore,
    profiles: &ProfileSet,
    station: &StationId,
    at: Timestamp,
    offset: i64,
) -> Result<(f64, Source), PredictError> {
    let ts = at.offset(offset, store.grid());
    if offset < 0 {
        Ok((observed(store, station, ts)?, Source::Observed))
    } else {
        Ok((historical_mean(profiles, station, ts)?, Source::Historical))
    }
}

/// Backtracking forecast for a prepared route at one timestamp.
pub fn predict_bktr_planned(
    plan: &RoutePlan,
    store: &FlowStore,
    profiles: &ProfileSet,
    at: Timestamp,
) -> Result<Forecast, PredictError> {
    let r = i64::from(plan.past_horizon);
    let origin = &plan.traversal.origin;
    let mut components =
        Vec::with_capacity(1 + plan.traversal.entries.len() + plan.traversal.exits.len());
    components.push(ForecastComponent {
        station: origin.clone(),
        value: observed(store, origin, at.offset(-r, store.grid()))?,
        source: Source::Observed,
    });
    for (ramps, sign) in [
        (&plan.traversal.entries, 1.0),
        (&plan.traversal.exits, -1.0),
    ] {
        for ramp in ramps.iter() {
            let (value, source) = aligned_value(store, profiles, &ramp.station, at, ramp.offset)?;
            components.push(ForecastComponent {
                station: ramp.station.clone(),
                value: sign * value,
                source,
            });
        }
    }
    Ok(Forecast::from_components(
        Method::Bktr,
        Some(origin.clone()),
        components,
    ))
}

/// Interpolating forecast for a prepared route at one timestamp.
///
/// Each ramp is `D` metres from the origin along the vehicle path, so its
/// contribution window starts `tau = D / speed` seconds after interval
/// `t - r`: the window covers intervals `floor(tau/d)` and the next one, with
/// `t2 = tau mod d` seconds falling into the second. A window side in the
/// future reads the historical mean instead of the actual flow.
pub fn predict_intr_planned(
    plan: &RoutePlan,
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    at: Timestamp,
) -> Result<Forecast, PredictError> {
    let r = i64::from(plan.past_horizon);
    let d = f64::from(graph.interval_secs());
    let origin = &plan.traversal.origin;
    let mut components =
        Vec::with_capacity(1 + plan.traversal.entries.len() + plan.traversal.exits.len());
    components.push(ForecastComponent {
        station: origin.clone(),
        value: observed(store, origin, at.offset(-r, store.grid()))?,
        source: Source::Observed,
    });
    for (ramps, sign) in [
        (&plan.traversal.entries, 1.0),
        (&plan.traversal.exits, -1.0),
    ] {
        for ramp in ramps.iter() {
            let dist = plan.traversal.distances[&ramp.station];
            let tau = dist / graph.speed_mps();
            let whole = libm::floor(tau / d);
            let t2 = tau - whole * d;
            let t1 = d - t2;
            let first_offset = whole as i64 - r;
            let (value, source) = if t2 == 0.0 {
                aligned_value(store, profiles, &ramp.station, at, first_offset)?
            } else {
                let (first, _) = aligned_value(store, profiles, &ramp.station, at, first_offset)?;
                let (second, _) =
                    aligned_value(store, profiles, &ramp.station, at, first_offset + 1)?;
                (
                    crate::flowdata::time_weighted_blend(t1, t2, d, first, second),
                    Source::Interpolated,
                )
            };
            components.push(ForecastComponent {
                station: ramp.station.clone(),
                value: sign * value,
                source,
            });
        }
    }
    Ok(Forecast::from_components(
        Method::Intr,
        Some(origin.clone()),
        components,
    ))
}

/// Backtracking forecast, planning the route on the fly.
pub fn predict_bktr(
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    request: &PredictionRequest,
) -> Result<Forecast, PredictError> {
    let plan = plan_route(
        graph,
        &request.target,
        request.past_horizon,
        request.future_horizon,
    )?;
    predict_bktr_planned(&plan, store, profiles, request.at)
}

/// Interpolating forecast, planning the route on the fly.
pub fn predict_intr(
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    request: &PredictionRequest,
) -> Result<Forecast, PredictError> {
    let plan = plan_route(
        graph,
        &request.target,
        request.past_horizon,
        request.future_horizon,
    )?;
    predict_intr_planned(&plan, graph, store, profiles, request.at)
}

/// The mainline stations for which an upstream origin exists at horizon
/// (r, p). Shrinks as the horizons grow, since the origin must sit farther
/// upstream.
pub fn feasible_targets(
    graph: &MotorwayGraph,
    past_horizon: u32,
    future_horizon: u32,
) -> BTreeSet<StationId> {
    graph
        .mainline()
        .iter()
        .filter(|v| {
            graph
                .find_optimal_upstream(v, past_horizon, future_horizon)
                .is_ok()
        })
        .cloned()
        .collect()
}
