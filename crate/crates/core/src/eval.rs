//! Evaluation harness: the three error metrics, train/test sweeps over
//! (r, p) horizons, and per-station report assembly.
//!
//! Per-cell work is factored into [`collect_cell`] so callers can fan the
//! station loop out across workers; metric accumulation pools residuals in
//! station order before computing aggregates, making parallel and serial
//! runs agree exactly.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::flowdata::{Day, FlowStore, ProfileSet, Timestamp};
use crate::graph::{MotorwayGraph, StationId};
use crate::predictors::{
    feasible_targets, plan_route, predict_bktr_planned, predict_dpp, predict_intr_planned, Method,
    PredictError, RoutePlan,
};

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricError {
    LengthMismatch {
        pred: usize,
        actual: usize,
    },
    Empty,
    /// R-squared is undefined when the actuals are constant.
    ConstantActual,
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::LengthMismatch { pred, actual } => {
                write!(f, "length mismatch: {pred} predictions vs {actual} actuals")
            }
            MetricError::Empty => write!(f, "empty series"),
            MetricError::ConstantActual => write!(f, "constant actuals: R-squared undefined"),
        }
    }
}

impl core::error::Error for MetricError {}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<(), MetricError> {
    if pred.len() != actual.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            actual: actual.len(),
        });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Root mean square error.
pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check_lengths(pred, actual)?;
    let sum_sq: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(libm::sqrt(sum_sq / pred.len() as f64))
}

/// Coefficient of determination: `1 - SS_res / SS_tot`, with SS_tot taken
/// around the mean of the actuals.
pub fn r_squared(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check_lengths(pred, actual)?;
    let mean: f64 = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ConstantActual);
    }
    let ss_res: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Symmetric mean absolute percentage error, in percent. The denominator
/// `|pred| + |actual|` bounds it by 100; terms where both sides are zero
/// contribute zero (the prediction is exact there).
pub fn smape(pred: &[f64], actual: &[f64]) -> Result<f64, MetricError> {
    check_lengths(pred, actual)?;
    let sum: f64 = pred
        .iter()
        .zip(actual)
        .map(|(p, a)| {
            let denom = libm::fabs(*p) + libm::fabs(*a);
            if denom == 0.0 {
                0.0
            } else {
                libm::fabs(p - a) / denom
            }
        })
        .sum();
    Ok(100.0 * sum / pred.len() as f64)
}

// ---------------------------------------------------------------------------
// Plans and reports
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationPlan {
    pub train_days: Vec<Day>,
    pub test_days: Vec<Day>,
    /// Restrict evaluation to these stations; `None` means every feasible
    /// mainline station.
    pub stations: Option<BTreeSet<StationId>>,
    pub methods: BTreeSet<Method>,
    pub r_values: Vec<u32>,
    pub p_values: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    EmptyTestRange,
    NoFeasibleStations,
    /// Train and test ranges must be disjoint.
    OverlappingRanges {
        day: Day,
    },
    /// Horizons must lie in 1..=5.
    HorizonOutOfRange {
        value: u32,
    },
    NoMethods,
    Predict(PredictError),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::EmptyTestRange => write!(f, "empty test range"),
            EvalError::NoFeasibleStations => write!(f, "no feasible target stations"),
            EvalError::OverlappingRanges { day } => {
                write!(f, "train and test ranges overlap at {day}")
            }
            EvalError::HorizonOutOfRange { value } => {
                write!(f, "horizon {value} outside 1..=5")
            }
            EvalError::NoMethods => write!(f, "no methods selected"),
            EvalError::Predict(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for EvalError {}

impl From<PredictError> for EvalError {
    fn from(e: PredictError) -> Self {
        EvalError::Predict(e)
    }
}

impl EvaluationPlan {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.test_days.is_empty() {
            return Err(EvalError::EmptyTestRange);
        }
        let train: BTreeSet<Day> = self.train_days.iter().copied().collect();
        if let Some(day) = self.test_days.iter().find(|d| train.contains(d)) {
            return Err(EvalError::OverlappingRanges { day: *day });
        }
        if self.methods.is_empty() {
            return Err(EvalError::NoMethods);
        }
        for &value in self.r_values.iter().chain(self.p_values.iter()) {
            if !(1..=5).contains(&value) {
                return Err(EvalError::HorizonOutOfRange { value });
            }
        }
        Ok(())
    }
}

/// Metrics for one (method, station, r, p) cell. `r2` is absent when the
/// actuals are constant over the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMetrics {
    pub rmse: f64,
    pub r2: Option<f64>,
    pub smape: f64,
    pub n: usize,
}

/// How many timestamps produced a forecast versus being skipped for missing
/// inputs or missing truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Coverage {
    pub predicted: usize,
    pub skipped: usize,
}

/// Five-number summary (plus mean) of per-timestamp absolute errors,
/// Tukey-style whiskers clipped to the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxplotStats {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub lo_whisker: f64,
    pub hi_whisker: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotRow {
    pub method: Method,
    pub station: StationId,
    pub r: u32,
    pub p: u32,
    pub stats: BoxplotStats,
}

/// Evaluation results, keyed method -> station -> (r, p), with pooled
/// aggregates per method and horizon.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    #[allow(clippy::type_complexity)]
    pub cells: BTreeMap<Method, BTreeMap<StationId, BTreeMap<(u32, u32), CellMetrics>>>,
    pub aggregates: BTreeMap<Method, BTreeMap<(u32, u32), CellMetrics>>,
    pub coverage: BTreeMap<Method, BTreeMap<(u32, u32), Coverage>>,
    pub boxplot: Vec<BoxplotRow>,
}

impl MetricsReport {
    pub fn cell(
        &self,
        method: Method,
        station: &StationId,
        r: u32,
        p: u32,
    ) -> Option<&CellMetrics> {
        self.cells.get(&method)?.get(station)?.get(&(r, p))
    }

    pub fn aggregate(&self, method: Method, r: u32, p: u32) -> Option<&CellMetrics> {
        self.aggregates.get(&method)?.get(&(r, p))
    }
}

/// (prediction, actual) pairs collected for one station cell, plus the count
/// of test timestamps that could not be evaluated.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationCellSample {
    pub pairs: Vec<(f64, f64)>,
    pub skipped: usize,
}

/// Run one method over one station for every interval of the test days.
/// The route for graph methods is planned once and reused.
#[allow(clippy::too_many_arguments)]
pub fn collect_cell(
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    method: Method,
    station: &StationId,
    r: u32,
    p: u32,
    test_days: &[Day],
) -> Result<StationCellSample, EvalError> {
    let grid = store.grid();
    let plan: Option<RoutePlan> = match method {
        Method::Dpp => None,
        Method::Bktr | Method::Intr => Some(plan_route(graph, station, r, p)?),
    };
    let mut sample = StationCellSample::default();
    for &day in test_days {
        for interval in 0..grid.intervals_per_day() {
            let at = Timestamp::new(day, interval);
            let target_ts = at.offset(i64::from(p), grid);
            let Some(actual) = store.value(station, target_ts) else {
                sample.skipped += 1;
                continue;
            };
            let forecast = match (method, &plan) {
                (Method::Dpp, _) => predict_dpp(profiles, station, at, p, grid),
                (Method::Bktr, Some(plan)) => predict_bktr_planned(plan, store, profiles, at),
                (Method::Intr, Some(plan)) => {
                    predict_intr_planned(plan, graph, store, profiles, at)
                }
                _ => unreachable!("plan exists for graph methods"),
            };
            match forecast {
                Ok(f) => sample.pairs.push((f.value, actual)),
                Err(e) if e.is_missing_data() => sample.skipped += 1,
                Err(e) => return Err(e.into()),
            }
        }
    }
    Ok(sample)
}

/// Metrics over collected pairs; `None` when no pair was collected.
pub fn summarize_pairs(pairs: &[(f64, f64)]) -> Option<CellMetrics> {
    if pairs.is_empty() {
        return None;
    }
    let preds: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
    let actuals: Vec<f64> = pairs.iter().map(|(_, a)| *a).collect();
    let r2 = match r_squared(&preds, &actuals) {
        Ok(v) => Some(v),
        Err(MetricError::ConstantActual) => None,
        Err(_) => unreachable!("lengths match and pairs are non-empty"),
    };
    Some(CellMetrics {
        rmse: rmse(&preds, &actuals).expect("non-empty"),
        r2,
        smape: smape(&preds, &actuals).expect("non-empty"),
        n: pairs.len(),
    })
}

fn quantile(sorted: &[f64], fraction: f64) -> f64 {
    let position = fraction * (sorted.len() - 1) as f64;
    let lower = libm::floor(position) as usize;
    let upper = libm::ceil(position) as usize;
    let weight = position - lower as f64;
    sorted[lower] * (1.0 - weight) + sorted[upper] * weight
}

/// Five-number summary of absolute errors for boxplot emission.
pub fn boxplot_stats(pairs: &[(f64, f64)]) -> Option<BoxplotStats> {
    if pairs.is_empty() {
        return None;
    }
    let mut errors: Vec<f64> = pairs.iter().map(|(p, a)| libm::fabs(p - a)).collect();
    errors.sort_by(|a, b| a.total_cmp(b));
    let q1 = quantile(&errors, 0.25);
    let median = quantile(&errors, 0.5);
    let q3 = quantile(&errors, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let lo_whisker = *errors
        .iter()
        .find(|e| **e >= lo_fence)
        .expect("q1 is above the fence");
    let hi_whisker = *errors
        .iter()
        .rev()
        .find(|e| **e <= hi_fence)
        .expect("q3 is below the fence");
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    Some(BoxplotStats {
        q1,
        median,
        q3,
        lo_whisker,
        hi_whisker,
        mean,
    })
}

/// The stations a (r, p) cell evaluates: the feasible targets, optionally
/// intersected with the plan's station set. The same restriction applies to
/// every method so the comparison stays like for like.
pub fn cell_stations(
    graph: &MotorwayGraph,
    plan: &EvaluationPlan,
    r: u32,
    p: u32,
) -> Vec<StationId> {
    let feasible = feasible_targets(graph, r, p);
    feasible
        .into_iter()
        .filter(|s| plan.stations.as_ref().is_none_or(|set| set.contains(s)))
        .collect()
}

/// Evaluate every requested method over every feasible station and horizon
/// combination. Infeasible (station, r, p) cells are absent from the report,
/// never zero-filled.
pub fn run_evaluation(
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    plan: &EvaluationPlan,
) -> Result<MetricsReport, EvalError> {
    plan.validate()?;
    let mut report = MetricsReport::default();
    let mut any_feasible = false;

    for &method in &plan.methods {
        for &r in &plan.r_values {
            for &p in &plan.p_values {
                let stations = cell_stations(graph, plan, r, p);
                any_feasible |= !stations.is_empty();
                let mut pooled: Vec<(f64, f64)> = Vec::new();
                let mut coverage = Coverage::default();
                for station in &stations {
                    let sample = collect_cell(
                        graph,
                        store,
                        profiles,
                        method,
                        station,
                        r,
                        p,
                        &plan.test_days,
                    )?;
                    coverage.skipped += sample.skipped;
                    if let Some(metrics) = summarize_pairs(&sample.pairs) {
                        report
                            .cells
                            .entry(method)
                            .or_default()
                            .entry(station.clone())
                            .or_default()
                            .insert((r, p), metrics);
                        report.boxplot.push(BoxplotRow {
                            method,
                            station: station.clone(),
                            r,
                            p,
                            stats: boxplot_stats(&sample.pairs).expect("non-empty"),
                        });
                        coverage.predicted += sample.pairs.len();
                        pooled.extend_from_slice(&sample.pairs);
                    }
                }
                if let Some(aggregate) = summarize_pairs(&pooled) {
                    report
                        .aggregates
                        .entry(method)
                        .or_default()
                        .insert((r, p), aggregate);
                }
                report
                    .coverage
                    .entry(method)
                    .or_default()
                    .insert((r, p), coverage);
            }
        }
    }

    if !any_feasible {
        return Err(EvalError::NoFeasibleStations);
    }
    Ok(report)
}
