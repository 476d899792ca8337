//! Multi-worker evaluation driver.
//!
//! Stations within each (method, r, p) cell are independent, so they are
//! chunked across scoped threads; assembly then replays the exact station
//! order of the serial path, which keeps the report — and therefore every
//! output byte — identical for any worker count.

use std::thread;

use flowcast_core::eval::{
    boxplot_stats, cell_stations, collect_cell, summarize_pairs, BoxplotRow, Coverage, EvalError,
    EvaluationPlan, MetricsReport, StationCellSample,
};
use flowcast_core::flowdata::{FlowStore, ProfileSet};
use flowcast_core::graph::{MotorwayGraph, StationId};

/// Equivalent to `flowcast_core::eval::run_evaluation`, fanning the station
/// loop out over `jobs` workers.
pub fn run_evaluation_parallel(
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    plan: &EvaluationPlan,
    jobs: usize,
) -> Result<MetricsReport, EvalError> {
    plan.validate()?;
    let jobs = jobs.max(1);
    let mut report = MetricsReport::default();
    let mut any_feasible = false;

    for &method in &plan.methods {
        for &r in &plan.r_values {
            for &p in &plan.p_values {
                let stations = cell_stations(graph, plan, r, p);
                any_feasible |= !stations.is_empty();
                let samples =
                    collect_all(graph, store, profiles, method, &stations, r, p, plan, jobs)?;

                let mut pooled: Vec<(f64, f64)> = Vec::new();
                let mut coverage = Coverage::default();
                for (station, sample) in stations.iter().zip(&samples) {
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

#[allow(clippy::too_many_arguments)]
fn collect_all(
    graph: &MotorwayGraph,
    store: &FlowStore,
    profiles: &ProfileSet,
    method: flowcast_core::predictors::Method,
    stations: &[StationId],
    r: u32,
    p: u32,
    plan: &EvaluationPlan,
    jobs: usize,
) -> Result<Vec<StationCellSample>, EvalError> {
    if jobs == 1 || stations.len() <= 1 {
        return stations
            .iter()
            .map(|s| collect_cell(graph, store, profiles, method, s, r, p, &plan.test_days))
            .collect();
    }
    let chunk_size = stations.len().div_ceil(jobs);
    let chunks: Vec<&[StationId]> = stations.chunks(chunk_size).collect();
    let mut results: Vec<Result<Vec<StationCellSample>, EvalError>> =
        Vec::with_capacity(chunks.len());
    thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|s| {
                            collect_cell(graph, store, profiles, method, s, r, p, &plan.test_days)
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        for handle in handles {
            results.push(handle.join().expect("evaluation worker panicked"));
        }
    });
    let mut all = Vec::with_capacity(stations.len());
    for chunk in results {
        all.extend(chunk?);
    }
    Ok(all)
}
