//! Profile recovery and outlier handling against simulator ground truth.

use flowcast_core::cleaning::{detect_outliers, impute, CleaningConfig, Flag};
use flowcast_core::flowdata::{compute_daily_profile, Day, FlowSeries, Timestamp};
use flowcast_core::graph::{build_graph, MotorwayGraph, StationId};
use flowcast_core::simulator::{
    inject_anomalies, simulate, AnomalyItem, AnomalyKind, AnomalySpec, ArrivalMode, DemandPattern,
    Scenario,
};
use flowcast_core::synthetic::{chain_topology, single_peak_curve, two_peak_curve};

fn sid(s: &str) -> StationId {
    StationId::new(s).unwrap()
}

fn small_graph() -> MotorwayGraph {
    build_graph(&chain_topology(3, 3000.0, &[], &[], 500.0), 25.0, 180).unwrap()
}

/// Twenty-six weeks of two-peak weekday / single-peak weekend demand with
/// additive detector noise.
fn seasonal_scenario(days: u32, noise: f64) -> Scenario {
    // Day(4) is a Monday.
    let mut scenario = Scenario::new(Day(4), days, 77, ArrivalMode::Deterministic);
    scenario.demand.insert(
        sid("03A"),
        DemandPattern {
            weekday: two_peak_curve(480, 40.0, 300.0),
            weekend: single_peak_curve(480, 40.0, 180.0),
        },
    );
    scenario.noise_sigma = noise;
    scenario
}

#[test]
fn profile_recovers_the_generating_curve() {
    let graph = small_graph();
    let days = 26 * 7;
    let scenario = seasonal_scenario(days, 3.0);
    let (store, _) = simulate(&graph, &scenario).unwrap();
    let train: Vec<Day> = (0..days as i64).map(|d| Day(4 + d)).collect();
    let head = sid("03A");
    let profile = compute_daily_profile(&store, &head, &train).unwrap();

    // Ground truth at the head is the rounded demand curve; the profile must
    // land within +-3 vehicles of it at every slot despite the noise.
    let weekday_truth: Vec<f64> = two_peak_curve(480, 40.0, 300.0)
        .iter()
        .map(|v| v.round())
        .collect();
    let weekend_truth: Vec<f64> = single_peak_curve(480, 40.0, 180.0)
        .iter()
        .map(|v| v.round())
        .collect();
    for dow in flowcast_core::DayOfWeek::ALL {
        let truth = if dow.is_weekend() {
            &weekend_truth
        } else {
            &weekday_truth
        };
        for slot in 0..480 {
            let got = profile.value(dow, slot);
            assert!(
                (got - truth[slot as usize]).abs() <= 3.0,
                "{} slot {slot}: profile {got} vs truth {}",
                dow.name(),
                truth[slot as usize]
            );
        }
    }
}

struct CorruptionBench {
    clean: FlowSeries,
    corrupted: FlowSeries,
    injected: Vec<usize>,
    profile: flowcast_core::flowdata::DailyProfile,
}

/// One day with ten injected drop-outs and two spikes, in the style of a
/// mid-day anomaly cluster next to a high peak.
fn corruption_bench() -> CorruptionBench {
    let graph = small_graph();
    let days = 9 * 7; // nine weeks: eight to train on, the last gets corrupted
    let scenario = seasonal_scenario(days, 3.0);
    let (store, _) = simulate(&graph, &scenario).unwrap();
    let head = sid("03A");
    let target_day = Day(4 + days as i64 - 3); // a Friday in the last week
    assert_eq!(target_day.day_of_week(), flowcast_core::DayOfWeek::Friday);
    let train: Vec<Day> = (0..days as i64 - 7).map(|d| Day(4 + d)).collect();
    let profile = compute_daily_profile(&store, &head, &train).unwrap();

    let dropouts = [240usize, 241, 242, 250, 255, 260, 270, 285, 300, 330];
    let spikes = [160usize, 168];
    let mut items: Vec<AnomalyItem> = dropouts
        .iter()
        .map(|slot| AnomalyItem {
            station: head.clone(),
            day: target_day,
            from_interval: *slot as u32,
            to_interval: *slot as u32 + 1,
            kind: AnomalyKind::Dropout,
            magnitude: 1.0,
        })
        .collect();
    items.extend(spikes.iter().map(|slot| AnomalyItem {
        station: head.clone(),
        day: target_day,
        from_interval: *slot as u32,
        to_interval: *slot as u32 + 1,
        kind: AnomalyKind::Spike,
        magnitude: 3.0,
    }));
    let (corrupted_store, masks) = inject_anomalies(&store, &AnomalySpec { items }).unwrap();
    assert_eq!(masks.len(), 1);

    let grid = *store.grid();
    let series_of = |s: &flowcast_core::flowdata::FlowStore| {
        FlowSeries::new(
            head.clone(),
            target_day,
            s.series(&head, target_day).unwrap().to_vec(),
            &grid,
        )
        .unwrap()
    };
    let mut injected: Vec<usize> = dropouts.iter().chain(spikes.iter()).copied().collect();
    injected.sort();
    CorruptionBench {
        clean: series_of(&store),
        corrupted: series_of(&corrupted_store),
        injected,
        profile,
    }
}

#[test]
fn detection_hits_injected_anomalies() {
    let bench = corruption_bench();
    let cfg = CleaningConfig::default();
    let mask = detect_outliers(&bench.corrupted, &bench.profile, &cfg).unwrap();
    let detected: Vec<usize> = mask
        .flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f == Flag::Outlier)
        .map(|(i, _)| i)
        .collect();

    let true_positives = detected
        .iter()
        .filter(|i| bench.injected.contains(i))
        .count();
    let recall = true_positives as f64 / bench.injected.len() as f64;
    let precision = true_positives as f64 / detected.len().max(1) as f64;
    assert!(recall >= 0.9, "recall {recall} (detected {detected:?})");
    assert!(
        precision >= 0.8,
        "precision {precision} (detected {detected:?})"
    );
}

#[test]
fn imputation_halves_the_error_at_flagged_slots() {
    let bench = corruption_bench();
    let cfg = CleaningConfig::default();
    let mask = detect_outliers(&bench.corrupted, &bench.profile, &cfg).unwrap();
    let repaired = impute(&bench.corrupted, &mask, &bench.profile, &cfg).unwrap();

    let flagged: Vec<usize> = mask.flagged().collect();
    assert!(!flagged.is_empty());
    let rmse_at = |series: &FlowSeries| {
        let sum: f64 = flagged
            .iter()
            .map(|&i| {
                let truth = bench.clean.counts()[i].unwrap();
                let value = series.counts()[i].unwrap();
                (value - truth) * (value - truth)
            })
            .sum();
        (sum / flagged.len() as f64).sqrt()
    };
    let before = rmse_at(&bench.corrupted);
    let after = rmse_at(&repaired);
    assert!(
        after <= 0.5 * before,
        "imputation rmse {after} vs corrupted {before}"
    );
    // Clean slots pass through untouched, and nothing goes negative.
    for (i, flag) in mask.flags.iter().enumerate() {
        if *flag == Flag::Clean {
            assert_eq!(repaired.counts()[i], bench.corrupted.counts()[i]);
        }
        assert!(repaired.counts()[i].unwrap_or(0.0) >= 0.0);
    }
}

#[test]
fn imputation_covers_missing_observations() {
    let bench = corruption_bench();
    let cfg = CleaningConfig::default();
    // Knock two observations out entirely.
    let mut counts = bench.corrupted.counts().to_vec();
    counts[100] = None;
    counts[101] = None;
    let grid = flowcast_core::TimeGrid::standard();
    let series = FlowSeries::new(
        bench.corrupted.station().clone(),
        bench.corrupted.day(),
        counts,
        &grid,
    )
    .unwrap();
    let mask = detect_outliers(&series, &bench.profile, &cfg).unwrap();
    assert_eq!(mask.flags[100], Flag::Missing);
    assert_eq!(mask.flags[101], Flag::Missing);
    let repaired = impute(&series, &mask, &bench.profile, &cfg).unwrap();
    assert!(repaired.counts()[100].is_some());
    assert!(repaired.counts()[101].is_some());
    let _ = Timestamp::new(Day(0), 0);
}
