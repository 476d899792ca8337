//! Acceptance suite: one test per criterion, each ending in a printed
//! PASS line. Tolerances are pinned in the assertions themselves.
//!
//! The criteria rest on oracle equivalence against the vehicle-level
//! simulator, exact conservation arithmetic, and directional reproduction of
//! the expected method orderings on perturbed-demand scenarios.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use flowcast_core::cleaning::{detect_outliers, impute, CleaningConfig, Flag};
use flowcast_core::eval::{
    collect_cell, r_squared, rmse, run_evaluation, smape, summarize_pairs, EvaluationPlan,
};
use flowcast_core::flowdata::{
    compute_daily_profile, Day, FlowSeries, FlowStore, ProfileSet, TimeGrid, Timestamp,
};
use flowcast_core::graph::{build_graph, MotorwayGraph, StationId};
use flowcast_core::predictors::{feasible_targets, Method};
use flowcast_core::simulator::{
    inject_anomalies, simulate, AnomalyItem, AnomalyKind, AnomalySpec, ArrivalMode, DemandPattern,
    Scenario, SimulationTruth,
};
use flowcast_core::synthetic::{
    chain_topology, chain_topology_mixed, single_peak_curve, two_peak_curve,
};
use rand::{Rng, SeedableRng};

fn sid(s: &str) -> StationId {
    StationId::new(s).unwrap()
}

fn monday() -> Day {
    Day::from_civil(2017, 10, 2)
}

fn all_profiles(graph: &MotorwayGraph, store: &FlowStore, train: &[Day]) -> ProfileSet {
    graph
        .stations()
        .map(|(id, _)| (id.clone(), compute_daily_profile(store, id, train).unwrap()))
        .collect()
}

// ---------------------------------------------------------------------------
// Criterion 1: oracle equivalence, exact, under 10 seconds
// ---------------------------------------------------------------------------

/// 75 mainline stations exactly one travel-interval apart, 20 entries and
/// 18 exits with one-interval ramps.
fn aligned_large_graph() -> MotorwayGraph {
    let step = 4500.0;
    let entries: Vec<usize> = (0..20).map(|k| 2 + 3 * k).collect();
    let exits: Vec<usize> = (0..18).map(|k| 4 + 3 * k).collect();
    build_graph(&chain_topology(75, step, &entries, &exits, step), 25.0, 180).unwrap()
}

#[test]
fn criterion_oracle_equivalence_exact() {
    let started = Instant::now();
    let graph = aligned_large_graph();
    let mut scenario = Scenario::new(monday(), 9, 1, ArrivalMode::Deterministic);
    scenario.demand.insert(
        graph.head().clone(),
        DemandPattern::uniform(vec![10.0; 480]),
    );
    for (id, kind) in graph.stations() {
        if kind == flowcast_core::StationKind::Entry {
            scenario
                .demand
                .insert(id.clone(), DemandPattern::uniform(vec![2.0; 480]));
        }
        if kind == flowcast_core::StationKind::Exit {
            scenario.exit_probs.insert(id.clone(), 0.1);
        }
    }
    let (store, _) = simulate(&graph, &scenario).unwrap();
    // Day 0 is burn-in; train on the seven following days; test the last.
    let train: Vec<Day> = (1..8).map(|d| monday().offset(d)).collect();
    let test = [monday().offset(8)];
    let profiles = all_profiles(&graph, &store, &train);

    let mut cells = 0usize;
    for r in 1..=5u32 {
        for p in 1..=5u32 {
            for station in feasible_targets(&graph, r, p) {
                for method in [Method::Bktr, Method::Intr] {
                    let sample =
                        collect_cell(&graph, &store, &profiles, method, &station, r, p, &test)
                            .unwrap();
                    let metrics = summarize_pairs(&sample.pairs).unwrap();
                    assert_eq!(
                        metrics.rmse, 0.0,
                        "{method} {station} r={r} p={p}: rmse {} (not exact)",
                        metrics.rmse
                    );
                    assert_eq!(metrics.smape, 0.0, "{method} {station} r={r} p={p}");
                    cells += 1;
                }
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(cells > 25 * 70 * 2 / 2, "only {cells} cells checked");
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "oracle sweep took {elapsed:?}, budget is 10 s"
    );
    println!(
        "PASS: oracle equivalence exact (bktr & intr, rmse=smape=0 on {cells} cells, {elapsed:?})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: conservation suite
// ---------------------------------------------------------------------------

/// Daily `F(up) + entries - exits - F(down)` imbalance, and the straddling
/// vehicle count that bounds it, reconstructed from the vehicle log.
fn segment_imbalance(
    graph: &MotorwayGraph,
    store: &FlowStore,
    truth: &SimulationTruth,
    scenario: &Scenario,
    upstream: &StationId,
    downstream: &StationId,
) -> Vec<(f64, f64)> {
    let days = scenario.days as usize;
    let ipd = store.grid().intervals_per_day();
    let entries: Vec<StationId> = graph
        .entries_into(downstream)
        .iter()
        .map(|r| r.station.clone())
        .collect();
    let exits: Vec<StationId> = graph
        .exits_from(upstream)
        .iter()
        .map(|r| r.station.clone())
        .collect();
    let day_sum = |station: &StationId, day: usize| -> f64 {
        (0..ipd)
            .map(|i| {
                store
                    .value(
                        station,
                        Timestamp::new(scenario.start_day.offset(day as i64), i),
                    )
                    .unwrap()
            })
            .sum()
    };

    let mut ledger: Vec<(f64, f64)> = (0..days)
        .map(|day| {
            let mut lhs = day_sum(upstream, day);
            for e in &entries {
                lhs += day_sum(e, day);
            }
            for x in &exits {
                lhs -= day_sum(x, day);
            }
            (lhs - day_sum(downstream, day), 0.0)
        })
        .collect();

    let horizon = f64::from(scenario.days) * 86_400.0;
    for vehicle in &truth.vehicles {
        let origin = &truth.stations[vehicle.origin as usize];
        let in_time = truth
            .crossing_time(graph, vehicle, upstream)
            .or_else(|| entries.contains(origin).then_some(vehicle.entry_time));
        let Some(in_time) = in_time else { continue };
        if in_time >= horizon {
            continue;
        }
        let out_time = match vehicle.exit_taken {
            Some(x) if exits.contains(&truth.stations[x as usize]) => truth
                .crossing_time(graph, vehicle, &truth.stations[x as usize])
                .unwrap(),
            _ => match truth.crossing_time(graph, vehicle, downstream) {
                Some(t) => t,
                None => continue,
            },
        };
        let in_day = (in_time / 86_400.0).floor() as usize;
        let out_day = (out_time.min(horizon) / 86_400.0).floor() as usize;
        if in_day != out_day {
            ledger[in_day].1 += 1.0;
            if out_day < days {
                ledger[out_day].1 += 1.0;
            }
        }
    }
    ledger
}

#[test]
fn criterion_conservation_suite() {
    // Fifteen aligned stations with entries at 12A/09A/06A and exits off
    // 11A/07A: adjacent pairs cover passing, merging and exiting layouts.
    let graph = build_graph(
        &chain_topology(15, 4500.0, &[3, 6, 9], &[4, 8], 4500.0),
        25.0,
        180,
    )
    .unwrap();
    let mut scenario = Scenario::new(monday(), 3, 5150, ArrivalMode::Poisson);
    scenario
        .demand
        .insert(graph.head().clone(), DemandPattern::uniform(vec![8.0; 480]));
    for entry in ["12E", "09E", "06E"] {
        scenario
            .demand
            .insert(sid(entry), DemandPattern::uniform(vec![3.0; 480]));
    }
    scenario.exit_probs.insert(sid("11X"), 0.2);
    scenario.exit_probs.insert(sid("07X"), 0.25);
    let (store, truth) = simulate(&graph, &scenario).unwrap();

    // All three configurations are present among adjacent pairs.
    assert!(graph.entries_into(&sid("12A")).len() == 1); // merging
    assert!(graph.exits_from(&sid("11A")).len() == 1); // exiting
    assert!(graph.entries_into(&sid("14A")).is_empty() && graph.exits_from(&sid("15A")).is_empty()); // passing

    let mainline = graph.mainline().to_vec();
    let mut checked = 0usize;
    for pair in mainline.windows(2) {
        let ledger = segment_imbalance(&graph, &store, &truth, &scenario, &pair[0], &pair[1]);
        for (day, (imbalance, bound)) in ledger.iter().enumerate() {
            assert_eq!(imbalance.fract(), 0.0, "non-integer imbalance");
            assert!(
                imbalance.abs() <= *bound,
                "{} -> {} day {day}: |{imbalance}| > B = {bound}",
                pair[0],
                pair[1]
            );
            checked += 1;
        }
    }
    println!(
        "PASS: conservation suite ({checked} day-segment ledgers balance within the \
         in-transit correction)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: directional reproduction of the method orderings
// ---------------------------------------------------------------------------

/// Perturbed-demand scenario on a 24-station chain: per-day demand
/// multipliers, detector noise, and platooned arrivals crossing detectors in
/// the last 40% of each interval. Entry ramps sit 0.7 intervals before their
/// merge, so the backtracked cohort aligns exactly with whole recorded
/// intervals while the interpolating blend smears across two — the
/// uniform-arrival assumption it embodies does not hold here, which is what
/// separates the two methods on real traffic as well.
fn perturbed_world(seed: u64) -> (MotorwayGraph, Scenario) {
    let entries: Vec<(usize, f64)> = [3, 6, 9, 12, 15].iter().map(|i| (*i, 3150.0)).collect();
    let exits: Vec<(usize, f64)> = [4, 8, 11, 14].iter().map(|i| (*i, 4500.0)).collect();
    let graph = build_graph(
        &chain_topology_mixed(18, 4500.0, &entries, &exits),
        25.0,
        180,
    )
    .unwrap();

    // Four training weeks keep the day-of-week profiles reasonably sharp.
    let mut scenario = Scenario::new(monday(), 30, seed, ArrivalMode::Poisson);
    scenario.demand.insert(
        graph.head().clone(),
        DemandPattern {
            weekday: two_peak_curve(480, 8.0, 32.0),
            weekend: single_peak_curve(480, 6.0, 20.0),
        },
    );
    for (id, kind) in graph.stations() {
        if kind == flowcast_core::StationKind::Entry {
            scenario.demand.insert(
                id.clone(),
                DemandPattern {
                    weekday: two_peak_curve(480, 8.0, 16.0),
                    weekend: single_peak_curve(480, 6.0, 10.0),
                },
            );
        }
        if kind == flowcast_core::StationKind::Exit {
            scenario.exit_probs.insert(id.clone(), 0.05);
        }
    }
    scenario.noise_sigma = 0.5;
    scenario.daily_multiplier_sigma = 0.3;
    scenario.arrival_spread = flowcast_core::simulator::ArrivalSpread {
        offset_frac: 0.6,
        width_frac: 0.4,
    };
    (graph, scenario)
}

#[test]
fn criterion_directional_orderings() {
    let seeds: Vec<u64> = (0..10).map(|s| 9_000 + s).collect();
    let mut rmse_order_holds = 0usize;
    let mut smape_trend_holds = 0usize;

    for &seed in &seeds {
        let (graph, scenario) = perturbed_world(seed);
        let (store, _) = simulate(&graph, &scenario).unwrap();
        let train: Vec<Day> = (1..29).map(|d| monday().offset(d)).collect();
        let profiles = all_profiles(&graph, &store, &train);
        let plan = EvaluationPlan {
            train_days: train,
            test_days: vec![monday().offset(29)],
            stations: None,
            methods: Method::ALL.into_iter().collect(),
            r_values: vec![1, 2, 3, 4, 5],
            p_values: vec![1, 2, 3, 4, 5],
        };
        let report = run_evaluation(&graph, &store, &profiles, &plan).unwrap();

        let agg = |m: Method, r: u32, p: u32| report.aggregate(m, r, p).unwrap();
        // Aggregate at p = 1 pools every residual across stations and past
        // horizons, so no per-method horizon selection enters the comparison.
        let pooled_rmse = |m: Method| {
            let (sq_sum, n) = (1..=5u32)
                .map(|r| agg(m, r, 1))
                .fold((0.0, 0usize), |(sq, n), cell| {
                    (sq + cell.rmse * cell.rmse * cell.n as f64, n + cell.n)
                });
            (sq_sum / n as f64).sqrt()
        };
        let (bktr, intr, dpp) = (
            pooled_rmse(Method::Bktr),
            pooled_rmse(Method::Intr),
            pooled_rmse(Method::Dpp),
        );
        if bktr < intr && intr <= dpp {
            rmse_order_holds += 1;
        }

        let bktr_smape: Vec<f64> = (1..=5).map(|p| agg(Method::Bktr, 1, p).smape).collect();
        let inversions = bktr_smape.windows(2).filter(|w| w[1] < w[0]).count();
        let advantage_p1 = agg(Method::Dpp, 1, 1).smape - bktr_smape[0];
        let advantage_p5 = agg(Method::Dpp, 1, 5).smape - bktr_smape[4];
        if inversions <= 1 && advantage_p5 < advantage_p1 {
            smape_trend_holds += 1;
        }
        eprintln!(
            "seed {seed}: pooled rmse bktr/intr/dpp = {bktr:.2}/{intr:.2}/{dpp:.2}, \
             bktr smape by p = {bktr_smape:.2?}, advantage {advantage_p1:.2} -> {advantage_p5:.2}"
        );
    }

    assert!(
        rmse_order_holds >= 8,
        "rmse ordering BKTR < INTR <= DPP held in only {rmse_order_holds}/10 seeds"
    );
    assert!(
        smape_trend_holds >= 8,
        "smape trend held in only {smape_trend_holds}/10 seeds"
    );
    println!(
        "PASS: directional orderings (rmse order {rmse_order_holds}/10, smape trend \
         {smape_trend_holds}/10, both >= 8/10)"
    );
}

// ---------------------------------------------------------------------------
// Criterion 4: interpolation identities
// ---------------------------------------------------------------------------

#[test]
fn criterion_interpolation_identities() {
    let grid = TimeGrid::standard();
    let mut store = FlowStore::new(grid);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(44);
    let counts: Vec<Option<f64>> = (0..480).map(|_| Some(rng.gen_range(0.0..900.0))).collect();
    let values: Vec<f64> = counts.iter().map(|v| v.unwrap()).collect();
    store
        .insert_series(FlowSeries::new(sid("22A"), Day(0), counts, &grid).unwrap())
        .unwrap();

    for slot in 0..479u32 {
        let at = Timestamp::new(Day(0), slot);
        let a = values[slot as usize];
        let b = values[slot as usize + 1];
        // Degenerate overlaps return the recorded flows exactly.
        assert_eq!(store.interpolate(&sid("22A"), at, 180.0, 0.0).unwrap(), a);
        assert_eq!(store.interpolate(&sid("22A"), at, 0.0, 180.0).unwrap(), b);
        // The midpoint matches the arithmetic mean within 1e-12 relative.
        let mid = store.interpolate(&sid("22A"), at, 90.0, 90.0).unwrap();
        let mean = 0.5 * (a + b);
        assert!(
            (mid - mean).abs() <= 1e-12 * mean.abs().max(1.0),
            "slot {slot}: {mid} vs {mean}"
        );
    }
    println!("PASS: interpolation identities (degenerate exact, midpoint within 1e-12)");
}

// ---------------------------------------------------------------------------
// Criterion 5: metric oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_metric_oracle() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17441);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1e-300);
    for case in 0..1000 {
        let n = rng.gen_range(2..64);
        let pred: Vec<f64> = (0..n).map(|_| rng.gen_range(-100.0..2500.0)).collect();
        let actual: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2500.0)).collect();

        // Independent naive recomputations.
        let naive_rmse = {
            let s: f64 = (0..n).map(|i| (pred[i] - actual[i]).powi(2)).sum();
            (s / n as f64).sqrt()
        };
        let naive_r2 = {
            let mean = actual.iter().sum::<f64>() / n as f64;
            let ss_res: f64 = (0..n).map(|i| (pred[i] - actual[i]).powi(2)).sum();
            let ss_tot: f64 = actual.iter().map(|a| (a - mean).powi(2)).sum();
            1.0 - ss_res / ss_tot
        };
        let naive_smape = {
            let s: f64 = (0..n)
                .map(|i| {
                    let d = pred[i].abs() + actual[i].abs();
                    if d == 0.0 {
                        0.0
                    } else {
                        (pred[i] - actual[i]).abs() / d
                    }
                })
                .sum();
            100.0 * s / n as f64
        };

        assert!(
            close(rmse(&pred, &actual).unwrap(), naive_rmse),
            "case {case}"
        );
        assert!(
            close(r_squared(&pred, &actual).unwrap(), naive_r2),
            "case {case}"
        );
        let s = smape(&pred, &actual).unwrap();
        assert!(close(s, naive_smape), "case {case}");
        assert!((0.0..=100.0).contains(&s), "case {case}: smape {s}");
        assert_eq!(r_squared(&actual, &actual).unwrap(), 1.0);
    }
    println!("PASS: metric oracle (1000 random pairs within 1e-12, smape bounded, r2 exact)");
}

// ---------------------------------------------------------------------------
// Criterion 6: cleaning recall, precision and imputation error
// ---------------------------------------------------------------------------

#[test]
fn criterion_cleaning_quality() {
    let graph = build_graph(&chain_topology(3, 3000.0, &[], &[], 500.0), 25.0, 180).unwrap();
    let days = 9 * 7;
    let mut scenario = Scenario::new(monday(), days, 77, ArrivalMode::Deterministic);
    scenario.demand.insert(
        graph.head().clone(),
        DemandPattern {
            weekday: two_peak_curve(480, 40.0, 300.0),
            weekend: single_peak_curve(480, 40.0, 180.0),
        },
    );
    scenario.noise_sigma = 3.0;
    let (store, _) = simulate(&graph, &scenario).unwrap();

    let head = graph.head().clone();
    let target_day = monday().offset(i64::from(days) - 3);
    let train: Vec<Day> = (0..i64::from(days) - 7)
        .map(|d| monday().offset(d))
        .collect();
    let profile = compute_daily_profile(&store, &head, &train).unwrap();

    // Ten drop-outs scattered through the afternoon plus two spikes.
    let dropouts = [240u32, 241, 242, 250, 255, 260, 270, 285, 300, 330];
    let spikes = [160u32, 168];
    let mut items: Vec<AnomalyItem> = dropouts
        .iter()
        .map(|slot| AnomalyItem {
            station: head.clone(),
            day: target_day,
            from_interval: *slot,
            to_interval: slot + 1,
            kind: AnomalyKind::Dropout,
            magnitude: 1.0,
        })
        .collect();
    items.extend(spikes.iter().map(|slot| AnomalyItem {
        station: head.clone(),
        day: target_day,
        from_interval: *slot,
        to_interval: slot + 1,
        kind: AnomalyKind::Spike,
        magnitude: 3.0,
    }));
    let injected: BTreeSet<u32> = dropouts.iter().chain(spikes.iter()).copied().collect();
    let (corrupted_store, _) = inject_anomalies(&store, &AnomalySpec { items }).unwrap();

    let grid = *store.grid();
    let corrupted = FlowSeries::new(
        head.clone(),
        target_day,
        corrupted_store.series(&head, target_day).unwrap().to_vec(),
        &grid,
    )
    .unwrap();
    let cfg = CleaningConfig::default();
    let mask = detect_outliers(&corrupted, &profile, &cfg).unwrap();

    let detected: BTreeSet<u32> = mask
        .flags
        .iter()
        .enumerate()
        .filter(|(_, f)| **f == Flag::Outlier)
        .map(|(i, _)| i as u32)
        .collect();
    let true_positives = detected.intersection(&injected).count() as f64;
    let recall = true_positives / injected.len() as f64;
    let precision = true_positives / detected.len().max(1) as f64;
    assert!(recall >= 0.9, "recall {recall:.3} < 0.9 ({detected:?})");
    assert!(
        precision >= 0.8,
        "precision {precision:.3} < 0.8 ({detected:?})"
    );

    let repaired = impute(&corrupted, &mask, &profile, &cfg).unwrap();
    let clean = store.series(&head, target_day).unwrap();
    let flagged: Vec<usize> = mask.flagged().collect();
    let rmse_at = |counts: &[Option<f64>]| {
        let s: f64 = flagged
            .iter()
            .map(|&i| {
                let t = clean[i].unwrap();
                let v = counts[i].unwrap();
                (v - t) * (v - t)
            })
            .sum();
        (s / flagged.len() as f64).sqrt()
    };
    let before = rmse_at(corrupted.counts());
    let after = rmse_at(repaired.counts());
    assert!(
        after <= 0.5 * before,
        "imputation rmse {after:.2} vs corrupted {before:.2}"
    );
    println!(
        "PASS: cleaning (recall {recall:.2} >= 0.9, precision {precision:.2} >= 0.8, \
         imputation rmse {after:.1} <= 50% of {before:.1})"
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: feasibility monotonicity
// ---------------------------------------------------------------------------

#[test]
fn criterion_feasibility_monotonicity() {
    let graphs = [
        build_graph(&flowcast_core::synthetic::large_motorway_topology(), 25.0, 180).unwrap(),
        build_graph(
            &chain_topology(30, 2000.0, &[5, 10], &[7], 400.0),
            25.0,
            180,
        )
        .unwrap(),
        build_graph(
            &chain_topology(50, 4400.0, &[9, 20, 33], &[14, 40], 900.0),
            25.0,
            180,
        )
        .unwrap(),
        aligned_large_graph(),
    ];
    for (gi, graph) in graphs.iter().enumerate() {
        let mut by_total: Vec<(u32, usize)> = Vec::new();
        for r in 1..=5u32 {
            for p in 1..=5u32 {
                by_total.push((r + p, feasible_targets(graph, r, p).len()));
            }
        }
        by_total.sort();
        for w in by_total.windows(2) {
            assert!(
                w[1].1 <= w[0].1 || w[1].0 == w[0].0,
                "graph {gi}: |feasible| grew from {:?} to {:?}",
                w[0],
                w[1]
            );
        }
        // Same total horizon, same feasible set size.
        for w in by_total.windows(2) {
            if w[0].0 == w[1].0 {
                assert_eq!(w[0].1, w[1].1, "graph {gi}");
            }
        }
    }
    println!("PASS: feasibility monotonicity (|feasible| non-increasing in r+p on 4 graphs)");
}

// ---------------------------------------------------------------------------
// Criterion 8: seeded CLI reproducibility
// ---------------------------------------------------------------------------

fn flowcast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flowcast"))
}

fn run_checked(cmd: &mut Command) {
    let out = cmd.output().expect("spawn flowcast");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_fixture(root: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let stations = root.join("stations.csv");
    let edges = root.join("edges.csv");
    let topo = chain_topology(12, 4500.0, &[3, 6], &[5, 9], 3000.0);
    flowcast_cli::formats::write_topology(&topo, &stations, &edges).unwrap();
    let scenario = root.join("scenario.toml");
    fs::write(
        &scenario,
        r#"
days = 10
start-date = "2017-10-02"
seed = 7
mode = "poisson"
noise-sigma = 1.5
daily-multiplier-sigma = 0.1

[demand.head]
weekday = { base = 6.0, peaks = [{ centre-hour = 8.0, height = 12.0, width-hours = 1.5 }] }
weekend = { base = 5.0, peaks = [{ centre-hour = 13.0, height = 6.0, width-hours = 2.5 }] }

[demand.entries]
weekday = { base = 2.0 }
weekend = { base = 1.5 }

[exits]
default-prob = 0.2
"#,
    )
    .unwrap();
    (stations, edges, scenario)
}

#[test]
fn criterion_seeded_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let (stations, edges, scenario) = write_fixture(root);

    let simulate_into = |out: &Path| {
        run_checked(
            flowcast()
                .arg("simulate")
                .arg("--graph-stations")
                .arg(&stations)
                .arg("--graph-edges")
                .arg(&edges)
                .arg("--scenario")
                .arg(&scenario)
                .arg("--out")
                .arg(out),
        );
    };
    simulate_into(&root.join("sim_a"));
    simulate_into(&root.join("sim_b"));
    let flows_a = fs::read(root.join("sim_a/flows.csv")).unwrap();
    let flows_b = fs::read(root.join("sim_b/flows.csv")).unwrap();
    assert_eq!(flows_a, flows_b, "simulate: same seed, different bytes");

    let evaluate_into = |out: &Path, jobs: &str| {
        run_checked(
            flowcast()
                .arg("evaluate")
                .arg("--graph-stations")
                .arg(&stations)
                .arg("--graph-edges")
                .arg(&edges)
                .arg("--flows")
                .arg(root.join("sim_a/flows.csv"))
                .arg("--train")
                .arg("2017-10-03..2017-10-09")
                .arg("--test")
                .arg("2017-10-10..2017-10-11")
                .arg("--r")
                .arg("1..3")
                .arg("--p")
                .arg("1..3")
                .arg("--jobs")
                .arg(jobs)
                .arg("--out")
                .arg(out),
        );
    };
    evaluate_into(&root.join("eval_1"), "1");
    evaluate_into(&root.join("eval_n"), "4");
    evaluate_into(&root.join("eval_again"), "4");
    for file in ["report.json", "boxplot.csv"] {
        let one = fs::read(root.join("eval_1").join(file)).unwrap();
        let many = fs::read(root.join("eval_n").join(file)).unwrap();
        let again = fs::read(root.join("eval_again").join(file)).unwrap();
        assert_eq!(one, many, "{file}: --jobs 1 vs --jobs 4 differ");
        assert_eq!(many, again, "{file}: repeated run differs");
    }
    println!(
        "PASS: reproducibility (simulate byte-identical across runs; evaluate byte-identical \
         across runs and --jobs 1 vs 4)"
    );
}
