//! Every output file round-trips through its reader without loss.

use flowcast_cli::formats::{
    read_flows, read_masks, read_profiles, read_topology, write_flows, write_masks, write_profiles,
    write_topology,
};
use flowcast_core::cleaning::{Flag, OutlierMask};
use flowcast_core::flowdata::{
    compute_daily_profile, Day, FlowSeries, FlowStore, ProfileSet, TimeGrid,
};
use flowcast_core::graph::{build_graph, StationId};
use flowcast_core::simulator::{simulate, ArrivalMode, DemandPattern, Scenario};
use flowcast_core::synthetic::chain_topology;

fn sid(s: &str) -> StationId {
    StationId::new(s).unwrap()
}

#[test]
fn topology_round_trips() {
    let topo = chain_topology(10, 2750.5, &[2, 5], &[3], 612.25);
    let dir = tempfile::tempdir().unwrap();
    let stations = dir.path().join("stations.csv");
    let edges = dir.path().join("edges.csv");
    write_topology(&topo, &stations, &edges).unwrap();
    let back = read_topology(&stations, &edges).unwrap();
    assert_eq!(topo, back);
}

#[test]
fn simulator_export_reingests_exactly() {
    // Thirty days of noisy stochastic output, including fractional counts.
    let topo = chain_topology(6, 3000.0, &[2], &[4], 700.0);
    let graph = build_graph(&topo, 25.0, 180).unwrap();
    let mut scenario = Scenario::new(Day(17167), 30, 99, ArrivalMode::Poisson);
    scenario
        .demand
        .insert(graph.head().clone(), DemandPattern::uniform(vec![5.0; 480]));
    scenario
        .demand
        .insert(sid("04E"), DemandPattern::uniform(vec![2.0; 480]));
    scenario.exit_probs.insert(sid("02X"), 0.3);
    scenario.noise_sigma = 1.25;
    let (store, _) = simulate(&graph, &scenario).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flows.csv");
    write_flows(&store, &path).unwrap();
    let back = read_flows(&path, *store.grid()).unwrap();
    assert_eq!(store, back);
}

#[test]
fn flows_with_missing_values_round_trip() {
    let grid = TimeGrid::standard();
    let mut store = FlowStore::new(grid);
    let mut counts: Vec<Option<f64>> = (0..480).map(|i| Some(i as f64 * 0.5)).collect();
    counts[13] = None;
    counts[479] = None;
    store
        .insert_series(FlowSeries::new(sid("01A"), Day(0), counts, &grid).unwrap())
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flows.csv");
    write_flows(&store, &path).unwrap();
    let back = read_flows(&path, grid).unwrap();
    assert_eq!(store, back);
}

#[test]
fn masks_round_trip() {
    let grid = TimeGrid::standard();
    let mut flags = vec![Flag::Clean; 480];
    flags[100] = Flag::Outlier;
    flags[101] = Flag::Missing;
    let masks = vec![
        OutlierMask {
            station: sid("05A"),
            day: Day(10),
            flags: flags.clone(),
        },
        OutlierMask {
            station: sid("05A"),
            day: Day(11),
            flags,
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mask.csv");
    write_masks(&masks, &path).unwrap();
    let back = read_masks(&path, &grid).unwrap();
    assert_eq!(masks, back);
}

#[test]
fn profiles_round_trip() {
    let grid = TimeGrid::standard();
    let mut store = FlowStore::new(grid);
    for day in 0..14 {
        let counts = (0..480)
            .map(|i| Some((i % 37) as f64 + day as f64))
            .collect();
        store
            .insert_series(FlowSeries::new(sid("09A"), Day(day), counts, &grid).unwrap())
            .unwrap();
    }
    let days: Vec<Day> = (0..14).map(Day).collect();
    let mut profiles = ProfileSet::new();
    profiles.insert(
        sid("09A"),
        compute_daily_profile(&store, &sid("09A"), &days).unwrap(),
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profiles.csv");
    write_profiles(&profiles, &path).unwrap();
    let back = read_profiles(&path, &grid).unwrap();
    assert_eq!(profiles, back);
}

#[test]
fn malformed_rows_are_reported_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flows.csv");
    std::fs::write(
        &path,
        "station_id,date,interval_index,count\n01A,2017-10-02,480,5\n",
    )
    .unwrap();
    let err = read_flows(&path, TimeGrid::standard()).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("flows.csv:2"), "{message}");
    assert!(message.contains("480"), "{message}");

    std::fs::write(
        &path,
        "station_id,date,interval_index,count\n01A,2017-10-02,3,5\n01A,2017-10-02,3,6\n",
    )
    .unwrap();
    let err = read_flows(&path, TimeGrid::standard()).unwrap_err();
    assert!(err.to_string().contains("duplicate"), "{err}");

    std::fs::write(
        &path,
        "station_id,date,interval_index,count\n01A,2017-99-02,3,5\n",
    )
    .unwrap();
    assert!(read_flows(&path, TimeGrid::standard()).is_err());
}
