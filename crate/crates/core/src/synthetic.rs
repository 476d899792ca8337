//! Synthetic motorway topologies and demand shapes for scenarios and tests.
//!
//! Station labels follow the motorway convention of numbering that decreases
//! downstream: the head of a 75-station chain is `75A` and the tail `01A`.
//! Entries and exits take the number of the mainline station they attach to,
//! with an `E` or `X` suffix.

use alloc::format;
use alloc::vec::Vec;

use crate::graph::{GraphEdge, Station, StationId, StationKind, TopologyInput};

fn sid(label: &str) -> StationId {
    StationId::new(label).expect("generated labels are valid")
}

pub fn mainline_label(number: usize) -> StationId {
    sid(&format!("{number:02}A"))
}

/// A single chain with uniform spacing and explicit ramp placements, each
/// ramp with its own length: `entries` and `exits` pair the 0-based mainline
/// index (from the head) with the ramp length in metres.
pub fn chain_topology_mixed(
    mainline_count: usize,
    spacing_m: f64,
    entries: &[(usize, f64)],
    exits: &[(usize, f64)],
) -> TopologyInput {
    let mut topo = TopologyInput::default();
    let label_number = |idx: usize| mainline_count - idx;
    for idx in 0..mainline_count {
        topo.stations.push(Station {
            id: mainline_label(label_number(idx)),
            kind: StationKind::Mainline,
        });
    }
    for idx in 0..mainline_count.saturating_sub(1) {
        topo.edges.push(GraphEdge {
            from: mainline_label(label_number(idx)),
            to: mainline_label(label_number(idx + 1)),
            length_m: spacing_m,
        });
    }
    for &(idx, ramp_len_m) in entries {
        let entry = sid(&format!("{:02}E", label_number(idx)));
        topo.stations.push(Station {
            id: entry.clone(),
            kind: StationKind::Entry,
        });
        topo.edges.push(GraphEdge {
            from: entry,
            to: mainline_label(label_number(idx)),
            length_m: ramp_len_m,
        });
    }
    for &(idx, ramp_len_m) in exits {
        let exit = sid(&format!("{:02}X", label_number(idx)));
        topo.stations.push(Station {
            id: exit.clone(),
            kind: StationKind::Exit,
        });
        topo.edges.push(GraphEdge {
            from: mainline_label(label_number(idx)),
            to: exit,
            length_m: ramp_len_m,
        });
    }
    topo
}

/// [`chain_topology_mixed`] with one shared ramp length.
pub fn chain_topology(
    mainline_count: usize,
    spacing_m: f64,
    entries: &[usize],
    exits: &[usize],
    ramp_len_m: f64,
) -> TopologyInput {
    let entries: Vec<(usize, f64)> = entries.iter().map(|i| (*i, ramp_len_m)).collect();
    let exits: Vec<(usize, f64)> = exits.iter().map(|i| (*i, ramp_len_m)).collect();
    chain_topology_mixed(mainline_count, spacing_m, &entries, &exits)
}

/// A desk-scale stand-in for a real motorway: 75 stations at 3 km spacing
/// with 20 entries and 18 exits spread along the chain.
pub fn large_motorway_topology() -> TopologyInput {
    let entries: Vec<usize> = (0..20).map(|k| 2 + 3 * k).collect();
    let exits: Vec<usize> = (0..18).map(|k| 3 + 3 * k).collect();
    chain_topology(75, 3000.0, &entries, &exits, 500.0)
}

/// A flat demand curve.
pub fn constant_curve(intervals_per_day: usize, rate: f64) -> Vec<f64> {
    alloc::vec![rate; intervals_per_day]
}

/// A Gaussian bump added on top of a base rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub centre_slot: f64,
    pub height: f64,
    pub width_slots: f64,
}

/// Base rate plus Gaussian peaks, the building block for rush-hour shapes.
pub fn peaked_curve(intervals_per_day: usize, base: f64, peaks: &[Peak]) -> Vec<f64> {
    (0..intervals_per_day)
        .map(|slot| {
            let mut rate = base;
            for peak in peaks {
                let z = (slot as f64 - peak.centre_slot) / peak.width_slots;
                rate += peak.height * libm::exp(-0.5 * z * z);
            }
            rate
        })
        .collect()
}

/// Weekday commute shape: morning and evening rush-hour peaks.
pub fn two_peak_curve(intervals_per_day: usize, base: f64, peak_height: f64) -> Vec<f64> {
    let per_hour = intervals_per_day as f64 / 24.0;
    peaked_curve(
        intervals_per_day,
        base,
        &[
            Peak {
                centre_slot: 8.5 * per_hour,
                height: peak_height,
                width_slots: 1.2 * per_hour,
            },
            Peak {
                centre_slot: 17.5 * per_hour,
                height: peak_height,
                width_slots: 1.5 * per_hour,
            },
        ],
    )
}

/// Weekend shape: one broad midday peak.
pub fn single_peak_curve(intervals_per_day: usize, base: f64, peak_height: f64) -> Vec<f64> {
    let per_hour = intervals_per_day as f64 / 24.0;
    peaked_curve(
        intervals_per_day,
        base,
        &[Peak {
            centre_slot: 13.0 * per_hour,
            height: peak_height,
            width_slots: 2.5 * per_hour,
        }],
    )
}
