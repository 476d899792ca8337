//! The motorway station network: a single directed mainline chain with
//! entry ramps merging in and exit ramps leaving, plus the upstream search
//! and traversal that drive the graph predictors.
//!
//! Graphs are immutable after construction and all operations are pure
//! reads, so a graph can be shared freely across evaluation workers.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Reference speed of 90 km/h, in metres per second.
pub const DEFAULT_SPEED_MPS: f64 = 25.0;

/// Short station label such as `33A`, `41E` or `39X`.
///
/// Ids are opaque labels: the station kind is declared in the topology, never
/// inferred from the suffix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StationId(String);

impl StationId {
    pub fn new(id: impl Into<String>) -> Result<StationId, GraphError> {
        let id = id.into();
        if id.is_empty() || id.chars().any(|c| c.is_whitespace() || c == ',') {
            return Err(GraphError::InvalidStationId { id });
        }
        Ok(StationId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl AsRef<str> for StationId {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

/// Mainline carriageway, on-ramp or off-ramp station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StationKind {
    Mainline,
    Entry,
    Exit,
}

impl StationKind {
    pub fn name(self) -> &'static str {
        match self {
            StationKind::Mainline => "mainline",
            StationKind::Entry => "entry",
            StationKind::Exit => "exit",
        }
    }

    pub fn from_name(name: &str) -> Option<StationKind> {
        match name {
            "mainline" => Some(StationKind::Mainline),
            "entry" => Some(StationKind::Entry),
            "exit" => Some(StationKind::Exit),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Station {
    pub id: StationId,
    pub kind: StationKind,
}

/// Directed geographical relation between two stations.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub from: StationId,
    pub to: StationId,
    pub length_m: f64,
}

/// Raw topology as declared in the input files.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TopologyInput {
    pub stations: Vec<Station>,
    pub edges: Vec<GraphEdge>,
}

/// Which structural rule a topology broke.
#[derive(Debug, Clone, PartialEq)]
pub enum Invariant {
    NonPositiveLength {
        from: StationId,
        to: StationId,
    },
    SelfLoop {
        station: StationId,
    },
    /// An edge with no mainline endpoint.
    RampOnlyEdge {
        from: StationId,
        to: StationId,
    },
    /// An entry must have exactly one outgoing edge, to a mainline station,
    /// and no incoming edges.
    EntryShape {
        station: StationId,
    },
    /// An exit must have exactly one incoming edge, from a mainline station,
    /// and no outgoing edges.
    ExitShape {
        station: StationId,
    },
    /// A mainline station with more than one mainline successor or
    /// predecessor.
    MainlineBranch {
        station: StationId,
    },
    /// The mainline stations do not form one simple chain (split or cycle).
    MainlineDisconnected,
    TooFewMainline {
        count: usize,
    },
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Invariant::NonPositiveLength { from, to } => {
                write!(f, "edge {from}->{to} has non-positive length")
            }
            Invariant::SelfLoop { station } => write!(f, "self-loop at {station}"),
            Invariant::RampOnlyEdge { from, to } => {
                write!(f, "edge {from}->{to} has no mainline endpoint")
            }
            Invariant::EntryShape { station } => {
                write!(f, "entry {station} must feed exactly one mainline station")
            }
            Invariant::ExitShape { station } => {
                write!(f, "exit {station} must leave exactly one mainline station")
            }
            Invariant::MainlineBranch { station } => {
                write!(f, "mainline branches at {station}")
            }
            Invariant::MainlineDisconnected => {
                write!(f, "mainline stations do not form a single chain")
            }
            Invariant::TooFewMainline { count } => {
                write!(f, "need at least 2 mainline stations, got {count}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    InvalidStationId {
        id: String,
    },
    DuplicateStation {
        station: StationId,
    },
    /// An edge endpoint that was never declared as a station.
    DanglingEdge {
        from: StationId,
        to: StationId,
    },
    InvariantViolation(Invariant),
    NoPath {
        from: StationId,
        to: StationId,
    },
    UnknownStation {
        station: StationId,
    },
    NotMainline {
        station: StationId,
    },
    /// No upstream origin reaches even half of the optimal distance.
    Infeasible {
        target: StationId,
        optim_dist: f64,
        best_dist: Option<f64>,
    },
    /// Speed or interval length that cannot define travel times.
    InvalidParameters {
        speed_mps: f64,
        interval_secs: u32,
    },
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::InvalidStationId { id } => write!(f, "invalid station id {id:?}"),
            GraphError::DuplicateStation { station } => {
                write!(f, "station {station} declared twice")
            }
            GraphError::DanglingEdge { from, to } => {
                write!(f, "edge {from}->{to} references an undeclared station")
            }
            GraphError::InvariantViolation(inv) => write!(f, "invalid topology: {inv}"),
            GraphError::NoPath { from, to } => write!(f, "no path from {from} to {to}"),
            GraphError::UnknownStation { station } => write!(f, "unknown station {station}"),
            GraphError::NotMainline { station } => {
                write!(f, "station {station} is not on the mainline")
            }
            GraphError::Infeasible {
                target,
                optim_dist,
                best_dist,
            } => match best_dist {
                Some(d) => write!(
                    f,
                    "no feasible origin for {target}: best upstream distance {d} m \
                     is under half of the optimal {optim_dist} m"
                ),
                None => write!(f, "no upstream mainline station exists for {target}"),
            },
            GraphError::InvalidParameters {
                speed_mps,
                interval_secs,
            } => write!(
                f,
                "invalid parameters: speed {speed_mps} m/s, interval {interval_secs} s"
            ),
        }
    }
}

impl core::error::Error for GraphError {}

/// An entry or exit hanging off a mainline station.
#[derive(Debug, Clone, PartialEq)]
pub struct Ramp {
    pub station: StationId,
    pub ramp_len_m: f64,
}

/// A ramp station annotated with its signed alignment offset relative to the
/// current time `t` (negative offsets index observed past intervals).
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedStation {
    pub station: StationId,
    pub offset: i64,
}

/// Result of traversing the mainline from an origin `u` down to a target `v`:
/// the entries feeding and exits leaving the segment, each aligned in time,
/// plus the distance of every visited station from `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalResult {
    pub origin: StationId,
    pub entries: Vec<AlignedStation>,
    pub exits: Vec<AlignedStation>,
    pub distances: BTreeMap<StationId, f64>,
}

/// Validated motorway network.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorwayGraph {
    kinds: BTreeMap<StationId, StationKind>,
    mainline: Vec<StationId>,
    mainline_index: BTreeMap<StationId, usize>,
    /// Cumulative metres from the chain head, aligned with `mainline`.
    positions: Vec<f64>,
    /// Entries feeding mainline station `i` (edge entry -> mainline[i]).
    entries_at: Vec<Vec<Ramp>>,
    /// Exits leaving mainline station `i` (edge mainline[i] -> exit).
    exits_at: Vec<Vec<Ramp>>,
    /// Ramp station -> (mainline index it attaches to, ramp length).
    ramp_attach: BTreeMap<StationId, (usize, f64)>,
    speed_mps: f64,
    interval_secs: u32,
}

/// Validate a topology and assemble the chain representation.
pub fn build_graph(
    topology: &TopologyInput,
    speed_mps: f64,
    interval_secs: u32,
) -> Result<MotorwayGraph, GraphError> {
    if speed_mps.is_nan() || speed_mps <= 0.0 || interval_secs == 0 {
        return Err(GraphError::InvalidParameters {
            speed_mps,
            interval_secs,
        });
    }

    let mut kinds: BTreeMap<StationId, StationKind> = BTreeMap::new();
    for st in &topology.stations {
        if kinds.insert(st.id.clone(), st.kind).is_some() {
            return Err(GraphError::DuplicateStation {
                station: st.id.clone(),
            });
        }
    }

    let invalid = |inv: Invariant| Err(GraphError::InvariantViolation(inv));

    // Per-station adjacency, mainline-to-mainline links separated out.
    let mut out_edges: BTreeMap<&StationId, Vec<&GraphEdge>> = BTreeMap::new();
    let mut in_edges: BTreeMap<&StationId, Vec<&GraphEdge>> = BTreeMap::new();
    let mut main_succ: BTreeMap<&StationId, Vec<(&StationId, f64)>> = BTreeMap::new();
    let mut main_pred: BTreeMap<&StationId, Vec<&StationId>> = BTreeMap::new();

    for edge in &topology.edges {
        let (Some(&kf), Some(&kt)) = (kinds.get(&edge.from), kinds.get(&edge.to)) else {
            return Err(GraphError::DanglingEdge {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        };
        if edge.from == edge.to {
            return invalid(Invariant::SelfLoop {
                station: edge.from.clone(),
            });
        }
        if edge.length_m.is_nan() || edge.length_m <= 0.0 {
            return invalid(Invariant::NonPositiveLength {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        }
        if kf != StationKind::Mainline && kt != StationKind::Mainline {
            return invalid(Invariant::RampOnlyEdge {
                from: edge.from.clone(),
                to: edge.to.clone(),
            });
        }
        out_edges.entry(&edge.from).or_default().push(edge);
        in_edges.entry(&edge.to).or_default().push(edge);
        if kf == StationKind::Mainline && kt == StationKind::Mainline {
            main_succ
                .entry(&edge.from)
                .or_default()
                .push((&edge.to, edge.length_m));
            main_pred.entry(&edge.to).or_default().push(&edge.from);
        }
    }

    // Ramp shape: entries feed one mainline station and have no in-edges;
    // exits mirror that.
    for (id, kind) in &kinds {
        match kind {
            StationKind::Entry => {
                let outs = out_edges.get(id).map_or(&[][..], Vec::as_slice);
                let ins = in_edges.get(id).map_or(0, Vec::len);
                if outs.len() != 1
                    || ins != 0
                    || kinds.get(&outs[0].to) != Some(&StationKind::Mainline)
                {
                    return invalid(Invariant::EntryShape {
                        station: id.clone(),
                    });
                }
            }
            StationKind::Exit => {
                let ins = in_edges.get(id).map_or(&[][..], Vec::as_slice);
                let outs = out_edges.get(id).map_or(0, Vec::len);
                if ins.len() != 1
                    || outs != 0
                    || kinds.get(&ins[0].from) != Some(&StationKind::Mainline)
                {
                    return invalid(Invariant::ExitShape {
                        station: id.clone(),
                    });
                }
            }
            StationKind::Mainline => {}
        }
    }

    // Re-derive the mainline chain. Exactly one head, a walk that visits
    // every mainline station once, no branching anywhere.
    let mainline_ids: Vec<&StationId> = kinds
        .iter()
        .filter(|(_, k)| **k == StationKind::Mainline)
        .map(|(id, _)| id)
        .collect();
    if mainline_ids.len() < 2 {
        return invalid(Invariant::TooFewMainline {
            count: mainline_ids.len(),
        });
    }
    for id in &mainline_ids {
        if main_succ.get(*id).map_or(0, Vec::len) > 1 || main_pred.get(*id).map_or(0, Vec::len) > 1
        {
            return invalid(Invariant::MainlineBranch {
                station: (*id).clone(),
            });
        }
    }
    let mut heads = mainline_ids
        .iter()
        .filter(|id| !main_pred.contains_key(**id));
    let (Some(head), None) = (heads.next(), heads.next()) else {
        return invalid(Invariant::MainlineDisconnected);
    };

    let mut mainline: Vec<StationId> = Vec::with_capacity(mainline_ids.len());
    let mut positions: Vec<f64> = Vec::with_capacity(mainline_ids.len());
    let mut cursor = *head;
    let mut pos = 0.0;
    loop {
        mainline.push(cursor.clone());
        positions.push(pos);
        match main_succ.get(cursor) {
            Some(next) => {
                pos += next[0].1;
                cursor = next[0].0;
                if mainline.len() == mainline_ids.len() {
                    // A successor beyond the last slot means a cycle.
                    return invalid(Invariant::MainlineDisconnected);
                }
            }
            None => break,
        }
    }
    if mainline.len() != mainline_ids.len() {
        return invalid(Invariant::MainlineDisconnected);
    }

    let mainline_index: BTreeMap<StationId, usize> = mainline
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), i))
        .collect();

    let mut entries_at: Vec<Vec<Ramp>> = vec![Vec::new(); mainline.len()];
    let mut exits_at: Vec<Vec<Ramp>> = vec![Vec::new(); mainline.len()];
    let mut ramp_attach: BTreeMap<StationId, (usize, f64)> = BTreeMap::new();
    for edge in &topology.edges {
        match (kinds[&edge.from], kinds[&edge.to]) {
            (StationKind::Entry, StationKind::Mainline) => {
                let idx = mainline_index[&edge.to];
                entries_at[idx].push(Ramp {
                    station: edge.from.clone(),
                    ramp_len_m: edge.length_m,
                });
                ramp_attach.insert(edge.from.clone(), (idx, edge.length_m));
            }
            (StationKind::Mainline, StationKind::Exit) => {
                let idx = mainline_index[&edge.from];
                exits_at[idx].push(Ramp {
                    station: edge.to.clone(),
                    ramp_len_m: edge.length_m,
                });
                ramp_attach.insert(edge.to.clone(), (idx, edge.length_m));
            }
            _ => {}
        }
    }
    for ramps in entries_at.iter_mut().chain(exits_at.iter_mut()) {
        ramps.sort_by(|a, b| a.station.cmp(&b.station));
    }

    Ok(MotorwayGraph {
        kinds,
        mainline,
        mainline_index,
        positions,
        entries_at,
        exits_at,
        ramp_attach,
        speed_mps,
        interval_secs,
    })
}

impl MotorwayGraph {
    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    pub fn interval_secs(&self) -> u32 {
        self.interval_secs
    }

    /// Metres a vehicle covers in one reporting interval.
    pub fn metres_per_interval(&self) -> f64 {
        f64::from(self.interval_secs) * self.speed_mps
    }

    /// The target upstream distance `(r + p) * d * speed` for an origin.
    pub fn optimal_distance(&self, r: u32, p: u32) -> f64 {
        f64::from(r + p) * self.metres_per_interval()
    }

    pub fn kind(&self, station: &StationId) -> Option<StationKind> {
        self.kinds.get(station).copied()
    }

    pub fn stations(&self) -> impl Iterator<Item = (&StationId, StationKind)> {
        self.kinds.iter().map(|(id, k)| (id, *k))
    }

    pub fn station_count(&self) -> usize {
        self.kinds.len()
    }

    /// Mainline stations in upstream-to-downstream order.
    pub fn mainline(&self) -> &[StationId] {
        &self.mainline
    }

    pub fn is_mainline(&self, station: &StationId) -> bool {
        self.mainline_index.contains_key(station)
    }

    /// The most upstream mainline station.
    pub fn head(&self) -> &StationId {
        &self.mainline[0]
    }

    /// The most downstream mainline station.
    pub fn tail(&self) -> &StationId {
        self.mainline.last().expect("graph has mainline stations")
    }

    /// Metres of a mainline station from the chain head.
    pub fn mainline_position(&self, station: &StationId) -> Option<f64> {
        Some(self.positions[*self.mainline_index.get(station)?])
    }

    /// For a ramp station: the mainline station it attaches to and the ramp
    /// length in metres.
    pub fn ramp_attachment(&self, ramp: &StationId) -> Option<(&StationId, f64)> {
        let (idx, len) = self.ramp_attach.get(ramp)?;
        Some((&self.mainline[*idx], *len))
    }

    pub(crate) fn ramp_attach_index(&self, ramp: &StationId) -> Option<(usize, f64)> {
        self.ramp_attach.get(ramp).copied()
    }

    pub(crate) fn position_at(&self, mainline_idx: usize) -> f64 {
        self.positions[mainline_idx]
    }

    pub(crate) fn mainline_index_of(&self, station: &StationId) -> Option<usize> {
        self.mainline_index.get(station).copied()
    }

    /// Entries feeding the given mainline station, sorted by id.
    pub fn entries_into(&self, station: &StationId) -> &[Ramp] {
        self.mainline_index
            .get(station)
            .map_or(&[], |i| &self.entries_at[*i])
    }

    /// Exits leaving the given mainline station, sorted by id.
    pub fn exits_from(&self, station: &StationId) -> &[Ramp] {
        self.mainline_index
            .get(station)
            .map_or(&[], |i| &self.exits_at[*i])
    }

    fn mainline_idx(&self, station: &StationId) -> Result<usize, GraphError> {
        match self.mainline_index.get(station) {
            Some(i) => Ok(*i),
            None if self.kinds.contains_key(station) => Err(GraphError::NotMainline {
                station: station.clone(),
            }),
            None => Err(GraphError::UnknownStation {
                station: station.clone(),
            }),
        }
    }

    /// Metres along the mainline from `a` down to `b`.
    pub fn path_distance(&self, a: &StationId, b: &StationId) -> Result<f64, GraphError> {
        let (ia, ib) = (self.mainline_idx(a)?, self.mainline_idx(b)?);
        if ia > ib {
            return Err(GraphError::NoPath {
                from: a.clone(),
                to: b.clone(),
            });
        }
        Ok(self.positions[ib] - self.positions[ia])
    }

    /// The mainline origin `u` whose distance to `v` is closest to
    /// `(r + p) * d * speed`. Ties go to the farther-upstream candidate,
    /// which carries more observed data into the prediction.
    ///
    /// Infeasible when there is no upstream candidate at all, or when the
    /// best one sits under half of the optimal distance.
    pub fn find_optimal_upstream(
        &self,
        target: &StationId,
        r: u32,
        p: u32,
    ) -> Result<StationId, GraphError> {
        let vi = self.mainline_idx(target)?;
        let optim = self.optimal_distance(r, p);
        let mut best: Option<(usize, f64)> = None;
        // Scan from the nearest candidate outwards; gaps shrink until the
        // distance passes optim, then only grow. A tie replaces the incumbent
        // so the farther-upstream station wins.
        for ui in (0..vi).rev() {
            let dist = self.positions[vi] - self.positions[ui];
            let gap = libm::fabs(dist - optim);
            match best {
                Some((_, best_gap)) if gap > best_gap => {
                    if dist >= optim {
                        break;
                    }
                }
                _ => best = Some((ui, gap)),
            }
        }
        match best {
            None => Err(GraphError::Infeasible {
                target: target.clone(),
                optim_dist: optim,
                best_dist: None,
            }),
            Some((ui, _)) => {
                let dist = self.positions[vi] - self.positions[ui];
                if dist < 0.5 * optim {
                    Err(GraphError::Infeasible {
                        target: target.clone(),
                        optim_dist: optim,
                        best_dist: Some(dist),
                    })
                } else {
                    Ok(self.mainline[ui].clone())
                }
            }
        }
    }

    /// Signed interval offset, relative to the current time `t`, at which a
    /// vehicle that crossed `u` during interval `t - r` passes a point
    /// `dist_from_u` metres downstream. Rounds to the closest interval,
    /// halves away from zero.
    pub fn align_offset(&self, dist_from_u: f64, r: u32) -> i64 {
        libm::round(dist_from_u / self.metres_per_interval()) as i64 - i64::from(r)
    }

    /// Walk the mainline from `u` down to `v`, collecting the entries that
    /// feed the segment and the exits that leave it, each annotated with its
    /// alignment offset. Ordering is deterministic: by distance from `u`,
    /// then by station id.
    ///
    /// An entry counts when it merges strictly after `u` (its vehicles were
    /// not yet recorded at `u`); an exit counts when it leaves strictly
    /// before `v` (its vehicles never reach `v`). Ramp distances follow the
    /// vehicle path: an entry sits its ramp length before the merge point, an
    /// exit its ramp length after the diverge point.
    pub fn traverse_collect(
        &self,
        origin: &StationId,
        target: &StationId,
        r: u32,
    ) -> Result<TraversalResult, GraphError> {
        let ui = self.mainline_idx(origin)?;
        let vi = self.mainline_idx(target)?;
        if ui > vi {
            return Err(GraphError::NoPath {
                from: origin.clone(),
                to: target.clone(),
            });
        }

        let mut distances = BTreeMap::new();
        let mut entries: Vec<(f64, StationId)> = Vec::new();
        let mut exits: Vec<(f64, StationId)> = Vec::new();
        for i in ui..=vi {
            let pos = self.positions[i] - self.positions[ui];
            distances.insert(self.mainline[i].clone(), pos);
            if i > ui {
                for ramp in &self.entries_at[i] {
                    let eff = (pos - ramp.ramp_len_m).max(0.0);
                    distances.insert(ramp.station.clone(), eff);
                    entries.push((eff, ramp.station.clone()));
                }
            }
            if i < vi {
                for ramp in &self.exits_at[i] {
                    let eff = pos + ramp.ramp_len_m;
                    distances.insert(ramp.station.clone(), eff);
                    exits.push((eff, ramp.station.clone()));
                }
            }
        }

        let aligned = |mut list: Vec<(f64, StationId)>| {
            list.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            list.into_iter()
                .map(|(dist, station)| AlignedStation {
                    offset: self.align_offset(dist, r),
                    station,
                })
                .collect::<Vec<_>>()
        };

        Ok(TraversalResult {
            origin: origin.clone(),
            entries: aligned(entries),
            exits: aligned(exits),
            distances,
        })
    }
}
