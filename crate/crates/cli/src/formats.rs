//! File formats: topology, flow, mask, profile, forecast and boxplot CSVs,
//! plus the metrics report JSON.
//!
//! Writers iterate ordered structures and format floats with the shortest
//! round-trip representation, so output bytes are a pure function of the
//! data. Every writer has a matching reader (used in tests and downstream
//! tooling) that loses nothing.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use flowcast_core::cleaning::{Flag, OutlierMask};
use flowcast_core::eval::MetricsReport;
use flowcast_core::flowdata::{DailyProfile, FlowStore, FlowStoreBuilder, ProfileSet, TimeGrid};
use flowcast_core::graph::{GraphEdge, Station, StationId, StationKind, TopologyInput};
use flowcast_core::predictors::Method;
use flowcast_core::{DayOfWeek, Timestamp};
use thiserror::Error;

use crate::dates::{format_date, parse_date};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

fn io_err(path: &Path, source: std::io::Error) -> FormatError {
    FormatError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, source: csv::Error) -> FormatError {
    FormatError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn row_err(path: &Path, line: u64, message: impl Into<String>) -> FormatError {
    FormatError::MalformedRow {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<BufReader<File>>, FormatError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file)))
}

fn open_writer(path: &Path) -> Result<BufWriter<File>, FormatError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(BufWriter::new(file))
}

/// Shortest round-trip decimal form of a count or metric value.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

/// Read `stations.csv` (header `id,kind`) and `edges.csv` (header
/// `from,to,length_m`) into a raw topology.
pub fn read_topology(
    stations_path: &Path,
    edges_path: &Path,
) -> Result<TopologyInput, FormatError> {
    let mut topo = TopologyInput::default();

    let mut reader = open_reader(stations_path)?;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(stations_path, e))?;
        if record.len() != 2 {
            return Err(row_err(stations_path, line, "expected 2 columns: id,kind"));
        }
        let id = StationId::new(record[0].to_owned())
            .map_err(|e| row_err(stations_path, line, e.to_string()))?;
        let kind = StationKind::from_name(&record[1]).ok_or_else(|| {
            row_err(
                stations_path,
                line,
                format!("unknown kind {:?}", &record[1]),
            )
        })?;
        topo.stations.push(Station { id, kind });
    }

    let mut reader = open_reader(edges_path)?;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(edges_path, e))?;
        if record.len() != 3 {
            return Err(row_err(
                edges_path,
                line,
                "expected 3 columns: from,to,length_m",
            ));
        }
        let from = StationId::new(record[0].to_owned())
            .map_err(|e| row_err(edges_path, line, e.to_string()))?;
        let to = StationId::new(record[1].to_owned())
            .map_err(|e| row_err(edges_path, line, e.to_string()))?;
        let length_m: f64 = record[2]
            .parse()
            .map_err(|_| row_err(edges_path, line, format!("bad length {:?}", &record[2])))?;
        topo.edges.push(GraphEdge { from, to, length_m });
    }
    Ok(topo)
}

pub fn write_topology(
    topo: &TopologyInput,
    stations_path: &Path,
    edges_path: &Path,
) -> Result<(), FormatError> {
    let mut w = open_writer(stations_path)?;
    writeln!(w, "id,kind").map_err(|e| io_err(stations_path, e))?;
    for station in &topo.stations {
        writeln!(w, "{},{}", station.id, station.kind.name())
            .map_err(|e| io_err(stations_path, e))?;
    }
    let mut w = open_writer(edges_path)?;
    writeln!(w, "from,to,length_m").map_err(|e| io_err(edges_path, e))?;
    for edge in &topo.edges {
        writeln!(w, "{},{},{}", edge.from, edge.to, fmt_f64(edge.length_m))
            .map_err(|e| io_err(edges_path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Flows
// ---------------------------------------------------------------------------

/// Read a flow CSV (header `station_id,date,interval_index,count`; an empty
/// count marks a missing observation) into a store on the given grid.
pub fn read_flows(path: &Path, grid: TimeGrid) -> Result<FlowStore, FormatError> {
    let mut builder = FlowStoreBuilder::new(grid);
    let mut reader = open_reader(path)?;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != 4 {
            return Err(row_err(
                path,
                line,
                "expected 4 columns: station_id,date,interval_index,count",
            ));
        }
        let station =
            StationId::new(record[0].to_owned()).map_err(|e| row_err(path, line, e.to_string()))?;
        let day = parse_date(&record[1]).map_err(|e| row_err(path, line, e.to_string()))?;
        let interval: u32 = record[2]
            .parse()
            .map_err(|_| row_err(path, line, format!("bad interval {:?}", &record[2])))?;
        let count: Option<f64> = if record[3].is_empty() {
            None
        } else {
            Some(
                record[3]
                    .parse()
                    .map_err(|_| row_err(path, line, format!("bad count {:?}", &record[3])))?,
            )
        };
        builder
            .record(&station, day, interval, count)
            .map_err(|e| row_err(path, line, e.to_string()))?;
    }
    Ok(builder.finish())
}

/// Write every stored interval, one row per slot, in (station, day, slot)
/// order. Intervals never observed are not emitted.
pub fn write_flows(store: &FlowStore, path: &Path) -> Result<(), FormatError> {
    let mut w = open_writer(path)?;
    writeln!(w, "station_id,date,interval_index,count").map_err(|e| io_err(path, e))?;
    for (station, day, counts) in store.iter() {
        let date = format_date(day);
        for (slot, value) in counts.iter().enumerate() {
            match value {
                Some(v) => writeln!(w, "{station},{date},{slot},{}", fmt_f64(*v)),
                None => writeln!(w, "{station},{date},{slot},"),
            }
            .map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Masks
// ---------------------------------------------------------------------------

pub fn write_masks(masks: &[OutlierMask], path: &Path) -> Result<(), FormatError> {
    let mut w = open_writer(path)?;
    writeln!(w, "station_id,date,interval_index,flag").map_err(|e| io_err(path, e))?;
    for mask in masks {
        let date = format_date(mask.day);
        for (slot, flag) in mask.flags.iter().enumerate() {
            writeln!(w, "{},{date},{slot},{}", mask.station, flag.name())
                .map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

pub fn read_masks(path: &Path, grid: &TimeGrid) -> Result<Vec<OutlierMask>, FormatError> {
    let ipd = grid.intervals_per_day() as usize;
    let mut masks: Vec<OutlierMask> = Vec::new();
    let mut reader = open_reader(path)?;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != 4 {
            return Err(row_err(path, line, "expected 4 columns"));
        }
        let station =
            StationId::new(record[0].to_owned()).map_err(|e| row_err(path, line, e.to_string()))?;
        let day = parse_date(&record[1]).map_err(|e| row_err(path, line, e.to_string()))?;
        let slot: usize = record[2]
            .parse()
            .map_err(|_| row_err(path, line, format!("bad interval {:?}", &record[2])))?;
        if slot >= ipd {
            return Err(row_err(path, line, format!("interval {slot} outside grid")));
        }
        let flag = Flag::from_name(&record[3])
            .ok_or_else(|| row_err(path, line, format!("unknown flag {:?}", &record[3])))?;
        let current = match masks.last_mut() {
            Some(m) if *m.station.as_str() == record[0] && m.day == day => m,
            _ => {
                masks.push(OutlierMask {
                    station,
                    day,
                    flags: vec![Flag::Clean; ipd],
                });
                masks.last_mut().unwrap()
            }
        };
        current.flags[slot] = flag;
    }
    Ok(masks)
}

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

pub fn write_profiles(profiles: &ProfileSet, path: &Path) -> Result<(), FormatError> {
    let mut w = open_writer(path)?;
    writeln!(w, "station_id,day_of_week,interval_index,mean_flow").map_err(|e| io_err(path, e))?;
    for (station, profile) in profiles {
        for dow in DayOfWeek::ALL {
            for (slot, value) in profile.curve(dow).iter().enumerate() {
                writeln!(w, "{station},{},{slot},{}", dow.name(), fmt_f64(*value))
                    .map_err(|e| io_err(path, e))?;
            }
        }
    }
    Ok(())
}

pub fn read_profiles(path: &Path, grid: &TimeGrid) -> Result<ProfileSet, FormatError> {
    use std::collections::BTreeMap;
    let ipd = grid.intervals_per_day() as usize;
    let mut curves: BTreeMap<StationId, [Vec<f64>; 7]> = BTreeMap::new();
    let mut reader = open_reader(path)?;
    for (i, record) in reader.records().enumerate() {
        let line = i as u64 + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != 4 {
            return Err(row_err(path, line, "expected 4 columns"));
        }
        let station =
            StationId::new(record[0].to_owned()).map_err(|e| row_err(path, line, e.to_string()))?;
        let dow = DayOfWeek::from_name(&record[1])
            .ok_or_else(|| row_err(path, line, format!("unknown day {:?}", &record[1])))?;
        let slot: usize = record[2]
            .parse()
            .map_err(|_| row_err(path, line, format!("bad interval {:?}", &record[2])))?;
        if slot >= ipd {
            return Err(row_err(path, line, format!("interval {slot} outside grid")));
        }
        let value: f64 = record[3]
            .parse()
            .map_err(|_| row_err(path, line, format!("bad mean {:?}", &record[3])))?;
        curves
            .entry(station)
            .or_insert_with(|| [(); 7].map(|_| vec![0.0; ipd]))[dow.index()][slot] = value;
    }
    Ok(curves
        .into_iter()
        .map(|(station, values)| {
            let profile = DailyProfile::from_curves(station.clone(), values);
            (station, profile)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Forecasts
// ---------------------------------------------------------------------------

/// One emitted forecast row; `at` is the target timestamp being predicted.
pub struct ForecastRow {
    pub station: StationId,
    pub at: Timestamp,
    pub method: Method,
    pub r: u32,
    pub p: u32,
    pub value: f64,
}

pub fn write_forecasts(rows: &[ForecastRow], path: &Path) -> Result<(), FormatError> {
    let mut w = open_writer(path)?;
    writeln!(w, "station_id,date,interval_index,method,r,p,value").map_err(|e| io_err(path, e))?;
    for row in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.station,
            format_date(row.at.day),
            row.at.interval,
            row.method.name(),
            row.r,
            row.p,
            fmt_f64(row.value)
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

fn cell_json(cell: &flowcast_core::eval::CellMetrics) -> serde_json::Value {
    serde_json::json!({
        "rmse": cell.rmse,
        "r2": cell.r2,
        "smape": cell.smape,
        "n": cell.n,
    })
}

/// Report JSON: one object per method mapping station ids (plus the pooled
/// `aggregate` key) to per-horizon cells keyed `r{r}p{p}`, and a `coverage`
/// sibling with predicted/skipped timestamp counts.
pub fn report_to_json(report: &MetricsReport) -> serde_json::Value {
    let mut root = serde_json::Map::new();
    for (method, stations) in &report.cells {
        let mut method_obj = serde_json::Map::new();
        for (station, cells) in stations {
            let mut station_obj = serde_json::Map::new();
            for ((r, p), cell) in cells {
                station_obj.insert(format!("r{r}p{p}"), cell_json(cell));
            }
            method_obj.insert(station.as_str().to_owned(), station_obj.into());
        }
        if let Some(aggregates) = report.aggregates.get(method) {
            let mut agg_obj = serde_json::Map::new();
            for ((r, p), cell) in aggregates {
                agg_obj.insert(format!("r{r}p{p}"), cell_json(cell));
            }
            method_obj.insert("aggregate".to_owned(), agg_obj.into());
        }
        root.insert(method.name().to_owned(), method_obj.into());
    }
    let mut coverage_obj = serde_json::Map::new();
    for (method, per_horizon) in &report.coverage {
        let mut method_obj = serde_json::Map::new();
        for ((r, p), cov) in per_horizon {
            method_obj.insert(
                format!("r{r}p{p}"),
                serde_json::json!({"predicted": cov.predicted, "skipped": cov.skipped}),
            );
        }
        coverage_obj.insert(method.name().to_owned(), method_obj.into());
    }
    root.insert("coverage".to_owned(), coverage_obj.into());
    root.into()
}

pub fn write_report(report: &MetricsReport, path: &Path) -> Result<(), FormatError> {
    let mut w = open_writer(path)?;
    let json = report_to_json(report);
    serde_json::to_writer_pretty(&mut w, &json)
        .map_err(|e| io_err(path, std::io::Error::other(e)))?;
    writeln!(w).map_err(|e| io_err(path, e))?;
    Ok(())
}

pub fn write_boxplot(report: &MetricsReport, path: &Path) -> Result<(), FormatError> {
    let mut w = open_writer(path)?;
    writeln!(
        w,
        "method,station,r,p,q1,median,q3,lo_whisker,hi_whisker,mean"
    )
    .map_err(|e| io_err(path, e))?;
    for row in &report.boxplot {
        let s = &row.stats;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            row.method.name(),
            row.station,
            row.r,
            row.p,
            fmt_f64(s.q1),
            fmt_f64(s.median),
            fmt_f64(s.q3),
            fmt_f64(s.lo_whisker),
            fmt_f64(s.hi_whisker),
            fmt_f64(s.mean)
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
