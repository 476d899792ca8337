//! Interval flow storage, daily profiles and the two-interval
//! interpolation primitive.
//!
//! Flow counts are kept per station and per calendar day as fixed-length
//! arrays of intervals. Missing observations are a distinct state — they are
//! never conflated with a zero count, since zeros would poison the daily
//! profiles used as the historical-mean fallback.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::graph::StationId;

/// Seconds in a civil day; every [`TimeGrid`] must tile this exactly.
pub const SECONDS_PER_DAY: u32 = 86_400;

/// Relative tolerance for the `t1 + t2 = d` interpolation precondition.
pub const BLEND_SUM_TOLERANCE: f64 = 1e-9;

/// Errors raised by flow storage, profiling and interpolation.
#[derive(Debug, Clone, PartialEq)]
pub enum FlowError {
    /// Interval length and intervals-per-day do not tile a 86400 s day.
    InvalidGrid {
        interval_secs: u32,
        intervals_per_day: u32,
    },
    /// An interval index at or beyond `intervals_per_day`.
    IntervalOutOfRange { interval: u32, limit: u32 },
    /// The same (station, day, interval) slot was observed twice.
    DuplicateObservation {
        station: StationId,
        day: Day,
        interval: u32,
    },
    /// A whole series for this (station, day) is already present.
    DuplicateSeries { station: StationId, day: Day },
    /// A vehicle count below zero.
    NegativeCount { value: f64 },
    /// A series whose length does not match the store grid.
    SeriesLength { got: usize, expected: usize },
    /// A day-of-week (or a slot) with no usable training observations.
    InsufficientData { day_of_week: DayOfWeek },
    /// Interpolation called with weights that do not sum to the interval
    /// length, or with a negative weight.
    PreconditionViolated { t1: f64, t2: f64, d: f64 },
    /// A required observation is missing or not stored.
    MissingData {
        station: StationId,
        day: Day,
        interval: u32,
    },
}

impl fmt::Display for FlowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowError::InvalidGrid {
                interval_secs,
                intervals_per_day,
            } => write!(
                f,
                "invalid grid: {interval_secs} s x {intervals_per_day} intervals does not tile a day"
            ),
            FlowError::IntervalOutOfRange { interval, limit } => {
                write!(f, "interval index {interval} outside [0, {limit})")
            }
            FlowError::DuplicateObservation {
                station,
                day,
                interval,
            } => write!(f, "duplicate observation for {station} {day} interval {interval}"),
            FlowError::DuplicateSeries { station, day } => {
                write!(f, "series for {station} {day} inserted twice")
            }
            FlowError::NegativeCount { value } => write!(f, "negative vehicle count {value}"),
            FlowError::SeriesLength { got, expected } => {
                write!(f, "series has {got} intervals, grid expects {expected}")
            }
            FlowError::InsufficientData { day_of_week } => {
                write!(f, "no usable training data for {}", day_of_week.name())
            }
            FlowError::PreconditionViolated { t1, t2, d } => {
                write!(f, "blend weights t1={t1}, t2={t2} do not split interval d={d}")
            }
            FlowError::MissingData {
                station,
                day,
                interval,
            } => write!(f, "missing flow for {station} {day} interval {interval}"),
        }
    }
}

impl core::error::Error for FlowError {}

// ---------------------------------------------------------------------------
// Time grid and calendar days
// ---------------------------------------------------------------------------

/// The fixed reporting grid: interval length `d` in seconds and the number of
/// intervals per day. The two must multiply to exactly one day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    interval_secs: u32,
    intervals_per_day: u32,
}

impl TimeGrid {
    pub fn new(interval_secs: u32, intervals_per_day: u32) -> Result<Self, FlowError> {
        if interval_secs == 0
            || intervals_per_day == 0
            || interval_secs.checked_mul(intervals_per_day) != Some(SECONDS_PER_DAY)
        {
            return Err(FlowError::InvalidGrid {
                interval_secs,
                intervals_per_day,
            });
        }
        Ok(TimeGrid {
            interval_secs,
            intervals_per_day,
        })
    }

    /// The 3-minute / 480-interval grid used by the motorway dataset.
    pub fn standard() -> Self {
        TimeGrid {
            interval_secs: 180,
            intervals_per_day: 480,
        }
    }

    pub fn interval_secs(&self) -> u32 {
        self.interval_secs
    }

    pub fn intervals_per_day(&self) -> u32 {
        self.intervals_per_day
    }
}

/// A calendar day, counted in civil days since 1970-01-01.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Day(pub i64);

impl Day {
    /// Build from a proleptic Gregorian civil date.
    ///
    /// Uses the standard days-from-civil algorithm; valid over any date this
    /// toolkit will ever see.
    pub fn from_civil(year: i32, month: u32, day: u32) -> Day {
        let y = i64::from(year) - i64::from(month <= 2);
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let m = i64::from(month);
        let d = i64::from(day);
        let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        Day(era * 146_097 + doe - 719_468)
    }

    /// The inverse of [`Day::from_civil`]: (year, month, day).
    pub fn to_civil(self) -> (i32, u32, u32) {
        let z = self.0 + 719_468;
        let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let y = yoe + era * 400;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let d = doy - (153 * mp + 2) / 5 + 1;
        let m = if mp < 10 { mp + 3 } else { mp - 9 };
        ((y + i64::from(m <= 2)) as i32, m as u32, d as u32)
    }

    pub fn day_of_week(self) -> DayOfWeek {
        // 1970-01-01 was a Thursday.
        DayOfWeek::from_index(((self.0 + 3).rem_euclid(7)) as usize)
    }

    pub fn offset(self, days: i64) -> Day {
        Day(self.0 + days)
    }

    pub fn next(self) -> Day {
        self.offset(1)
    }

    pub fn prev(self) -> Day {
        self.offset(-1)
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (y, m, d) = self.to_civil();
        write!(f, "{y:04}-{m:02}-{d:02}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DayOfWeek {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Monday,
        DayOfWeek::Tuesday,
        DayOfWeek::Wednesday,
        DayOfWeek::Thursday,
        DayOfWeek::Friday,
        DayOfWeek::Saturday,
        DayOfWeek::Sunday,
    ];

    /// Monday = 0 .. Sunday = 6.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> DayOfWeek {
        Self::ALL[index % 7]
    }

    pub fn name(self) -> &'static str {
        match self {
            DayOfWeek::Monday => "mon",
            DayOfWeek::Tuesday => "tue",
            DayOfWeek::Wednesday => "wed",
            DayOfWeek::Thursday => "thu",
            DayOfWeek::Friday => "fri",
            DayOfWeek::Saturday => "sat",
            DayOfWeek::Sunday => "sun",
        }
    }

    pub fn from_name(name: &str) -> Option<DayOfWeek> {
        Self::ALL.iter().copied().find(|d| d.name() == name)
    }

    pub fn is_weekend(self) -> bool {
        matches!(self, DayOfWeek::Saturday | DayOfWeek::Sunday)
    }
}

/// A point on the grid: a calendar day plus an interval index within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Timestamp {
    pub day: Day,
    pub interval: u32,
}

impl Timestamp {
    pub fn new(day: Day, interval: u32) -> Timestamp {
        Timestamp { day, interval }
    }

    /// Shift by a signed number of intervals, rolling across day boundaries.
    pub fn offset(self, intervals: i64, grid: &TimeGrid) -> Timestamp {
        let ipd = i64::from(grid.intervals_per_day());
        let abs = self.day.0 * ipd + i64::from(self.interval) + intervals;
        Timestamp {
            day: Day(abs.div_euclid(ipd)),
            interval: abs.rem_euclid(ipd) as u32,
        }
    }

    pub fn day_of_week(self) -> DayOfWeek {
        self.day.day_of_week()
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.day, self.interval)
    }
}

// ---------------------------------------------------------------------------
// Flow series and store
// ---------------------------------------------------------------------------

/// One station-day of interval counts. `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSeries {
    station: StationId,
    day: Day,
    counts: Vec<Option<f64>>,
}

impl FlowSeries {
    pub fn new(
        station: StationId,
        day: Day,
        counts: Vec<Option<f64>>,
        grid: &TimeGrid,
    ) -> Result<FlowSeries, FlowError> {
        if counts.len() != grid.intervals_per_day() as usize {
            return Err(FlowError::SeriesLength {
                got: counts.len(),
                expected: grid.intervals_per_day() as usize,
            });
        }
        if let Some(bad) = counts.iter().flatten().find(|v| v.is_nan() || **v < 0.0) {
            return Err(FlowError::NegativeCount { value: *bad });
        }
        Ok(FlowSeries {
            station,
            day,
            counts,
        })
    }

    /// Construct without validation, for counts that are non-negative and
    /// grid-length by construction.
    pub(crate) fn from_raw(station: StationId, day: Day, counts: Vec<Option<f64>>) -> FlowSeries {
        FlowSeries {
            station,
            day,
            counts,
        }
    }

    pub fn station(&self) -> &StationId {
        &self.station
    }

    pub fn day(&self) -> Day {
        self.day
    }

    pub fn counts(&self) -> &[Option<f64>] {
        &self.counts
    }
}

/// All flow series for a dataset, keyed by station and day, sharing one grid.
///
/// Immutable once populated; every read is concurrent-safe.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStore {
    grid: TimeGrid,
    data: BTreeMap<StationId, BTreeMap<Day, Vec<Option<f64>>>>,
}

impl FlowStore {
    pub fn new(grid: TimeGrid) -> FlowStore {
        FlowStore {
            grid,
            data: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn insert_series(&mut self, series: FlowSeries) -> Result<(), FlowError> {
        if series.counts.len() != self.grid.intervals_per_day() as usize {
            return Err(FlowError::SeriesLength {
                got: series.counts.len(),
                expected: self.grid.intervals_per_day() as usize,
            });
        }
        let per_day = self.data.entry(series.station.clone()).or_default();
        if per_day.contains_key(&series.day) {
            return Err(FlowError::DuplicateSeries {
                station: series.station,
                day: series.day,
            });
        }
        per_day.insert(series.day, series.counts);
        Ok(())
    }

    /// The count at a timestamp; `None` when missing or simply not stored.
    pub fn value(&self, station: &StationId, at: Timestamp) -> Option<f64> {
        self.data
            .get(station)?
            .get(&at.day)?
            .get(at.interval as usize)
            .copied()
            .flatten()
    }

    pub fn series(&self, station: &StationId, day: Day) -> Option<&[Option<f64>]> {
        Some(self.data.get(station)?.get(&day)?.as_slice())
    }

    pub fn stations(&self) -> impl Iterator<Item = &StationId> {
        self.data.keys()
    }

    pub fn days(&self, station: &StationId) -> impl Iterator<Item = Day> + '_ {
        self.data
            .get(station)
            .into_iter()
            .flat_map(|m| m.keys().copied())
    }

    /// Iterate every stored (station, day, counts) triple in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&StationId, Day, &[Option<f64>])> {
        self.data.iter().flat_map(|(station, per_day)| {
            per_day
                .iter()
                .map(move |(day, counts)| (station, *day, counts.as_slice()))
        })
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Interpolated flow across intervals `at` and `at + 1`: the window
    /// covers the last `t1` seconds of the first interval and the first `t2`
    /// seconds of the next, with `t1 + t2 = d`.
    ///
    /// A zero-weight side is not resolved, so the degenerate cases return the
    /// recorded count of the other side exactly.
    pub fn interpolate(
        &self,
        station: &StationId,
        at: Timestamp,
        t1: f64,
        t2: f64,
    ) -> Result<f64, FlowError> {
        let d = f64::from(self.grid.interval_secs());
        check_blend_weights(t1, t2, d)?;
        let lookup = |ts: Timestamp| {
            self.value(station, ts).ok_or(FlowError::MissingData {
                station: station.clone(),
                day: ts.day,
                interval: ts.interval,
            })
        };
        if t2 == 0.0 {
            return lookup(at);
        }
        if t1 == 0.0 {
            return lookup(at.offset(1, &self.grid));
        }
        let first = lookup(at)?;
        let second = lookup(at.offset(1, &self.grid))?;
        Ok(time_weighted_blend(t1, t2, d, first, second))
    }
}

/// Validate interpolation weights: non-negative and summing to `d` within a
/// relative tolerance.
pub fn check_blend_weights(t1: f64, t2: f64, d: f64) -> Result<(), FlowError> {
    if t1.is_nan()
        || t1 < 0.0
        || t2.is_nan()
        || t2 < 0.0
        || libm::fabs(t1 + t2 - d) > BLEND_SUM_TOLERANCE * d
    {
        return Err(FlowError::PreconditionViolated { t1, t2, d });
    }
    Ok(())
}

/// The time-weighted blend `(t1 * first + t2 * second) / d`.
pub fn time_weighted_blend(t1: f64, t2: f64, d: f64, first: f64, second: f64) -> f64 {
    (t1 * first + t2 * second) / d
}

/// Incremental row-at-a-time construction with full duplicate detection,
/// used by CSV ingestion. Unseen slots stay missing rather than zero.
#[derive(Debug)]
pub struct FlowStoreBuilder {
    grid: TimeGrid,
    data: BTreeMap<StationId, BTreeMap<Day, DayUnderConstruction>>,
}

#[derive(Debug)]
struct DayUnderConstruction {
    counts: Vec<Option<f64>>,
    seen: Vec<bool>,
}

impl FlowStoreBuilder {
    pub fn new(grid: TimeGrid) -> FlowStoreBuilder {
        FlowStoreBuilder {
            grid,
            data: BTreeMap::new(),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Record one observation. `None` records an explicitly-missing interval,
    /// which still participates in duplicate detection.
    pub fn record(
        &mut self,
        station: &StationId,
        day: Day,
        interval: u32,
        value: Option<f64>,
    ) -> Result<(), FlowError> {
        let ipd = self.grid.intervals_per_day();
        if interval >= ipd {
            return Err(FlowError::IntervalOutOfRange {
                interval,
                limit: ipd,
            });
        }
        if let Some(v) = value {
            if v.is_nan() || v < 0.0 {
                return Err(FlowError::NegativeCount { value: v });
            }
        }
        let slot = self
            .data
            .entry(station.clone())
            .or_default()
            .entry(day)
            .or_insert_with(|| DayUnderConstruction {
                counts: vec![None; ipd as usize],
                seen: vec![false; ipd as usize],
            });
        let idx = interval as usize;
        if slot.seen[idx] {
            return Err(FlowError::DuplicateObservation {
                station: station.clone(),
                day,
                interval,
            });
        }
        slot.seen[idx] = true;
        slot.counts[idx] = value;
        Ok(())
    }

    pub fn finish(self) -> FlowStore {
        FlowStore {
            grid: self.grid,
            data: self
                .data
                .into_iter()
                .map(|(station, per_day)| {
                    (
                        station,
                        per_day.into_iter().map(|(d, s)| (d, s.counts)).collect(),
                    )
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Daily profiles
// ---------------------------------------------------------------------------

/// Per-station historical mean flow: one curve per day of the week.
///
/// Doubles as the daily-profile predictor and as the historical-mean fallback
/// for the graph predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct DailyProfile {
    station: StationId,
    values: [Vec<f64>; 7],
}

impl DailyProfile {
    /// Build directly from seven curves (Monday first). Mostly useful for
    /// tests and synthetic scenarios.
    pub fn from_curves(station: StationId, values: [Vec<f64>; 7]) -> DailyProfile {
        DailyProfile { station, values }
    }

    pub fn station(&self) -> &StationId {
        &self.station
    }

    pub fn intervals_per_day(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, day_of_week: DayOfWeek, slot: u32) -> f64 {
        self.values[day_of_week.index()][slot as usize]
    }

    pub fn value_at(&self, at: Timestamp) -> f64 {
        self.value(at.day_of_week(), at.interval)
    }

    pub fn curve(&self, day_of_week: DayOfWeek) -> &[f64] {
        &self.values[day_of_week.index()]
    }
}

/// A profile per station, as used by the predictors.
pub type ProfileSet = BTreeMap<StationId, DailyProfile>;

/// Mean flow per (day-of-week, slot) over the training days, ignoring missing
/// observations. Training days without a stored series do not count.
///
/// Fails when a day of the week has no training day with data, or a slot ends
/// up with no usable observation at all.
pub fn compute_daily_profile(
    store: &FlowStore,
    station: &StationId,
    training_days: &[Day],
) -> Result<DailyProfile, FlowError> {
    let ipd = store.grid().intervals_per_day() as usize;
    let days: BTreeSet<Day> = training_days.iter().copied().collect();
    let mut sums = [(); 7].map(|_| vec![0.0f64; ipd]);
    let mut counts = [(); 7].map(|_| vec![0u32; ipd]);
    let mut days_with_data = [0u32; 7];

    for day in days {
        let Some(series) = store.series(station, day) else {
            continue;
        };
        let dow = day.day_of_week().index();
        days_with_data[dow] += 1;
        for (slot, value) in series.iter().enumerate() {
            if let Some(v) = value {
                sums[dow][slot] += v;
                counts[dow][slot] += 1;
            }
        }
    }

    let mut values = [(); 7].map(|_| vec![0.0f64; ipd]);
    for dow in 0..7 {
        if days_with_data[dow] == 0 {
            return Err(FlowError::InsufficientData {
                day_of_week: DayOfWeek::from_index(dow),
            });
        }
        for slot in 0..ipd {
            if counts[dow][slot] == 0 {
                return Err(FlowError::InsufficientData {
                    day_of_week: DayOfWeek::from_index(dow),
                });
            }
            values[dow][slot] = sums[dow][slot] / f64::from(counts[dow][slot]);
        }
    }
    Ok(DailyProfile {
        station: station.clone(),
        values,
    })
}
