//! Outlier detection and imputation on flow series.
//!
//! A station whose counts drop out or spike poisons every prediction that
//! reads it, so series are screened against their daily profile before being
//! used: an interval is an outlier when its deviation from the profile
//! exceeds a multiple of the recent typical deviation. Flagged intervals are
//! replaced by a blend of nearby clean observations and the profile.

use alloc::vec::Vec;
use core::fmt;

use crate::flowdata::{DailyProfile, Day, FlowSeries};
use crate::graph::StationId;

/// Deviation-scale floor, as a fraction of the profile value at the slot.
/// Prevents a zero-variance night-time window from flagging everything.
pub const MIN_SCALE_FRACTION: f64 = 0.05;

/// Per-interval classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flag {
    Clean,
    Outlier,
    Missing,
}

impl Flag {
    pub fn name(self) -> &'static str {
        match self {
            Flag::Clean => "clean",
            Flag::Outlier => "outlier",
            Flag::Missing => "missing",
        }
    }

    pub fn from_name(name: &str) -> Option<Flag> {
        match name {
            "clean" => Some(Flag::Clean),
            "outlier" => Some(Flag::Outlier),
            "missing" => Some(Flag::Missing),
            _ => None,
        }
    }
}

/// Outlier flags for one station-day, same grid as the flagged series.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierMask {
    pub station: StationId,
    pub day: Day,
    pub flags: Vec<Flag>,
}

impl OutlierMask {
    /// Indices flagged as outlier or missing.
    pub fn flagged(&self) -> impl Iterator<Item = usize> + '_ {
        self.flags
            .iter()
            .enumerate()
            .filter(|(_, f)| **f != Flag::Clean)
            .map(|(i, _)| i)
    }

    pub fn outlier_count(&self) -> usize {
        self.flags.iter().filter(|f| **f == Flag::Outlier).count()
    }
}

/// Detector and imputer parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleaningConfig {
    /// Trailing window, in intervals, for the moving deviation scale and the
    /// neighbour search during imputation.
    pub window_w: usize,
    /// Multiplier on the deviation scale above which an interval is flagged.
    pub threshold_k: f64,
    /// Weight of the local clean-neighbour mean versus the profile when
    /// imputing; 0 means pure profile.
    pub recent_weight: f64,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            window_w: 20,
            threshold_k: 4.0,
            recent_weight: 0.5,
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<(), CleaningError> {
        if self.window_w < 1
            || self.threshold_k.is_nan()
            || self.threshold_k <= 0.0
            || !(0.0..=1.0).contains(&self.recent_weight)
        {
            return Err(CleaningError::InvalidConfig { config: *self });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CleaningError {
    /// Series, mask and profile must share one grid length.
    GridMismatch {
        expected: usize,
        got: usize,
    },
    /// Mask built for a different station or day than the series.
    MaskMismatch {
        station: StationId,
        day: Day,
    },
    InvalidConfig {
        config: CleaningConfig,
    },
}

impl fmt::Display for CleaningError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CleaningError::GridMismatch { expected, got } => {
                write!(f, "grid mismatch: expected {expected} intervals, got {got}")
            }
            CleaningError::MaskMismatch { station, day } => {
                write!(f, "mask does not belong to series {station} {day}")
            }
            CleaningError::InvalidConfig { config } => write!(
                f,
                "invalid cleaning config: window_w={}, threshold_k={}, recent_weight={}",
                config.window_w, config.threshold_k, config.recent_weight
            ),
        }
    }
}

impl core::error::Error for CleaningError {}

/// Flag intervals whose absolute deviation from the daily profile exceeds
/// `threshold_k` times the trailing mean absolute deviation (over the last
/// `window_w` clean intervals, floored at [`MIN_SCALE_FRACTION`] of the
/// profile). Missing intervals are flagged missing and never enter the
/// trailing window; neither do intervals already flagged, so a run of
/// drop-outs cannot inflate the scale and hide later anomalies.
pub fn detect_outliers(
    series: &FlowSeries,
    profile: &DailyProfile,
    cfg: &CleaningConfig,
) -> Result<OutlierMask, CleaningError> {
    cfg.validate()?;
    let n = series.counts().len();
    if profile.intervals_per_day() != n {
        return Err(CleaningError::GridMismatch {
            expected: n,
            got: profile.intervals_per_day(),
        });
    }
    let curve = profile.curve(series.day().day_of_week());
    let mut flags = Vec::with_capacity(n);
    // Trailing clean deviations: (sum, ring of the last window_w values).
    let mut recent: Vec<f64> = Vec::with_capacity(cfg.window_w);
    let mut recent_sum = 0.0;
    let mut next_slot = 0usize;

    for (i, value) in series.counts().iter().enumerate() {
        let Some(v) = value else {
            flags.push(Flag::Missing);
            continue;
        };
        let deviation = libm::fabs(v - curve[i]);
        let trailing = if recent.is_empty() {
            0.0
        } else {
            recent_sum / recent.len() as f64
        };
        let scale = trailing.max(MIN_SCALE_FRACTION * curve[i]);
        if deviation > cfg.threshold_k * scale {
            flags.push(Flag::Outlier);
            continue;
        }
        flags.push(Flag::Clean);
        if recent.len() < cfg.window_w {
            recent.push(deviation);
            recent_sum += deviation;
        } else {
            recent_sum += deviation - recent[next_slot];
            recent[next_slot] = deviation;
            next_slot = (next_slot + 1) % cfg.window_w;
        }
    }

    Ok(OutlierMask {
        station: series.station().clone(),
        day: series.day(),
        flags,
    })
}

/// Replace every flagged interval by the blend
/// `recent_weight * mean(nearest clean neighbours within window_w) +
/// (1 - recent_weight) * profile`, falling back to the profile alone when no
/// clean neighbour is in reach. Clean intervals pass through untouched, so
/// imputation is idempotent under a fixed mask.
pub fn impute(
    series: &FlowSeries,
    mask: &OutlierMask,
    profile: &DailyProfile,
    cfg: &CleaningConfig,
) -> Result<FlowSeries, CleaningError> {
    cfg.validate()?;
    let n = series.counts().len();
    if mask.flags.len() != n {
        return Err(CleaningError::GridMismatch {
            expected: n,
            got: mask.flags.len(),
        });
    }
    if profile.intervals_per_day() != n {
        return Err(CleaningError::GridMismatch {
            expected: n,
            got: profile.intervals_per_day(),
        });
    }
    if mask.station != *series.station() || mask.day != series.day() {
        return Err(CleaningError::MaskMismatch {
            station: mask.station.clone(),
            day: mask.day,
        });
    }

    let curve = profile.curve(series.day().day_of_week());
    let clean_value = |idx: usize| -> Option<f64> {
        if mask.flags[idx] == Flag::Clean {
            series.counts()[idx]
        } else {
            None
        }
    };
    let nearest_clean = |i: usize, dir: i64| -> Option<f64> {
        (1..=cfg.window_w as i64).find_map(|step| {
            let j = i as i64 + dir * step;
            if (0..n as i64).contains(&j) {
                clean_value(j as usize)
            } else {
                None
            }
        })
    };

    let counts = series
        .counts()
        .iter()
        .enumerate()
        .map(|(i, value)| {
            if mask.flags[i] == Flag::Clean {
                return *value;
            }
            let local: Vec<f64> = [nearest_clean(i, -1), nearest_clean(i, 1)]
                .into_iter()
                .flatten()
                .collect();
            let imputed = if local.is_empty() {
                curve[i]
            } else {
                let local_mean = local.iter().sum::<f64>() / local.len() as f64;
                cfg.recent_weight * local_mean + (1.0 - cfg.recent_weight) * curve[i]
            };
            Some(imputed)
        })
        .collect();

    Ok(FlowSeries::from_raw(
        series.station().clone(),
        series.day(),
        counts,
    ))
}
