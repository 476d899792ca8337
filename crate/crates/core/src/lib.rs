//! Graph-based short-term motorway traffic flow prediction.
//!
//! The crate models a motorway as a directed chain of flow counting stations
//! with entry and exit ramps, and predicts near-future vehicle counts from
//! recently observed upstream flow. Three predictors are provided:
//!
//! * a daily-profile baseline that forecasts the historical mean,
//! * a backtracking predictor that carries the observed flow of an upstream
//!   origin downstream, adding entries and subtracting exits,
//! * an interpolating variant that blends each ramp contribution across the
//!   two intervals its travel time overlaps.
//!
//! A vehicle-level constant-speed simulator generates ground-truth datasets
//! for verification, and the evaluation harness scores predictors with RMSE,
//! R-squared and SMAPE over train/test splits and horizon sweeps.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the
//! command-line interface live in the companion `flowcast-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cleaning;
pub mod eval;
pub mod flowdata;
pub mod graph;
pub mod predictors;
pub mod simulator;
pub mod synthetic;

pub use flowdata::{Day, DayOfWeek, FlowSeries, FlowStore, TimeGrid, Timestamp};
pub use graph::{MotorwayGraph, StationId, StationKind};
