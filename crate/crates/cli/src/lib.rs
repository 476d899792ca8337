//! IO, file formats and run orchestration for the flowcast toolkit.
//!
//! The algorithms live in `flowcast-core`; this crate adds everything that
//! touches the outside world: CSV and TOML formats, date parsing, the
//! multi-worker evaluation driver and the subcommand implementations behind
//! the `flowcast` binary.

pub mod dates;
pub mod formats;
pub mod parallel;
pub mod run;
pub mod scenario;
