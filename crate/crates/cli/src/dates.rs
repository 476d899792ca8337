//! ISO-8601 date and date-range parsing on top of the core day arithmetic.

use anyhow::{bail, Context, Result};
use flowcast_core::Day;

/// Parse a strict `YYYY-MM-DD` date.
pub fn parse_date(text: &str) -> Result<Day> {
    let parts: Vec<&str> = text.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 || parts[1].len() != 2 || parts[2].len() != 2 {
        bail!("invalid date {text:?}, expected YYYY-MM-DD");
    }
    let year: i32 = parts[0]
        .parse()
        .with_context(|| format!("year in {text:?}"))?;
    let month: u32 = parts[1]
        .parse()
        .with_context(|| format!("month in {text:?}"))?;
    let day: u32 = parts[2]
        .parse()
        .with_context(|| format!("day in {text:?}"))?;
    if !(1..=12).contains(&month) {
        bail!("month {month} out of range in {text:?}");
    }
    let parsed = Day::from_civil(year, month, day);
    // Round-trip rejects out-of-range day numbers like 2017-02-30.
    if parsed.to_civil() != (year, month, day) {
        bail!("{text:?} is not a calendar date");
    }
    Ok(parsed)
}

pub fn format_date(day: Day) -> String {
    day.to_string()
}

/// Parse a comma-separated union of inclusive date ranges, each either a
/// single date or `START..END`. Returns sorted, de-duplicated days.
pub fn parse_date_ranges(text: &str) -> Result<Vec<Day>> {
    let mut days = Vec::new();
    for piece in text.split(',') {
        let piece = piece.trim();
        if piece.is_empty() {
            bail!("empty range in {text:?}");
        }
        match piece.split_once("..") {
            None => days.push(parse_date(piece)?),
            Some((start, end)) => {
                let start = parse_date(start)?;
                let end = parse_date(end)?;
                if end < start {
                    bail!("range {piece:?} runs backwards");
                }
                if end.0 - start.0 > 5000 {
                    bail!("range {piece:?} covers more than 5000 days");
                }
                days.extend((start.0..=end.0).map(Day));
            }
        }
    }
    days.sort();
    days.dedup();
    Ok(days)
}

/// Parse `N` or `A..B` (inclusive) into horizon values, each within 1..=5.
pub fn parse_horizons(text: &str) -> Result<Vec<u32>> {
    let values: Vec<u32> = match text.split_once("..") {
        None => vec![text
            .trim()
            .parse()
            .with_context(|| format!("horizon {text:?}"))?],
        Some((a, b)) => {
            let a: u32 = a
                .trim()
                .parse()
                .with_context(|| format!("horizon {text:?}"))?;
            let b: u32 = b
                .trim()
                .parse()
                .with_context(|| format!("horizon {text:?}"))?;
            if b < a {
                bail!("horizon range {text:?} runs backwards");
            }
            (a..=b).collect()
        }
    };
    for v in &values {
        if !(1..=5).contains(v) {
            bail!("horizon {v} outside 1..=5");
        }
    }
    Ok(values)
}
