//! Reading timestamped count CSVs and binning them into detector steps.
//!
//! Input files need a header with `timestamp` and `count` columns; other
//! columns are ignored. Timestamps are integer seconds since the epoch or
//! ISO-8601 datetimes and must be non-decreasing.

use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinUnit {
    /// Consecutive groups of `width` rows.
    Rows,
    /// Windows of `width` seconds aligned to the first timestamp.
    Seconds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binning {
    pub width: u64,
    pub unit: BinUnit,
}

impl Binning {
    pub fn rows(width: u64) -> Self {
        Self {
            width,
            unit: BinUnit::Rows,
        }
    }

    pub fn seconds(width: u64) -> Self {
        Self {
            width,
            unit: BinUnit::Seconds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountRow {
    /// Milliseconds since the epoch.
    pub timestamp_ms: i64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSeries {
    pub counts: Vec<u64>,
    /// Timestamp (ms) of the first instant covered by each bin.
    pub bin_starts_ms: Vec<i64>,
    /// Trailing rows left out because their bin was incomplete.
    pub dropped_rows: usize,
}

/// Parses integer/fractional epoch seconds, RFC 3339, or a naive
/// `YYYY-MM-DD[T ]HH:MM:SS[.fff]` datetime (read as UTC).
pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return secs.checked_mul(1000);
    }
    if let Ok(secs) = s.parse::<f64>() {
        return secs.is_finite().then(|| (secs * 1000.0).round() as i64);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp_millis());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(s, fmt).ok())
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Reads every row of a count CSV.
pub fn read_rows(path: &Path) -> Result<Vec<CountRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::Parse {
                path: path.display().to_string(),
                line: 1,
                msg: format!("missing `{name}` column"),
            })
    };
    let (ts_col, count_col) = (column("timestamp")?, column("count")?);
    let mut rows: Vec<CountRow> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let err = |msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let ts_raw = record.get(ts_col).unwrap_or("");
        let timestamp_ms =
            parse_timestamp(ts_raw).ok_or_else(|| err(format!("bad timestamp `{ts_raw}`")))?;
        let count_raw = record.get(count_col).unwrap_or("");
        let count = count_raw
            .parse::<u64>()
            .map_err(|_| err(format!("count must be a non-negative integer, got `{count_raw}`")))?;
        if let Some(prev) = rows.last() {
            if timestamp_ms < prev.timestamp_ms {
                return Err(err(format!("timestamp `{ts_raw}` goes backwards")));
            }
        }
        rows.push(CountRow {
            timestamp_ms,
            count,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: "no data rows".into(),
        });
    }
    Ok(rows)
}

/// Aggregates rows into bins. Without a binning each row is its own step.
///
/// Time bins are `[t0 + b w, t0 + (b+1) w)`. The stream is taken to cover
/// `[t0, t_last + d)` where `d` is the smallest positive gap between rows;
/// the trailing bin is dropped unless that span fills it.
pub fn bin_rows(rows: &[CountRow], binning: Option<Binning>) -> Result<BinnedSeries> {
    let Some(binning) = binning else {
        return Ok(BinnedSeries {
            counts: rows.iter().map(|r| r.count).collect(),
            bin_starts_ms: rows.iter().map(|r| r.timestamp_ms).collect(),
            dropped_rows: 0,
        });
    };
    if binning.width == 0 {
        return Err(Error::Usage("bin width must be at least 1".into()));
    }
    match binning.unit {
        BinUnit::Rows => {
            let w = binning.width as usize;
            let full = rows.len() / w;
            Ok(BinnedSeries {
                counts: rows
                    .chunks_exact(w)
                    .map(|c| c.iter().map(|r| r.count).sum())
                    .collect(),
                bin_starts_ms: (0..full).map(|b| rows[b * w].timestamp_ms).collect(),
                dropped_rows: rows.len() - full * w,
            })
        }
        BinUnit::Seconds => {
            let Some(first) = rows.first() else {
                return Ok(BinnedSeries {
                    counts: Vec::new(),
                    bin_starts_ms: Vec::new(),
                    dropped_rows: 0,
                });
            };
            let w = binning.width as i64 * 1000;
            let t0 = first.timestamp_ms;
            let t_last = rows[rows.len() - 1].timestamp_ms;
            let step = rows
                .windows(2)
                .map(|p| p[1].timestamp_ms - p[0].timestamp_ms)
                .filter(|&g| g > 0)
                .min()
                .unwrap_or(w);
            let full = ((t_last - t0 + step) / w) as usize;
            let mut counts = vec![0u64; full];
            let mut dropped = 0;
            for r in rows {
                let b = ((r.timestamp_ms - t0) / w) as usize;
                match counts.get_mut(b) {
                    Some(c) => *c += r.count,
                    None => dropped += 1,
                }
            }
            Ok(BinnedSeries {
                counts,
                bin_starts_ms: (0..full as i64).map(|b| t0 + b * w).collect(),
                dropped_rows: dropped,
            })
        }
    }
}

pub fn ingest(path: &Path, binning: Option<Binning>) -> Result<BinnedSeries> {
    bin_rows(&read_rows(path)?, binning)
}

/// Elementwise sum of binned streams, truncated to the shortest.
pub fn sum_streams(series: &[BinnedSeries]) -> Vec<u64> {
    let len = series.iter().map(|s| s.counts.len()).min().unwrap_or(0);
    (0..len)
        .map(|k| series.iter().map(|s| s.counts[k]).sum())
        .collect()
}
