use chrono::{DateTime, NaiveDateTime, TimeDelta, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindError {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },
    #[error("line {line}: timestamp {timestamp} repeats an earlier row")]
    NonMonotonicTimestamps { line: u64, timestamp: DateTime<Utc> },
    #[error("no wind record within {max_gap_s} s of {at}")]
    NoWindData { at: DateTime<Utc>, max_gap_s: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindRecord {
    pub timestamp: DateTime<Utc>,
    /// Direction the wind blows from, degrees clockwise from north, in [0, 360).
    pub phi_deg: f64,
}

/// Wind records with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WindTable {
    records: Vec<WindRecord>,
}

pub const DEFAULT_MAX_GAP: TimeDelta = TimeDelta::hours(1);

/// ISO-8601 instant; a missing offset is read as UTC.
pub fn parse_instant(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y%m%dT%H%M%SZ"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

impl WindTable {
    /// Sorts the records; equal timestamps are rejected.
    pub fn from_records(mut records: Vec<WindRecord>) -> Result<Self, WindError> {
        records.sort_by_key(|r| r.timestamp);
        if let Some(w) = records.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            return Err(WindError::NonMonotonicTimestamps { line: 0, timestamp: w[1].timestamp });
        }
        for r in &mut records {
            r.phi_deg = r.phi_deg.rem_euclid(360.0);
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[WindRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Nearest record in time; ties go to the earlier record.
    pub fn wind_at(&self, t: DateTime<Utc>, max_gap: TimeDelta) -> Result<WindRecord, WindError> {
        let i = self.records.partition_point(|r| r.timestamp <= t);
        let before = i.checked_sub(1).map(|j| self.records[j]);
        let after = self.records.get(i).copied();
        let best = match (before, after) {
            (Some(b), Some(a)) => {
                if a.timestamp - t < t - b.timestamp {
                    Some(a)
                } else {
                    Some(b)
                }
            }
            (b, a) => b.or(a),
        };
        best.filter(|r| (r.timestamp - t).abs() <= max_gap)
            .ok_or(WindError::NoWindData { at: t, max_gap_s: max_gap.num_seconds() })
    }
}

/// Reads `timestamp,wd_deg` rows. Directions are wrapped into [0, 360).
pub fn load_wind_csv(bytes: &[u8]) -> Result<WindTable, WindError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = rdr.headers().map_err(|e| WindError::Parse { line: 1, msg: e.to_string() })?.clone();
    if headers.is_empty() && bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(WindTable::default());
    }
    let (Some(ti), Some(wi)) = (
        headers.iter().position(|h| h == "timestamp"),
        headers.iter().position(|h| h == "wd_deg"),
    ) else {
        return Err(WindError::Parse {
            line: 1,
            msg: format!("expected header timestamp,wd_deg, got {:?}", headers.iter().collect::<Vec<_>>()),
        });
    };

    let mut rows: Vec<(u64, WindRecord)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| WindError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let ts = rec.get(ti).unwrap_or("");
        let wd = rec.get(wi).unwrap_or("");
        let timestamp = parse_instant(ts).ok_or_else(|| WindError::Parse {
            line,
            msg: format!("bad timestamp {ts:?}"),
        })?;
        let phi: f64 = wd.parse().map_err(|_| WindError::Parse {
            line,
            msg: format!("bad wind direction {wd:?}"),
        })?;
        if !phi.is_finite() {
            return Err(WindError::Parse { line, msg: format!("bad wind direction {wd:?}") });
        }
        rows.push((line, WindRecord { timestamp, phi_deg: phi }));
    }
    rows.sort_by_key(|(_, r)| r.timestamp);
    if let Some(w) = rows.windows(2).find(|w| w[0].1.timestamp == w[1].1.timestamp) {
        return Err(WindError::NonMonotonicTimestamps {
            line: w[0].0.max(w[1].0),
            timestamp: w[1].1.timestamp,
        });
    }
    WindTable::from_records(rows.into_iter().map(|(_, r)| r).collect())
}
