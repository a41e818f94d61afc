use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Truncated,
    VerticalPlume,
    NegativeRise,
    FitDiverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    #[default]
    Ok,
    Failed,
}

/// One image's plume-rise result, or the reason there is none.
#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeasurementRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub image_id: String,
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default)]
    pub status: Status,
    pub phi_deg: Option<f64>,
    /// Raw `φ − azimuth`, unnormalized.
    pub theta_deg: Option<f64>,
    pub x_R_px: Option<f64>,
    pub z_R_px: Option<f64>,
    pub X_R_m: Option<f64>,
    #[serde(default)]
    pub Y_R_m: Option<f64>,
    pub Z_R_m: Option<f64>,
    pub G_R: Option<f64>,
    pub delta_z_m: Option<f64>,
    pub x_max_m: Option<f64>,
    #[serde(default)]
    pub flags: BTreeSet<Flag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MeasurementRecord {
    pub fn failed(image_id: impl Into<String>, timestamp: Option<DateTime<Utc>>, error: impl Into<String>) -> Self {
        Self {
            image_id: image_id.into(),
            timestamp,
            status: Status::Failed,
            error: Some(error.into()),
            ..Self::default()
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == Status::Ok
    }

    pub fn to_json_line(&self) -> String {
        // a struct of plain fields and string-keyed maps always serializes
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Append-only line-per-record log shared between worker threads.
#[derive(Debug)]
pub struct RecordLog {
    file: Mutex<File>,
}

impl RecordLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn append(&self, record: &MeasurementRecord) -> io::Result<()> {
        let mut line = record.to_json_line();
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())?;
        f.flush()
    }
}

pub fn read_records(path: &Path) -> io::Result<Vec<MeasurementRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
    }
    Ok(out)
}
