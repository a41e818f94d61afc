//! File formats, configuration and batch orchestration.

pub mod config;
pub mod eval;
pub mod pipeline;
pub mod record;
pub mod wind;

pub use config::{ConfigError, SiteConfig};
pub use pipeline::{measure_mask, measurement_record, process_mask_file, MeasureError, MeasureOptions, Measurement};
pub use record::{Flag, MeasurementRecord, RecordLog, Status};
pub use wind::{load_wind_csv, WindError, WindRecord, WindTable};
