use super::config::SiteConfig;
use super::record::{Flag, MeasurementRecord};
use super::wind::{parse_instant, WindError, WindTable};
use crate::geometry::{locate_point_r, plume_rise, wind_plane_angle, CameraModel, GeometryError, GroundSolution, ImagePoint, PlumeRise};
use crate::mask::{
    attached_component, centerline_with, fit_asymptote, parse_pnm, select_r, AsymptoteFit, CenterlineMode,
    CenterlineProfile, MaskError, PlumeMask, PnmError, PointR, DEFAULT_SLOPE_TOL,
};
use chrono::{DateTime, TimeDelta, Utc};
use serde::Deserialize;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("reading mask: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Pnm(#[from] PnmError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Wind(#[from] WindError),
    #[error("mask is {got:?} px but the camera expects {expected:?}")]
    SizeMismatch { got: (u32, u32), expected: (u32, u32) },
    #[error("no timestamp: neither a sidecar nor the file name carries one")]
    NoTimestamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureOptions {
    pub slope_tol: f64,
    pub centerline: CenterlineMode,
    pub max_wind_gap: TimeDelta,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            slope_tol: DEFAULT_SLOPE_TOL,
            centerline: CenterlineMode::ColumnMean,
            max_wind_gap: super::wind::DEFAULT_MAX_GAP,
        }
    }
}

impl MeasureOptions {
    pub fn from_config(cfg: &SiteConfig) -> Self {
        Self {
            slope_tol: cfg.analysis.slope_tol,
            centerline: cfg.analysis.centerline,
            max_wind_gap: TimeDelta::seconds(cfg.analysis.max_wind_gap_s),
        }
    }
}

/// Every intermediate of a successful measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub profile: CenterlineProfile,
    pub fit: AsymptoteFit,
    pub point_r: PointR,
    pub ground: GroundSolution,
    pub rise: PlumeRise,
}

/// Runs component isolation, centerline, fit, R selection and the ground
/// transformation for one mask and one wind direction.
pub fn measure_mask(
    mask: &PlumeMask,
    cam: &CameraModel,
    phi_deg: f64,
    opts: &MeasureOptions,
) -> Result<Measurement, MeasureError> {
    let expected = (cam.width_px(), cam.height_px());
    if (mask.width(), mask.height()) != expected {
        return Err(MeasureError::SizeMismatch { got: (mask.width(), mask.height()), expected });
    }
    let component = attached_component(mask, cam.stack_px());
    let profile = centerline_with(&component, cam.stack_px(), opts.centerline)?;
    let fit = fit_asymptote(&profile)?;
    let point_r = select_r(&fit, &profile, opts.slope_tol)?;
    let angle = wind_plane_angle(phi_deg, cam.plane_azimuth_deg());
    let p = ImagePoint { x_px: point_r.x_r_px, z_px: point_r.z_r_px };
    let ground = locate_point_r(cam, p, &angle)?;
    let rise = plume_rise(cam, &ground, point_r.z_r_px);
    Ok(Measurement { profile, fit, point_r, ground, rise })
}

/// Record for one mask. Failures become records rather than errors.
pub fn measurement_record(
    image_id: &str,
    timestamp: Option<DateTime<Utc>>,
    mask: &PlumeMask,
    cam: &CameraModel,
    phi_deg: f64,
    opts: &MeasureOptions,
) -> MeasurementRecord {
    let theta = wind_plane_angle(phi_deg, cam.plane_azimuth_deg()).raw_deg;
    match measure_mask(mask, cam, phi_deg, opts) {
        Ok(m) => {
            let mut flags = std::collections::BTreeSet::new();
            if m.point_r.truncated {
                flags.insert(Flag::Truncated);
            }
            if m.rise.negative_rise {
                flags.insert(Flag::NegativeRise);
            }
            MeasurementRecord {
                run_id: None,
                image_id: image_id.to_owned(),
                timestamp,
                status: super::record::Status::Ok,
                phi_deg: Some(phi_deg),
                theta_deg: Some(theta),
                x_R_px: Some(m.point_r.x_r_px),
                z_R_px: Some(m.point_r.z_r_px),
                X_R_m: Some(m.ground.x_r_m),
                Y_R_m: Some(m.ground.y_r_m),
                Z_R_m: Some(m.rise.z_r_m),
                G_R: Some(m.ground.g_r_m_per_px),
                delta_z_m: Some(m.rise.delta_z_m),
                x_max_m: Some(m.rise.x_max_m),
                flags,
                error: None,
            }
        }
        Err(e) => {
            let mut rec = MeasurementRecord::failed(image_id, timestamp, e.to_string());
            rec.phi_deg = Some(phi_deg);
            rec.theta_deg = Some(theta);
            match e {
                MeasureError::Mask(MaskError::FitDiverged) => {
                    rec.flags.insert(Flag::FitDiverged);
                }
                MeasureError::Mask(MaskError::VerticalPlume) => {
                    rec.flags.insert(Flag::VerticalPlume);
                }
                _ => {}
            }
            rec
        }
    }
}

/// `<id>_YYYYMMDDTHHMMSSZ.<ext>` → (id, timestamp). Names without the
/// suffix yield the whole stem as id.
pub fn parse_mask_name(path: &Path) -> (String, Option<DateTime<Utc>>) {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    if let Some((id, ts)) = stem.rsplit_once('_') {
        if ts.len() == 16 {
            if let Some(t) = parse_instant(ts) {
                return (id.to_owned(), Some(t));
            }
        }
    }
    (stem.to_owned(), None)
}

#[derive(Debug, Deserialize)]
struct Sidecar {
    image_id: Option<String>,
    timestamp: Option<String>,
}

/// Identity from `<stem>.json` next to the mask when present, else from the file name.
pub fn mask_identity(path: &Path) -> (String, Option<DateTime<Utc>>) {
    let (mut id, mut ts) = parse_mask_name(path);
    let sidecar = path.with_extension("json");
    if let Ok(text) = std::fs::read_to_string(&sidecar) {
        if let Ok(meta) = serde_json::from_str::<Sidecar>(&text) {
            if let Some(i) = meta.image_id {
                id = i;
            }
            if let Some(t) = meta.timestamp.as_deref().and_then(parse_instant) {
                ts = Some(t);
            }
        }
    }
    (id, ts)
}

pub fn is_mask_file(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("pgm" | "pbm" | "pnm")
    )
}

/// Reads one mask, looks up its wind and measures it.
pub fn process_mask_file(path: &Path, cam: &CameraModel, wind: &WindTable, opts: &MeasureOptions) -> MeasurementRecord {
    let (id, ts) = mask_identity(path);
    let fail = |e: MeasureError| MeasurementRecord::failed(id.clone(), ts, e.to_string());
    let Some(t) = ts else {
        return fail(MeasureError::NoTimestamp);
    };
    let w = match wind.wind_at(t, opts.max_wind_gap) {
        Ok(w) => w,
        Err(e) => return fail(e.into()),
    };
    let mask = match std::fs::read(path).map_err(MeasureError::from).and_then(|b| Ok(parse_pnm(&b)?)) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    measurement_record(&id, ts, &mask, cam, w.phi_deg, opts)
}
