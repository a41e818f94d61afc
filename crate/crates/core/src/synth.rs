//! Synthetic plume masks with known rise, for round-trip testing.
//!
//! A Briggs trajectory is laid along the wind direction from the stack,
//! projected through the camera and rasterized column by column as a band
//! around the projected centerline.

use crate::briggs::{
    buoyancy_flux, momentum_flux, rise_at_distance, AmbientConditions, BriggsError, BuoyancyForm, StackSpec,
};
use crate::geometry::{wind_plane_angle, CameraModel, CameraParams, GeometryError, ImagePoint};
use crate::io::record::{Flag, MeasurementRecord, Status};
use crate::io::config::{load_roster, SITE_ROSTER_CSV};
use crate::mask::{
    fit_asymptote, select_r, CenterlineProfile, ColumnSample, MaskError, PlumeDirection, PlumeMask, DEFAULT_SLOPE_TOL,
    MIN_FIT_COLUMNS,
};
use chrono::{DateTime, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Camera(#[from] GeometryError),
    #[error(transparent)]
    Briggs(#[from] BriggsError),
    #[error("plume leaves the frame: {0}")]
    OutOfFrame(String),
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("plume still climbs {slope:.3} px/px at the end of the {window_m} m window")]
    NotLeveled { slope: f64, window_m: f64 },
    #[error(transparent)]
    Mask(#[from] MaskError),
}

/// Plume half-thickness as a function of downwind distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spread {
    /// `factor · Δz(s)`.
    RiseProportional { factor: f64 },
    /// `factor · s`.
    Linear { factor: f64 },
}

impl Default for Spread {
    fn default() -> Self {
        Spread::Linear { factor: 0.6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    #[default]
    None,
    /// Each column's upper and lower edge moves by a uniform integer in `[-px, px]`.
    BoundaryJitter { px: u32 },
}

fn default_window() -> f64 {
    2000.0
}

fn default_slope_tol() -> f64 {
    DEFAULT_SLOPE_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthScenario {
    pub image_id: String,
    pub timestamp: DateTime<Utc>,
    pub phi_deg: f64,
    #[serde(default)]
    pub seed: u64,
    /// Downwind distance over which the trajectory is drawn, in m.
    #[serde(default = "default_window")]
    pub window_m: f64,
    #[serde(default)]
    pub spread: Spread,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub buoyancy: BuoyancyForm,
    /// Leveling threshold used to place the true point R, px/px.
    #[serde(default = "default_slope_tol")]
    pub slope_tol: f64,
    pub camera: CameraParams,
    pub stack: StackSpec,
    pub ambient: AmbientConditions,
}

impl SynthScenario {
    pub fn from_toml_str(s: &str) -> Result<Self, SynthError> {
        Ok(toml::from_str(s)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// The tall-stack site: 2592×1944 camera 5180 m away, image plane at
    /// azimuth 252°, wind `theta_deg` off the plane at `wind_mps`.
    pub fn site(theta_deg: f64, wind_mps: f64) -> Self {
        let stack = load_roster(SITE_ROSTER_CSV.as_bytes())
            .ok()
            .and_then(|r| r.into_iter().find(|s| s.id == "12908"))
            .expect("built-in roster lists the tall stack");
        Self {
            image_id: format!("syn_t{theta_deg}_u{wind_mps}"),
            timestamp: Utc.with_ymd_and_hms(2019, 11, 8, 18, 0, 13).unwrap(),
            phi_deg: (252.0 + theta_deg).rem_euclid(360.0),
            seed: 0,
            window_m: default_window(),
            spread: Spread::default(),
            noise: Noise::None,
            buoyancy: BuoyancyForm::Standard,
            slope_tol: DEFAULT_SLOPE_TOL,
            camera: CameraParams {
                width_px: 2592,
                height_px: 1944,
                fov_deg: Some(2.0 * SITE_TAN_HALF_FOV.atan().to_degrees()),
                focal_length_mm: None,
                pixel_size_um: None,
                stack_distance_m: 5180.0,
                plane_azimuth_deg: 252.0,
                stack_px: (1296, 1500),
            },
            stack,
            ambient: AmbientConditions::new(288.0, wind_mps),
        }
    }
}

/// tan(α/2) for which a 2592×1944 camera 5180 m from the stack resolves 1.6647 m/px.
pub const SITE_TAN_HALF_FOV: f64 = 1.6647 * 3240.0 / (2.0 * 5180.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Window,
    FrameExit,
    Leveled,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub mask: PlumeMask,
    pub truth: MeasurementRecord,
    pub end_reason: EndReason,
    pub end_distance_m: f64,
    /// Number of rasterized columns.
    pub columns: usize,
}

pub fn generate(scn: &SynthScenario) -> Result<(PlumeMask, MeasurementRecord), SynthError> {
    let out = generate_detailed(scn)?;
    Ok((out.mask, out.truth))
}

pub fn generate_detailed(scn: &SynthScenario) -> Result<SynthOutput, SynthError> {
    let cam = CameraModel::new(&scn.camera)?;
    scn.stack.validate()?;
    scn.ambient.validate()?;
    if !(scn.window_m > 0.0) || !(scn.slope_tol > 0.0) {
        return Err(SynthError::Scenario("window and slope tolerance must be positive".into()));
    }
    let angle = wind_plane_angle(scn.phi_deg, cam.plane_azimuth_deg());
    if angle.magnitude_deg >= 85.0 {
        return Err(SynthError::Scenario(format!(
            "wind is {:.1}° off the image plane; at most 85° is supported",
            angle.magnitude_deg
        )));
    }
    let (sc, sr) = cam.stack_px();
    let stack_pt = cam.pixel_to_image(f64::from(sc), f64::from(sr));
    if stack_pt.x_px.abs() > 1.0 {
        return Err(SynthError::Scenario("the stack column must be the central column".into()));
    }
    if stack_pt.z_px > 0.0 {
        return Err(SynthError::Scenario("the stack exit must sit at or below the image center".into()));
    }

    let mut r = angle.raw_deg.rem_euclid(360.0);
    if r > 180.0 {
        r -= 360.0;
    }
    // unit plume direction: image right, toward camera
    let (dy, dx) = r.to_radians().sin_cos();
    let f_m = momentum_flux(&scn.stack, &scn.ambient);
    let f_b = buoyancy_flux(&scn.stack, &scn.ambient, scn.buoyancy);
    let (u, beta) = (scn.ambient.mean_wind_mps, scn.ambient.entrainment);

    let g = cam.ground_sample_distance();
    let d = cam.stack_distance_m();
    let z_st = g * stack_pt.z_px;
    let (w, h) = (cam.width_px(), cam.height_px());

    let mut mask = PlumeMask::new(w, h);
    mask.source_id = scn.image_id.clone();
    mask.timestamp = Some(scn.timestamp);

    let truth_at = |s: f64, rise: f64, flags: Vec<Flag>| -> MeasurementRecord {
        let scale = d / (d - s * dy) / g;
        let p = ImagePoint { x_px: s * dx * scale, z_px: (z_st + rise) * scale };
        MeasurementRecord {
            run_id: None,
            image_id: scn.image_id.clone(),
            timestamp: Some(scn.timestamp),
            status: Status::Ok,
            phi_deg: Some(scn.phi_deg),
            theta_deg: Some(angle.raw_deg),
            x_R_px: Some(p.x_px),
            z_R_px: Some(p.z_px),
            X_R_m: Some(s * dx),
            Y_R_m: Some(s * dy),
            Z_R_m: Some(z_st + rise),
            G_R: Some(g * (d - s * dy) / d),
            delta_z_m: Some(rise),
            x_max_m: Some(s),
            flags: flags.into_iter().collect(),
            error: None,
        }
    };

    if f_m == 0.0 && f_b == 0.0 {
        return Ok(SynthOutput {
            mask,
            truth: truth_at(0.0, 0.0, vec![]),
            end_reason: EndReason::Window,
            end_distance_m: 0.0,
            columns: 0,
        });
    }

    let half_width_m = |s: f64, rise: f64| match scn.spread {
        Spread::RiseProportional { factor } => factor * rise,
        Spread::Linear { factor } => factor * s,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scn.seed);
    let jitter = match scn.noise {
        Noise::None => 0,
        Noise::BoundaryJitter { px } => i64::from(px),
    };

    let step: i64 = if dx >= 0.0 { 1 } else { -1 };
    let mut col = i64::from(sc);
    if step < 0 {
        col -= 1;
    }
    mask.set(sc, sr, true);
    let mut prev: (i64, i64) = (i64::from(sr), i64::from(sr));
    let mut drawn: Vec<Drawn> = Vec::new();
    let end_reason = loop {
        if col < 0 || col >= i64::from(w) {
            break EndReason::FrameExit;
        }
        let x = cam.pixel_to_image(col as f64, 0.0).x_px;
        let Some(s) = distance_at(x, dx, dy, d, g) else {
            break EndReason::FrameExit;
        };
        if s > scn.window_m {
            break EndReason::Window;
        }
        let rise = rise_at_distance(f_m, f_b, u, s, beta)?;
        let scale = d / (d - s * dy) / g;
        let center = ImagePoint { x_px: x, z_px: (z_st + rise) * scale };
        let hw_px = (half_width_m(s, rise) * scale).max(0.5);
        let (_, center_row) = cam.image_to_pixel(center);
        let lo_f = center_row - hw_px;
        let hi_f = center_row + hw_px;
        if lo_f < 0.0 || hi_f > f64::from(h - 1) {
            break EndReason::FrameExit;
        }
        let mut lo = lo_f.ceil() as i64;
        let mut hi = hi_f.floor() as i64;
        if lo > hi {
            let r = center_row.round() as i64;
            lo = r;
            hi = r;
        }
        if jitter > 0 {
            lo += rng.random_range(-jitter..=jitter);
            hi += rng.random_range(-jitter..=jitter);
            lo = lo.clamp(0, i64::from(h) - 1);
            hi = hi.clamp(0, i64::from(h) - 1);
            if lo > hi {
                std::mem::swap(&mut lo, &mut hi);
            }
        }
        if col == i64::from(sc) {
            lo = lo.min(prev.0);
            hi = hi.max(prev.1);
        } else {
            // keep 8-connectivity with the previous column
            lo = lo.min(prev.1 + 1);
            hi = hi.max(prev.0 - 1);
        }
        for row in lo..=hi {
            mask.set(col as u32, row as u32, true);
        }
        prev = (lo, hi);
        drawn.push(Drawn { col: col as u32, center_row, lo: lo as u32, hi: hi as u32 });
        col += step;
    };

    if drawn.len() < MIN_FIT_COLUMNS {
        return Err(SynthError::OutOfFrame(format!(
            "only {} columns fit before the plume leaves the raster",
            drawn.len()
        )));
    }

    // Level point: the same asymptote fit and slope rule the measurement
    // uses, applied to the exact centerline.
    // a left-going plume leaves only the stack pixel in the stack column,
    // which the mask centerline still samples
    let stack_sample = (step < 0).then_some(ColumnSample { col: sc, center_row: f64::from(sr), upper_row: sr, lower_row: sr });
    let profile = CenterlineProfile {
        columns: stack_sample
            .into_iter()
            .chain(drawn.iter().map(|c| ColumnSample { col: c.col, center_row: c.center_row, upper_row: c.lo, lower_row: c.hi }))
            .collect(),
        stack_col: sc,
        stack_row: sr,
        direction: if step > 0 { PlumeDirection::Right } else { PlumeDirection::Left },
        width_px: w,
        height_px: h,
    };
    let fit = fit_asymptote(&profile)?;
    let r = select_r(&fit, &profile, scn.slope_tol).map_err(|e| match e {
        MaskError::NotLeveled { slope } => SynthError::NotLeveled { slope, window_m: scn.window_m },
        other => SynthError::Mask(other),
    })?;
    let x_end = if r.truncated {
        let last = drawn.last().expect("checked above");
        cam.pixel_to_image(f64::from(last.col), 0.0).x_px
    } else {
        r.x_r_px
    };
    let s_end = distance_at(x_end, dx, dy, d, g).expect("inside the drawn range");
    let rise_end = rise_at_distance(f_m, f_b, u, s_end, beta)?;
    let (end_reason, flags) = if r.truncated {
        (end_reason, vec![Flag::Truncated])
    } else {
        (EndReason::Leveled, vec![])
    };
    Ok(SynthOutput {
        mask,
        truth: truth_at(s_end, rise_end, flags),
        end_reason,
        end_distance_m: s_end,
        columns: drawn.len(),
    })
}

struct Drawn {
    col: u32,
    center_row: f64,
    lo: u32,
    hi: u32,
}

/// Downwind distance whose centerline projects to image column offset `x`,
/// inverting `x = s·dx·D / ((D − s·dy)·G)`.
fn distance_at(x: f64, dx: f64, dy: f64, d: f64, g: f64) -> Option<f64> {
    let denom = d * dx + x * g * dy;
    if !(denom.abs() > 0.0) {
        return None;
    }
    let s = (x * g * d / denom).max(0.0);
    (d - s * dy > 0.0).then_some(s)
}
