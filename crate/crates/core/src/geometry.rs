//! Single-camera, wind-constrained conversion from image pixels to
//! real-world plume-rise quantities.
//!
//! Conventions used throughout:
//!
//! * Image points are center-origin: `x_px` grows to the right and `z_px`
//!   grows upward. Raster `(col, row)` pixel centers map to
//!   `x = col + 0.5 - W/2` and `z = H/2 - row - 0.5`.
//! * The smokestack sits on the optical axis at distance `D` from the
//!   camera. The image plane through the stack is perpendicular to the axis.
//! * Ground offsets are measured from the stack: `X` along the image plane
//!   (right positive) and `Y` toward the camera.
//! * A wind blowing *from* `plane_azimuth_deg` carries the plume to image
//!   right, parallel to the image plane. The camera looks along
//!   `plane_azimuth_deg + 90°`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Sensor pixel pitch in µm/px from focal length (mm) and diagonal field of view.
pub fn pixel_size_um(focal_length_mm: f64, fov_deg: f64, width_px: u32, height_px: u32) -> Result<f64> {
    if !(focal_length_mm > 0.0) {
        return Err(GeometryError::InvalidCamera(format!(
            "focal length must be positive, got {focal_length_mm}"
        )));
    }
    check_fov(fov_deg)?;
    let diag = diagonal_px(width_px, height_px)?;
    Ok(2.0 * focal_length_mm * half_fov_tan(fov_deg) / diag * 1000.0)
}

/// Ground sample distance in m/px at the stack plane.
pub fn ground_sample_distance_m(stack_distance_m: f64, fov_deg: f64, width_px: u32, height_px: u32) -> Result<f64> {
    check_fov(fov_deg)?;
    let diag = diagonal_px(width_px, height_px)?;
    Ok(2.0 * stack_distance_m * half_fov_tan(fov_deg) / diag)
}

/// Ground distance spanned by the image width at the stack plane.
pub fn ground_width_m(gsd_m_per_px: f64, width_px: u32) -> f64 {
    gsd_m_per_px * f64::from(width_px)
}

fn half_fov_tan(fov_deg: f64) -> f64 {
    (fov_deg.to_radians() / 2.0).tan()
}

fn check_fov(fov_deg: f64) -> Result<()> {
    if fov_deg > 0.0 && fov_deg < 180.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidCamera(format!(
            "field of view must lie in (0, 180) degrees, got {fov_deg}"
        )))
    }
}

fn diagonal_px(width_px: u32, height_px: u32) -> Result<f64> {
    let d = f64::from(width_px).hypot(f64::from(height_px));
    if d > 0.0 {
        Ok(d)
    } else {
        Err(GeometryError::InvalidCamera("raster has zero size".into()))
    }
}

/// Raw camera and site parameters as supplied by configuration.
///
/// At least one of `fov_deg` or (`focal_length_mm` with `pixel_size_um`)
/// must be present. When all three are given they must agree within 0.1%.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub width_px: u32,
    pub height_px: u32,
    pub fov_deg: Option<f64>,
    pub focal_length_mm: Option<f64>,
    pub pixel_size_um: Option<f64>,
    pub stack_distance_m: f64,
    pub plane_azimuth_deg: f64,
    pub stack_px: (u32, u32),
}

/// Validated camera/site model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    width_px: u32,
    height_px: u32,
    fov_deg: f64,
    focal_length_mm: Option<f64>,
    stack_distance_m: f64,
    plane_azimuth_deg: f64,
    stack_px: (u32, u32),
}

const FOCAL_FOV_REL_TOL: f64 = 1e-3;

impl CameraModel {
    pub fn new(params: &CameraParams) -> Result<Self> {
        let CameraParams {
            width_px,
            height_px,
            fov_deg,
            focal_length_mm,
            pixel_size_um,
            stack_distance_m,
            plane_azimuth_deg,
            stack_px,
        } = *params;
        if width_px == 0 || height_px == 0 {
            return Err(GeometryError::InvalidCamera("raster dimensions must be positive".into()));
        }
        if !(stack_distance_m > 0.0) || !stack_distance_m.is_finite() {
            return Err(GeometryError::InvalidCamera(format!(
                "stack distance must be positive, got {stack_distance_m}"
            )));
        }
        if !plane_azimuth_deg.is_finite() {
            return Err(GeometryError::InvalidCamera("plane azimuth must be finite".into()));
        }
        if stack_px.0 >= width_px || stack_px.1 >= height_px {
            return Err(GeometryError::InvalidCamera(format!(
                "stack pixel {stack_px:?} lies outside the {width_px}x{height_px} raster"
            )));
        }
        if let Some(f) = focal_length_mm {
            if !(f > 0.0) {
                return Err(GeometryError::InvalidCamera(format!("focal length must be positive, got {f}")));
            }
        }
        let diag = diagonal_px(width_px, height_px)?;
        let derived_fov = match (focal_length_mm, pixel_size_um) {
            (Some(f), Some(p)) if p > 0.0 => {
                // tan(α/2) = P·diag / 2F, P converted to mm.
                Some(2.0 * (p / 1000.0 * diag / (2.0 * f)).atan().to_degrees())
            }
            (_, Some(p)) => {
                return Err(GeometryError::InvalidCamera(format!("pixel size must be positive, got {p}")))
            }
            _ => None,
        };
        let fov_deg = match (fov_deg, derived_fov) {
            (Some(a), Some(b)) => {
                check_fov(a)?;
                let ta = half_fov_tan(a);
                let tb = half_fov_tan(b);
                if ((ta - tb) / ta).abs() > FOCAL_FOV_REL_TOL {
                    return Err(GeometryError::InvalidCamera(format!(
                        "field of view {a}° is inconsistent with focal length and pixel size (implies {b:.4}°)"
                    )));
                }
                a
            }
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (None, None) => {
                return Err(GeometryError::InvalidCamera(
                    "need fov_deg, or focal_length_mm together with pixel_size_um".into(),
                ))
            }
        };
        check_fov(fov_deg)?;
        Ok(Self {
            width_px,
            height_px,
            fov_deg,
            focal_length_mm,
            stack_distance_m,
            plane_azimuth_deg: plane_azimuth_deg.rem_euclid(360.0),
            stack_px,
        })
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn focal_length_mm(&self) -> Option<f64> {
        self.focal_length_mm
    }

    pub fn stack_distance_m(&self) -> f64 {
        self.stack_distance_m
    }

    pub fn plane_azimuth_deg(&self) -> f64 {
        self.plane_azimuth_deg
    }

    pub fn stack_px(&self) -> (u32, u32) {
        self.stack_px
    }

    /// Pixel pitch in µm/px; needs a focal length.
    pub fn pixel_size_um(&self) -> Result<f64> {
        let f = self
            .focal_length_mm
            .ok_or_else(|| GeometryError::InvalidCamera("pixel size needs a focal length".into()))?;
        pixel_size_um(f, self.fov_deg, self.width_px, self.height_px)
    }

    /// G, meters per pixel at the stack plane.
    pub fn ground_sample_distance(&self) -> f64 {
        2.0 * self.stack_distance_m * half_fov_tan(self.fov_deg)
            / f64::from(self.width_px).hypot(f64::from(self.height_px))
    }

    /// T, ground width covered by the image at the stack plane.
    pub fn ground_width(&self) -> f64 {
        ground_width_m(self.ground_sample_distance(), self.width_px)
    }

    /// Center-origin image point of a raster pixel center.
    pub fn pixel_to_image(&self, col: f64, row: f64) -> ImagePoint {
        ImagePoint {
            x_px: col + 0.5 - f64::from(self.width_px) / 2.0,
            z_px: f64::from(self.height_px) / 2.0 - row - 0.5,
        }
    }

    /// Inverse of [`CameraModel::pixel_to_image`], returning fractional `(col, row)`.
    pub fn image_to_pixel(&self, p: ImagePoint) -> (f64, f64) {
        (
            p.x_px - 0.5 + f64::from(self.width_px) / 2.0,
            f64::from(self.height_px) / 2.0 - p.z_px - 0.5,
        )
    }

    /// Signed vertical offset of the stack exit from the image center, in px.
    pub fn stack_z_px(&self) -> f64 {
        let (c, r) = self.stack_px;
        self.pixel_to_image(f64::from(c), f64::from(r)).z_px
    }

    /// Perspective projection of a ground point (relative to the stack) to the image.
    ///
    /// `height_m` is measured relative to the camera horizon, i.e. the same
    /// datum as `Z_st`. Returns `None` for points at or behind the camera.
    pub fn project(&self, ground: GroundPoint) -> Option<ImagePoint> {
        let d = self.stack_distance_m;
        let depth = d - ground.y_m;
        if !(depth > 0.0) {
            return None;
        }
        let scale = d / depth / self.ground_sample_distance();
        Some(ImagePoint {
            x_px: ground.x_m * scale,
            z_px: ground.height_m * scale,
        })
    }
}

/// A point in the scene relative to the stack base line of sight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPoint {
    /// In-plane offset from the stack, right positive.
    pub x_m: f64,
    /// Offset toward the camera.
    pub y_m: f64,
    /// Height relative to the camera horizon.
    pub height_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub x_px: f64,
    pub z_px: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lateral {
    Left,
    Right,
    /// Wind blows straight along the line of sight.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    TowardCamera,
    AwayFromCamera,
    InPlane,
}

/// Wind direction relative to the image plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneAngle {
    /// `φ − azimuth`, unnormalized. This is the value printed in records.
    pub raw_deg: f64,
    /// Folded into (−90°, 90°]; positive when the plume moves toward the camera
    /// while travelling right (or away while travelling left).
    pub signed_deg: f64,
    /// `|signed_deg|`, in [0°, 90°].
    pub magnitude_deg: f64,
    pub lateral: Lateral,
    pub depth: Depth,
}

/// Angle between the wind and the image plane for a wind blowing from `phi_deg`.
pub fn wind_plane_angle(phi_deg: f64, plane_azimuth_deg: f64) -> PlaneAngle {
    let raw = phi_deg - plane_azimuth_deg;
    // fold into (-180, 180]
    let mut r = raw.rem_euclid(360.0);
    if r > 180.0 {
        r -= 360.0;
    }
    let signed = if r > 90.0 {
        r - 180.0
    } else if r <= -90.0 {
        r + 180.0
    } else {
        r
    };
    let (s, c) = r.to_radians().sin_cos();
    const EPS: f64 = 1e-12;
    let lateral = if c > EPS {
        Lateral::Right
    } else if c < -EPS {
        Lateral::Left
    } else {
        Lateral::None
    };
    let depth = if s > EPS {
        Depth::TowardCamera
    } else if s < -EPS {
        Depth::AwayFromCamera
    } else {
        Depth::InPlane
    };
    PlaneAngle {
        raw_deg: raw,
        signed_deg: signed,
        magnitude_deg: signed.abs(),
        lateral,
        depth,
    }
}

/// Real-world location of point R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundSolution {
    /// In-plane offset where the line of sight through R crosses the stack plane.
    pub x_m: f64,
    pub gamma_deg: f64,
    pub x_r_m: f64,
    pub y_r_m: f64,
    pub g_r_m_per_px: f64,
    pub z_r_m: f64,
}

/// Places image point `p` on the vertical plane containing the stack and
/// the wind vector, then scales its height by the local sample distance.
pub fn locate_point_r(cam: &CameraModel, p: ImagePoint, angle: &PlaneAngle) -> Result<GroundSolution> {
    let theta = angle.signed_deg;
    if !(theta.abs() < 90.0) {
        return Err(GeometryError::DegenerateGeometry(format!(
            "wind is perpendicular to the image plane (θ = {theta}°)"
        )));
    }
    if p.x_px == 0.0 && theta != 0.0 {
        return Err(GeometryError::DegenerateGeometry(
            "point lies on the optical axis while the wind leaves the image plane".into(),
        ));
    }
    let d = cam.stack_distance_m;
    let g = cam.ground_sample_distance();
    let x = cam.ground_width() * p.x_px / f64::from(cam.width_px);
    let tan_gamma = x / d;
    let tan_theta = theta.to_radians().tan();
    // X_R = D / (tanθ + 1/tanγ), rearranged to stay finite at γ = 0.
    let denom = 1.0 + tan_theta * tan_gamma;
    if !(denom > 0.0) {
        return Err(GeometryError::DegenerateGeometry(
            "line of sight never meets the wind line in front of the camera".into(),
        ));
    }
    let x_r = x / denom;
    let y_r = x_r * tan_theta;
    let g_r = if p.x_px == 0.0 { g } else { x_r / p.x_px };
    Ok(GroundSolution {
        x_m: x,
        gamma_deg: tan_gamma.atan().to_degrees(),
        x_r_m: x_r,
        y_r_m: y_r,
        g_r_m_per_px: g_r,
        z_r_m: g_r * p.z_px,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlumeRise {
    pub z_r_m: f64,
    pub z_st_m: f64,
    pub delta_z_m: f64,
    pub x_max_m: f64,
    /// R sits below the stack exit.
    pub negative_rise: bool,
}

/// Plume rise above the stack exit and its horizontal distance from the stack.
pub fn plume_rise(cam: &CameraModel, sol: &GroundSolution, z_r_px: f64) -> PlumeRise {
    let z_r = sol.g_r_m_per_px * z_r_px;
    let z_st = cam.ground_sample_distance() * cam.stack_z_px();
    PlumeRise {
        z_r_m: z_r,
        z_st_m: z_st,
        delta_z_m: z_st.abs() + z_r,
        x_max_m: sol.x_r_m.hypot(sol.y_r_m),
        negative_rise: z_r < -z_st.abs(),
    }
}
