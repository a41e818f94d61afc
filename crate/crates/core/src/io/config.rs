use crate::briggs::{BuoyancyForm, StackSpec, DEFAULT_ENTRAINMENT};
use crate::geometry::{CameraModel, CameraParams, GeometryError};
use crate::mask::{CenterlineMode, DEFAULT_SLOPE_TOL};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Stack roster shipped with the crate.
pub const SITE_ROSTER_CSV: &str = include_str!("../../fixtures/stacks.csv");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Camera(#[from] GeometryError),
    #[error("stack roster: {0}")]
    Roster(#[from] csv::Error),
    #[error("stack {0:?} is not in the roster")]
    UnknownStack(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSection {
    pub width_px: u32,
    pub height_px: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focal_length_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pixel_um: Option<f64>,
    /// `[column, row]` of the stack exit.
    pub stack_px: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSection {
    pub stack_distance_m: f64,
    pub plane_azimuth_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub slope_tol: f64,
    pub centerline: CenterlineMode,
    pub max_wind_gap_s: i64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            slope_tol: DEFAULT_SLOPE_TOL,
            centerline: CenterlineMode::ColumnMean,
            max_wind_gap_s: 3600,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BriggsSection {
    /// Roster CSV, relative to the config file. The built-in roster is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roster: Option<PathBuf>,
    pub air_temp_k: f64,
    pub entrainment: f64,
    pub buoyancy: BuoyancyForm,
}

impl Default for BriggsSection {
    fn default() -> Self {
        Self {
            roster: None,
            air_temp_k: 288.0,
            entrainment: DEFAULT_ENTRAINMENT,
            buoyancy: BuoyancyForm::Standard,
        }
    }
}

/// Site configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteConfig {
    pub camera: CameraSection,
    pub site: SiteSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub briggs: BriggsSection,
    #[serde(skip)]
    base_dir: Option<PathBuf>,
}

impl SiteConfig {
    pub fn new(camera: CameraSection, site: SiteSection) -> Self {
        Self {
            camera,
            site,
            analysis: AnalysisSection::default(),
            briggs: BriggsSection::default(),
            base_dir: None,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.base_dir = path.parent().map(Path::to_owned);
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn camera_params(&self) -> CameraParams {
        CameraParams {
            width_px: self.camera.width_px,
            height_px: self.camera.height_px,
            fov_deg: self.camera.fov_deg,
            focal_length_mm: self.camera.focal_length_mm,
            pixel_size_um: self.camera.pixel_um,
            stack_distance_m: self.site.stack_distance_m,
            plane_azimuth_deg: self.site.plane_azimuth_deg,
            stack_px: self.camera.stack_px,
        }
    }

    pub fn camera_model(&self) -> Result<CameraModel, ConfigError> {
        Ok(CameraModel::new(&self.camera_params())?)
    }

    pub fn roster(&self) -> Result<Vec<StackSpec>, ConfigError> {
        match &self.briggs.roster {
            Some(p) => {
                let path = match &self.base_dir {
                    Some(base) if p.is_relative() => base.join(p),
                    _ => p.clone(),
                };
                let bytes = std::fs::read(&path).map_err(|source| ConfigError::Io { path, source })?;
                load_roster(bytes.as_slice())
            }
            None => load_roster(SITE_ROSTER_CSV.as_bytes()),
        }
    }

    pub fn stack(&self, id: &str) -> Result<StackSpec, ConfigError> {
        self.roster()?
            .into_iter()
            .find(|s| s.id == id)
            .ok_or_else(|| ConfigError::UnknownStack(id.to_owned()))
    }
}

pub fn load_roster<R: std::io::Read>(reader: R) -> Result<Vec<StackSpec>, ConfigError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SITE: &str = r#"
[camera]
width_px = 2592
height_px = 1944
fov_deg = 55.0
stack_px = [1296, 1500]

[site]
stack_distance_m = 5180.0
plane_azimuth_deg = 252.0
stack_id = "12908"

[analysis]
slope_tol = 0.01
"#;

    #[test]
    fn parses_and_builds_camera() {
        let cfg = SiteConfig::from_toml_str(SITE).unwrap();
        assert_eq!(cfg.analysis.slope_tol, 0.01);
        assert_eq!(cfg.analysis.max_wind_gap_s, 3600);
        assert_eq!(cfg.briggs.air_temp_k, 288.0);
        let cam = cfg.camera_model().unwrap();
        assert_eq!(cam.stack_px(), (1296, 1500));
        let back = SiteConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = SITE.replace("slope_tol", "slope_tolerance");
        assert!(matches!(SiteConfig::from_toml_str(&bad), Err(ConfigError::Toml(_))));
    }

    #[test]
    fn builtin_roster() {
        let cfg = SiteConfig::from_toml_str(SITE).unwrap();
        let roster = cfg.roster().unwrap();
        assert_eq!(roster.len(), 6);
        let s = cfg.stack("12908").unwrap();
        assert_eq!((s.height_m, s.diameter_m, s.exit_velocity_mps, s.exit_temp_k), (183.0, 7.9, 12.0, 427.9));
        assert!(matches!(cfg.stack("nope"), Err(ConfigError::UnknownStack(_))));
    }

    #[test]
    fn relative_roster_path() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("r.csv"),
            "id,lat_deg,lon_deg,height_m,diameter_m,exit_velocity_mps,exit_temp_k\nA,0,0,10,1,2,400\n",
        )
        .unwrap();
        let text = format!("{SITE}\n[briggs]\nroster = \"r.csv\"\n");
        std::fs::write(dir.path().join("site.toml"), text).unwrap();
        let cfg = SiteConfig::load(&dir.path().join("site.toml")).unwrap();
        assert_eq!(cfg.stack("A").unwrap().height_m, 10.0);
    }
}
