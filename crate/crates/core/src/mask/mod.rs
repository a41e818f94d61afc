//! Plume mask analysis: parsing, component isolation, centerline extraction,
//! asymptote fitting and point-R selection.

mod centerline;
mod component;
mod fit;
pub mod pnm;

pub use centerline::{centerline, centerline_with, CenterlineMode, CenterlineProfile, ColumnSample, PlumeDirection};
pub use component::attached_component;
pub use fit::{fit_asymptote, select_r, AsymptoteFit, PointR, DEFAULT_SLOPE_TOL, MIN_FIT_COLUMNS};
pub use pnm::{encode_pbm, encode_pgm_ascii, encode_pgm_binary, parse_pnm, PnmError};

use chrono::{DateTime, Utc};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaskError {
    #[error("mask contains no plume pixels")]
    EmptyPlume,
    #[error("need at least {needed} profile columns for a fit, got {got}")]
    TooFewColumns { needed: usize, got: usize },
    #[error("asymptote fit did not converge")]
    FitDiverged,
    #[error("plume is vertical; no downwind distance is defined")]
    VerticalPlume,
    #[error("plume has not leveled: slope {slope:.4} px/px at the last column")]
    NotLeveled { slope: f64 },
    #[error("stack pixel ({0}, {1}) lies outside the mask")]
    StackOutOfBounds(u32, u32),
}

/// Binary plume/background raster. Row-major, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlumeMask {
    width: u32,
    height: u32,
    pixels: Vec<bool>,
    pub source_id: String,
    pub timestamp: Option<DateTime<Utc>>,
}

impl PlumeMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![false; width as usize * height as usize],
            source_id: String::new(),
            timestamp: None,
        }
    }

    /// Panics if `pixels.len() != width * height`.
    pub fn from_pixels(width: u32, height: u32, pixels: Vec<bool>) -> Self {
        assert_eq!(pixels.len(), width as usize * height as usize, "raster size mismatch");
        Self {
            width,
            height,
            pixels,
            source_id: String::new(),
            timestamp: None,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, col: u32, row: u32) -> bool {
        self.pixels[row as usize * self.width as usize + col as usize]
    }

    #[inline]
    pub fn set(&mut self, col: u32, row: u32, value: bool) {
        let w = self.width as usize;
        self.pixels[row as usize * w + col as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().filter(|&&p| p).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.pixels.iter().any(|&p| p)
    }

    /// Upside-down copy.
    pub fn flipped_vertically(&self) -> Self {
        let w = self.width as usize;
        let pixels = self.pixels.chunks(w.max(1)).rev().flatten().copied().collect();
        Self {
            pixels,
            ..self.clone()
        }
    }

    /// Same dimensions and metadata, no plume pixels.
    pub(crate) fn cleared(&self) -> Self {
        Self {
            pixels: vec![false; self.pixels.len()],
            ..self.clone()
        }
    }
}
