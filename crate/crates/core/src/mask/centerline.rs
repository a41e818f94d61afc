use super::{MaskError, PlumeMask};
use crate::loss::{classify_direction, BBox};
pub use crate::loss::PlumeDirection;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

/// Per-column plume extent in raster rows (row 0 at the top).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnSample {
    pub col: u32,
    pub center_row: f64,
    pub upper_row: u32,
    pub lower_row: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterlineMode {
    /// Mean plume row of every column; follows meandering.
    #[default]
    ColumnMean,
    /// Column means replaced by a least-squares quadratic in the column index.
    SmoothQuadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterlineProfile {
    /// Ordered by increasing downwind distance from `stack_col`.
    pub columns: Vec<ColumnSample>,
    pub stack_col: u32,
    pub stack_row: u32,
    pub direction: PlumeDirection,
    pub width_px: u32,
    pub height_px: u32,
}

impl CenterlineProfile {
    /// `(downwind distance, height above stack exit)` pairs in pixels.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        self.columns
            .iter()
            .map(|s| {
                (
                    (f64::from(s.col) - f64::from(self.stack_col)).abs(),
                    f64::from(self.stack_row) - s.center_row,
                )
            })
            .collect()
    }

    /// +1 for plumes travelling right, −1 for left, 0 for vertical.
    pub fn direction_sign(&self) -> f64 {
        match self.direction {
            PlumeDirection::Right => 1.0,
            PlumeDirection::Left => -1.0,
            PlumeDirection::Vertical => 0.0,
        }
    }

    /// Debug dump: `col,center,upper,lower` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("col,center,upper,lower\n");
        for s in &self.columns {
            let _ = writeln!(out, "{},{},{},{}", s.col, s.center_row, s.upper_row, s.lower_row);
        }
        out
    }
}

/// Column-mean centerline of an isolated plume component.
pub fn centerline(mask: &PlumeMask, stack_px: (u32, u32)) -> Result<CenterlineProfile, MaskError> {
    centerline_with(mask, stack_px, CenterlineMode::ColumnMean)
}

pub fn centerline_with(
    mask: &PlumeMask,
    stack_px: (u32, u32),
    mode: CenterlineMode,
) -> Result<CenterlineProfile, MaskError> {
    let (w, h) = (mask.width(), mask.height());
    if stack_px.0 >= w || stack_px.1 >= h {
        return Err(MaskError::StackOutOfBounds(stack_px.0, stack_px.1));
    }
    // (count, row sum, min row, max row) per column
    let mut acc: Vec<(u64, u64, u32, u32)> = vec![(0, 0, u32::MAX, 0); w as usize];
    for (r, row) in mask.pixels().chunks(w as usize).enumerate() {
        for (c, _) in row.iter().enumerate().filter(|(_, &p)| p) {
            let a = &mut acc[c];
            a.0 += 1;
            a.1 += r as u64;
            a.2 = a.2.min(r as u32);
            a.3 = a.3.max(r as u32);
        }
    }
    let occupied: Vec<u32> = (0..w).filter(|&c| acc[c as usize].0 > 0).collect();
    let (Some(&first), Some(&last)) = (occupied.first(), occupied.last()) else {
        return Err(MaskError::EmptyPlume);
    };
    let top = occupied.iter().map(|&c| acc[c as usize].2).min().unwrap_or(0);
    let bottom = occupied.iter().map(|&c| acc[c as usize].3).max().unwrap_or(0);
    let bbox = BBox {
        x: f64::from(first),
        y: f64::from(top),
        w: f64::from(last - first + 1),
        h: f64::from(bottom - top + 1),
    };
    let direction = classify_direction(&bbox, (f64::from(stack_px.0) + 0.5, f64::from(stack_px.1) + 0.5));

    let stack_col = stack_px.0;
    let mut columns: Vec<ColumnSample> = occupied
        .into_iter()
        .filter(|&c| match direction {
            PlumeDirection::Right => c >= stack_col,
            PlumeDirection::Left => c <= stack_col,
            PlumeDirection::Vertical => true,
        })
        .map(|c| {
            let (n, sum, lo, hi) = acc[c as usize];
            ColumnSample {
                col: c,
                center_row: sum as f64 / n as f64,
                upper_row: lo,
                lower_row: hi,
            }
        })
        .collect();
    if columns.is_empty() {
        return Err(MaskError::EmptyPlume);
    }
    columns.sort_by_key(|s| (s.col.abs_diff(stack_col), s.col));
    if mode == CenterlineMode::SmoothQuadratic {
        smooth_quadratic(&mut columns);
    }
    Ok(CenterlineProfile {
        columns,
        stack_col,
        stack_row: stack_px.1,
        direction,
        width_px: w,
        height_px: h,
    })
}

/// Replaces column centers with a least-squares quadratic, clamped to each
/// column's extent.
fn smooth_quadratic(columns: &mut [ColumnSample]) {
    if columns.len() < 3 {
        return;
    }
    let n = columns.len() as f64;
    let mean_c = columns.iter().map(|s| f64::from(s.col)).sum::<f64>() / n;
    // normal equations in centered coordinates
    let mut m = [[0.0f64; 3]; 3];
    let mut rhs = [0.0f64; 3];
    for s in columns.iter() {
        let t = f64::from(s.col) - mean_c;
        let basis = [1.0, t, t * t];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            rhs[i] += basis[i] * s.center_row;
        }
    }
    let Some(q) = solve3(m, rhs) else {
        return;
    };
    for s in columns.iter_mut() {
        let t = f64::from(s.col) - mean_c;
        let v = q[0] + q[1] * t + q[2] * t * t;
        s.center_row = v.clamp(f64::from(s.upper_row), f64::from(s.lower_row));
    }
}

pub(super) fn solve3(mut m: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for k in 0..3 {
        let p = (k..3).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-12 {
            return None;
        }
        m.swap(k, p);
        b.swap(k, p);
        for i in k + 1..3 {
            let f = m[i][k] / m[k][k];
            for j in k..3 {
                m[i][j] -= f * m[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = [0.0; 3];
    for k in (0..3).rev() {
        let s: f64 = (k + 1..3).map(|j| m[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / m[k][k];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn filled_rectangle() {
        let mut m = PlumeMask::new(10, 8);
        for r in 4..=5 {
            for c in 2..=7 {
                m.set(c, r, true);
            }
        }
        let p = centerline(&m, (2, 5)).unwrap();
        assert_eq!(p.direction, PlumeDirection::Right);
        assert_eq!(p.columns.len(), 6);
        for s in &p.columns {
            assert_eq!(s.center_row, 4.5);
            assert_eq!((s.upper_row, s.lower_row), (4, 5));
        }
        assert_eq!(p.columns[0].col, 2);
    }

    #[test]
    fn single_pixel_column() {
        let mut m = PlumeMask::new(6, 6);
        m.set(3, 2, true);
        let p = centerline(&m, (3, 2)).unwrap();
        let s = p.columns[0];
        assert_eq!((s.center_row, s.upper_row, s.lower_row), (2.0, 2, 2));
    }

    #[test]
    fn empty_mask_errors() {
        assert_eq!(centerline(&PlumeMask::new(4, 4), (1, 1)), Err(MaskError::EmptyPlume));
    }

    #[test]
    fn left_plume_sorted_by_distance() {
        let mut m = PlumeMask::new(20, 10);
        for c in 3..=15 {
            m.set(c, 5, true);
        }
        let p = centerline(&m, (15, 5)).unwrap();
        assert_eq!(p.direction, PlumeDirection::Left);
        let cols: Vec<u32> = p.columns.iter().map(|s| s.col).collect();
        assert_eq!(cols, (3..=15).rev().collect::<Vec<_>>());
    }

    #[test]
    fn quadratic_mode_smooths_a_parabola_exactly() {
        let mut m = PlumeMask::new(40, 60);
        for c in 0..40u32 {
            let t = f64::from(c) - 20.0;
            let row = (50.0 - 0.1 * t * t).round() as u32;
            m.set(c, row, true);
            m.set(c, row + 1, true);
        }
        let p = centerline_with(&m, (0, 10), CenterlineMode::SmoothQuadratic).unwrap();
        for s in &p.columns {
            assert!(s.center_row >= f64::from(s.upper_row) && s.center_row <= f64::from(s.lower_row));
        }
    }

    fn arb_blob() -> impl Strategy<Value = PlumeMask> {
        (3u32..14, 3u32..14).prop_flat_map(|(w, h)| {
            proptest::collection::vec(prop::bool::weighted(0.4), (w * h) as usize)
                .prop_map(move |px| PlumeMask::from_pixels(w, h, px))
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force_column_scan(mask in arb_blob()) {
            prop_assume!(!mask.is_empty());
            let p = centerline(&mask, (0, 0)).unwrap();
            for s in &p.columns {
                let rows: Vec<u32> = (0..mask.height()).filter(|&r| mask.get(s.col, r)).collect();
                let mean = rows.iter().map(|&r| f64::from(r)).sum::<f64>() / rows.len() as f64;
                prop_assert!((s.center_row - mean).abs() < 1e-12);
                prop_assert_eq!(s.upper_row, *rows.first().unwrap());
                prop_assert_eq!(s.lower_row, *rows.last().unwrap());
                prop_assert!(f64::from(s.upper_row) <= s.center_row && s.center_row <= f64::from(s.lower_row));
            }
        }

        #[test]
        fn vertical_flip_is_consistent(mask in arb_blob(), sc in 0u32..3, sr in 0u32..3) {
            prop_assume!(!mask.is_empty());
            let h = mask.height();
            let a = centerline(&mask, (sc, sr)).unwrap();
            let b = centerline(&mask.flipped_vertically(), (sc, h - 1 - sr)).unwrap();
            prop_assert_eq!(a.direction, b.direction);
            prop_assert_eq!(a.columns.len(), b.columns.len());
            // up-positive heights relative to the stack flip sign
            for ((xa, za), (xb, zb)) in a.samples().into_iter().zip(b.samples()) {
                prop_assert_eq!(xa, xb);
                prop_assert!((za + zb).abs() < 1e-9);
            }
        }
    }
}
