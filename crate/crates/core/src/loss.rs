//! Anchor-relative box regression and smokestack-end regression losses.
//!
//! Framework-agnostic scalar math for a single (prediction, ground truth,
//! anchor) triple. Reduction over proposals is left to the caller.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("box {which} has nonpositive size ({w} x {h})")]
    NonPositiveBox { which: &'static str, w: f64, h: f64 },
}

pub type Result<T> = std::result::Result<T, LossError>;

/// Axis-aligned box, top-left corner in raster coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
            ..*self
        }
    }

    fn check(&self, which: &'static str) -> Result<()> {
        if self.w > 0.0 && self.h > 0.0 {
            Ok(())
        } else {
            Err(LossError::NonPositiveBox { which, w: self.w, h: self.h })
        }
    }
}

/// Which way the plume leaves the stack, deciding where the stack end sits
/// on the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlumeDirection {
    /// Stack end at the middle of the bottom edge.
    Vertical,
    /// Plume extends right; stack end at the bottom-left corner.
    Right,
    /// Plume extends left; stack end at the bottom-right corner.
    Left,
}

impl std::str::FromStr for PlumeDirection {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "vertical" => Ok(Self::Vertical),
            "right" => Ok(Self::Right),
            "left" => Ok(Self::Left),
            other => Err(format!("unknown plume direction {other:?}")),
        }
    }
}

/// Box-center offset (as a fraction of box width) within which a plume counts as vertical.
pub const VERTICAL_BAND: f64 = 0.15;

pub fn classify_direction(gt_box: &BBox, stack_px: (f64, f64)) -> PlumeDirection {
    let center = gt_box.x + gt_box.w / 2.0;
    let offset = center - stack_px.0;
    if offset.abs() <= VERTICAL_BAND * gt_box.w {
        PlumeDirection::Vertical
    } else if offset > 0.0 {
        PlumeDirection::Right
    } else {
        PlumeDirection::Left
    }
}

/// `(t_x, t_y, t_w, t_h)` of `bx` relative to `anchor`.
pub fn box_parameterize(bx: &BBox, anchor: &BBox) -> Result<[f64; 4]> {
    bx.check("box")?;
    anchor.check("anchor")?;
    Ok([
        (bx.x - anchor.x) / anchor.w,
        (bx.y - anchor.y) / anchor.h,
        (bx.w / anchor.w).ln(),
        (bx.h / anchor.h).ln(),
    ])
}

/// Anchor-normalized stack-end coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsePoint {
    pub u_x: f64,
    pub u_y: f64,
}

pub fn sse_point(bx: &BBox, anchor: &BBox, dir: PlumeDirection) -> SsePoint {
    let u_y = (bx.y + bx.h - anchor.y - anchor.h) / anchor.h;
    let u_x = match dir {
        PlumeDirection::Vertical => (2.0 * bx.x + bx.w - 2.0 * anchor.x - anchor.w) / (2.0 * anchor.w),
        PlumeDirection::Right => (bx.x - anchor.x) / anchor.w,
        PlumeDirection::Left => (bx.x + bx.w - anchor.x - anchor.w) / anchor.w,
    };
    SsePoint { u_x, u_y }
}

/// Robust penalty applied to each regression residual.
pub trait RobustLoss {
    /// Value and derivative at `d`.
    fn eval(&self, d: f64) -> (f64, f64);
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SmoothL1;

impl RobustLoss for SmoothL1 {
    fn eval(&self, d: f64) -> (f64, f64) {
        smooth_l1(d)
    }
}

pub fn smooth_l1(d: f64) -> (f64, f64) {
    if d.abs() < 1.0 {
        (0.5 * d * d, d)
    } else {
        (d.abs() - 0.5, d.signum())
    }
}

pub fn sse_loss(pred: &BBox, gt: &BBox, anchor: &BBox, dir: PlumeDirection) -> Result<f64> {
    sse_loss_with(&SmoothL1, pred, gt, anchor, dir)
}

pub fn sse_loss_with<R: RobustLoss>(
    robust: &R,
    pred: &BBox,
    gt: &BBox,
    anchor: &BBox,
    dir: PlumeDirection,
) -> Result<f64> {
    pred.check("prediction")?;
    gt.check("ground truth")?;
    anchor.check("anchor")?;
    let u = sse_point(pred, anchor, dir);
    let v = sse_point(gt, anchor, dir);
    Ok(robust.eval(u.u_x - v.u_x).0 + robust.eval(u.u_y - v.u_y).0)
}

pub fn rpn_reg_loss(pred: &BBox, gt: &BBox, anchor: &BBox) -> Result<f64> {
    rpn_reg_loss_with(&SmoothL1, pred, gt, anchor)
}

pub fn rpn_reg_loss_with<R: RobustLoss>(robust: &R, pred: &BBox, gt: &BBox, anchor: &BBox) -> Result<f64> {
    let t = box_parameterize(pred, anchor)?;
    let t_star = box_parameterize(gt, anchor)?;
    Ok(t.iter().zip(&t_star).map(|(a, b)| robust.eval(a - b).0).sum())
}

/// Box regression loss plus `lambda_sse` times the stack-end loss.
pub fn combined_reg_loss(pred: &BBox, gt: &BBox, anchor: &BBox, dir: PlumeDirection, lambda_sse: f64) -> Result<f64> {
    Ok(rpn_reg_loss(pred, gt, anchor)? + lambda_sse * sse_loss(pred, gt, anchor, dir)?)
}

/// Which loss a conformance fixture row checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Sse,
    Rpn,
    Combined,
}

/// One row of a loss conformance table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossFixture {
    pub name: String,
    pub kind: LossKind,
    pub pred_x: f64,
    pub pred_y: f64,
    pub pred_w: f64,
    pub pred_h: f64,
    pub gt_x: f64,
    pub gt_y: f64,
    pub gt_w: f64,
    pub gt_h: f64,
    pub anchor_x: f64,
    pub anchor_y: f64,
    pub anchor_w: f64,
    pub anchor_h: f64,
    pub dir: PlumeDirection,
    pub lambda_sse: f64,
    pub expected: f64,
}

impl LossFixture {
    pub fn evaluate(&self) -> Result<f64> {
        let pred = BBox::new(self.pred_x, self.pred_y, self.pred_w, self.pred_h);
        let gt = BBox::new(self.gt_x, self.gt_y, self.gt_w, self.gt_h);
        let anchor = BBox::new(self.anchor_x, self.anchor_y, self.anchor_w, self.anchor_h);
        match self.kind {
            LossKind::Sse => sse_loss(&pred, &gt, &anchor, self.dir),
            LossKind::Rpn => rpn_reg_loss(&pred, &gt, &anchor),
            LossKind::Combined => combined_reg_loss(&pred, &gt, &anchor, self.dir, self.lambda_sse),
        }
    }
}

/// Reads a comma-separated fixture table with a header row.
pub fn read_fixtures<R: std::io::Read>(reader: R) -> std::result::Result<Vec<LossFixture>, csv::Error> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
        .deserialize()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn parameterize_identity_and_example() {
        let a = BBox::new(10.0, 10.0, 4.0, 6.0);
        assert_eq!(box_parameterize(&a, &a).unwrap(), [0.0; 4]);
        let t = box_parameterize(&BBox::new(12.0, 10.0, 8.0, 6.0), &a).unwrap();
        assert_eq!(t[0], 0.5);
        assert_eq!(t[1], 0.0);
        assert_relative_eq!(t[2], 2f64.ln(), epsilon = 1e-15);
        assert_eq!(t[3], 0.0);
    }

    #[test]
    fn parameterize_rejects_empty_boxes() {
        let a = BBox::new(0.0, 0.0, 4.0, 6.0);
        assert!(box_parameterize(&BBox::new(0.0, 0.0, 0.0, 1.0), &a).is_err());
        assert!(box_parameterize(&a, &BBox::new(0.0, 0.0, 1.0, -1.0)).is_err());
    }

    #[test]
    fn classify_cases() {
        let b = BBox::new(100.0, 50.0, 200.0, 80.0);
        assert_eq!(classify_direction(&b, (200.0, 130.0)), PlumeDirection::Vertical);
        assert_eq!(classify_direction(&b, (100.0, 130.0)), PlumeDirection::Right);
        assert_eq!(classify_direction(&b, (300.0, 130.0)), PlumeDirection::Left);
    }

    #[test]
    fn sse_point_cases() {
        let a = BBox::new(9.0, 19.0, 4.0, 6.0);
        for dir in [PlumeDirection::Vertical, PlumeDirection::Right, PlumeDirection::Left] {
            assert_eq!(sse_point(&a, &a, dir), SsePoint { u_x: 0.0, u_y: 0.0 });
        }
        let u = sse_point(&BBox::new(10.0, 20.0, 4.0, 6.0), &a, PlumeDirection::Vertical);
        assert_relative_eq!(u.u_x, 0.25, epsilon = 1e-15);
        assert_relative_eq!(u.u_y, 1.0 / 6.0, epsilon = 1e-15);
        let b = BBox::new(10.0, 20.0, 8.0, 6.0);
        assert_relative_eq!(sse_point(&b, &a, PlumeDirection::Right).u_x, 0.25, epsilon = 1e-15);
        assert_relative_eq!(sse_point(&b, &a, PlumeDirection::Left).u_x, 1.25, epsilon = 1e-15);
    }

    #[test]
    fn smooth_l1_values() {
        assert_eq!(smooth_l1(0.0), (0.0, 0.0));
        assert_eq!(smooth_l1(0.5), (0.125, 0.5));
        assert_eq!(smooth_l1(2.0), (1.5, 1.0));
        assert_eq!(smooth_l1(-3.0), (2.5, -1.0));
    }

    #[test]
    fn worked_losses() {
        let anchor = BBox::new(9.0, 19.0, 4.0, 6.0);
        let pred = BBox::new(10.0, 20.0, 4.0, 6.0);
        let gt = BBox::new(11.0, 21.0, 4.0, 6.0);
        let sse = sse_loss(&pred, &gt, &anchor, PlumeDirection::Vertical).unwrap();
        assert_relative_eq!(sse, 13.0 / 288.0, epsilon = 1e-15);
        assert_eq!(sse_loss(&pred, &pred, &anchor, PlumeDirection::Left).unwrap(), 0.0);
        let wide = rpn_reg_loss(&BBox::new(9.0, 19.0, 8.0, 6.0), &anchor, &anchor).unwrap();
        assert_relative_eq!(wide, 0.5 * 2f64.ln().powi(2), epsilon = 1e-15);
        assert_eq!(
            combined_reg_loss(&pred, &gt, &anchor, PlumeDirection::Vertical, 0.0).unwrap(),
            rpn_reg_loss(&pred, &gt, &anchor).unwrap()
        );
        assert_eq!(combined_reg_loss(&gt, &gt, &anchor, PlumeDirection::Right, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn fixture_csv_parses() {
        let src = "name,kind,pred_x,pred_y,pred_w,pred_h,gt_x,gt_y,gt_w,gt_h,anchor_x,anchor_y,anchor_w,anchor_h,dir,lambda_sse,expected\n\
                   # comment\n\
                   v,sse,10,20,4,6,11,21,4,6,9,19,4,6,vertical,1,0.045138888888888888\n";
        let rows = read_fixtures(src.as_bytes()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_relative_eq!(rows[0].evaluate().unwrap(), rows[0].expected, epsilon = 1e-15);
    }

    fn arb_box() -> impl Strategy<Value = BBox> {
        (-100.0f64..100.0, -100.0f64..100.0, 0.5f64..50.0, 0.5f64..50.0).prop_map(|(x, y, w, h)| BBox::new(x, y, w, h))
    }

    fn arb_dir() -> impl Strategy<Value = PlumeDirection> {
        prop_oneof![
            Just(PlumeDirection::Vertical),
            Just(PlumeDirection::Right),
            Just(PlumeDirection::Left)
        ]
    }

    #[test]
    fn smooth_l1_derivative_matches_central_difference() {
        let h = 1e-5;
        let mut d: f64 = -4.0;
        while d <= 4.0 {
            if !(0.999..=1.001).contains(&d.abs()) {
                let fd = (smooth_l1(d + h).0 - smooth_l1(d - h).0) / (2.0 * h);
                assert!((fd - smooth_l1(d).1).abs() < 1e-6, "d={d}");
            }
            d += 0.0007;
        }
    }

    proptest! {
        #[test]
        fn losses_nonnegative_and_zero_on_match(p in arb_box(), g in arb_box(), a in arb_box(), dir in arb_dir()) {
            prop_assert!(sse_loss(&p, &g, &a, dir).unwrap() >= 0.0);
            prop_assert!(rpn_reg_loss(&p, &g, &a).unwrap() >= 0.0);
            prop_assert_eq!(rpn_reg_loss(&g, &g, &a).unwrap(), 0.0);
            prop_assert_eq!(sse_loss(&g, &g, &a, dir).unwrap(), 0.0);
        }

        #[test]
        fn vertical_sse_mirror_symmetric(p in arb_box(), g in arb_box(), a in arb_box(), axis in -50.0f64..50.0) {
            let mirror = |b: &BBox| BBox::new(2.0 * axis - b.x - b.w, b.y, b.w, b.h);
            let l = sse_loss(&p, &g, &a, PlumeDirection::Vertical).unwrap();
            let m = sse_loss(&mirror(&p), &mirror(&g), &mirror(&a), PlumeDirection::Vertical).unwrap();
            prop_assert!((l - m).abs() <= 1e-12 * (1.0 + l));
        }

        #[test]
        fn combined_affine_in_lambda(p in arb_box(), g in arb_box(), a in arb_box(), dir in arb_dir(), l1 in 0.0f64..5.0, l2 in 0.0f64..5.0) {
            let f = |l| combined_reg_loss(&p, &g, &a, dir, l).unwrap();
            let mid = f(0.5 * (l1 + l2));
            prop_assert!((mid - 0.5 * (f(l1) + f(l2))).abs() <= 1e-9 * (1.0 + mid.abs()));
        }

        #[test]
        fn translation_invariant(p in arb_box(), g in arb_box(), a in arb_box(), dir in arb_dir(), dx in -500.0f64..500.0, dy in -500.0f64..500.0) {
            let l = sse_loss(&p, &g, &a, dir).unwrap();
            let m = sse_loss(&p.translated(dx, dy), &g.translated(dx, dy), &a.translated(dx, dy), dir).unwrap();
            prop_assert!((l - m).abs() <= 1e-9 * (1.0 + l));
            let l = rpn_reg_loss(&p, &g, &a).unwrap();
            let m = rpn_reg_loss(&p.translated(dx, dy), &g.translated(dx, dy), &a.translated(dx, dy)).unwrap();
            prop_assert!((l - m).abs() <= 1e-9 * (1.0 + l));
        }

        #[test]
        fn corner_cases_agree_with_vertical_for_equal_widths(p in arb_box(), g in arb_box(), a in arb_box()) {
            let g = BBox { w: p.w, ..g };
            let v = sse_loss(&p, &g, &a, PlumeDirection::Vertical).unwrap();
            for dir in [PlumeDirection::Right, PlumeDirection::Left] {
                let c = sse_loss(&p, &g, &a, dir).unwrap();
                prop_assert!((v - c).abs() <= 1e-9 * (1.0 + v));
            }
        }
    }
}
