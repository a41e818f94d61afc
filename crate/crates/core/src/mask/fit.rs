use super::centerline::solve3;
use super::{CenterlineProfile, MaskError, PlumeDirection};
use serde::{Deserialize, Serialize};

/// Leveling threshold for point R, in px of rise per px downwind.
pub const DEFAULT_SLOPE_TOL: f64 = 0.02;
pub const MIN_FIT_COLUMNS: usize = 8;

const GRID_POINTS: usize = 160;
const MAX_LM_ITER: usize = 300;

/// `z(x) = a − b·exp(−c·x)` fitted to the centerline, `x` in px downwind of
/// the stack and `z` in px above the stack exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoteFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rmse_px: f64,
    pub converged: bool,
    /// False when the profile is flat and any `c` fits equally well.
    pub c_constrained: bool,
}

impl AsymptoteFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.a - self.b * (-self.c * x).exp()
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.b * self.c * (-self.c * x).exp()
    }
}

/// Coarse search over `c` (with `a`, `b` solved linearly at each grid
/// point) followed by damped Gauss–Newton on all three parameters.
pub fn fit_asymptote(profile: &CenterlineProfile) -> Result<AsymptoteFit, MaskError> {
    let pts = profile.samples();
    if pts.len() < MIN_FIT_COLUMNS {
        return Err(MaskError::TooFewColumns {
            needed: MIN_FIT_COLUMNS,
            got: pts.len(),
        });
    }
    Ok(fit_points(&pts))
}

pub(crate) fn fit_points(pts: &[(f64, f64)]) -> AsymptoteFit {
    let n = pts.len() as f64;
    let x_min = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let x_max = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let z_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let z_min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let z_max = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let span = x_max - x_min;
    let z_range = z_max - z_min;
    let diverged = AsymptoteFit {
        a: f64::NAN,
        b: f64::NAN,
        c: f64::NAN,
        rmse_px: f64::NAN,
        converged: false,
        c_constrained: false,
    };
    if !(span > 0.0) || !z_range.is_finite() {
        return diverged;
    }
    let c_lo = 0.01 / span;
    let c_hi = 50.0 / span;

    if z_range <= 1e-12 * (1.0 + z_mean.abs()) {
        return AsymptoteFit {
            a: z_mean,
            b: 0.0,
            c: 1.0 / span,
            rmse_px: 0.0,
            converged: true,
            c_constrained: false,
        };
    }

    let mut best: Option<(f64, f64, f64, f64)> = None;
    for k in 0..GRID_POINTS {
        let c = c_lo * (c_hi / c_lo).powf(k as f64 / (GRID_POINTS - 1) as f64);
        if let Some((a, b)) = linear_ab(pts, c) {
            let sse = sse(pts, a, b, c);
            if best.is_none_or(|bst| sse < bst.3) {
                best = Some((a, b, c, sse));
            }
        }
    }
    let Some((mut a, mut b, mut c, mut cost)) = best else {
        return diverged;
    };

    let mut lambda = 1e-3;
    for _ in 0..MAX_LM_ITER {
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for &(x, z) in pts {
            let e = (-c * x).exp();
            let r = a - b * e - z;
            let j = [1.0, -e, b * x * e];
            for i in 0..3 {
                for k in 0..3 {
                    jtj[i][k] += j[i] * j[k];
                }
                jtr[i] += j[i] * r;
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for (i, row) in m.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = solve3(m, [-jtr[0], -jtr[1], -jtr[2]]) else {
                lambda *= 10.0;
                continue;
            };
            let (na, nb, nc) = (a + step[0], b + step[1], c + step[2]);
            if nc > 0.0 && na.is_finite() && nb.is_finite() {
                let new_cost = sse(pts, na, nb, nc);
                if new_cost < cost {
                    let rel = (cost - new_cost) / cost.max(1e-300);
                    a = na;
                    b = nb;
                    c = nc;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved || cost < 1e-24 * n * (1.0 + z_range * z_range) {
            break;
        }
    }

    let converged = c.is_finite()
        && c >= c_lo * 0.5
        && a.is_finite()
        && b.is_finite()
        && b.abs() <= 1e3 * z_range
        && cost.is_finite();
    let b_negligible = b.abs() <= 1e-9 * (1.0 + a.abs());
    AsymptoteFit {
        a,
        b: if b_negligible { 0.0 } else { b },
        c,
        rmse_px: (cost / n).sqrt(),
        converged,
        c_constrained: !b_negligible,
    }
}

fn linear_ab(pts: &[(f64, f64)], c: f64) -> Option<(f64, f64)> {
    // z ≈ a·1 + b·(−e^{−cx})
    let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, z) in pts {
        let e = -(-c * x).exp();
        s11 += 1.0;
        s12 += e;
        s22 += e * e;
        r1 += z;
        r2 += e * z;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() <= 1e-12 * s11 * s22 {
        return None;
    }
    Some(((r1 * s22 - r2 * s12) / det, (s11 * r2 - s12 * r1) / det))
}

fn sse(pts: &[(f64, f64)], a: f64, b: f64, c: f64) -> f64 {
    pts.iter()
        .map(|&(x, z)| {
            let r = a - b * (-c * x).exp() - z;
            r * r
        })
        .sum()
}

/// Point R in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointR {
    /// Center-origin, right positive.
    pub x_r_px: f64,
    /// Center-origin, up positive.
    pub z_r_px: f64,
    /// Distance downwind of the stack column.
    pub downwind_px: f64,
    /// Height above the stack exit.
    pub rise_px: f64,
    /// The curve had not leveled within the visible plume; R is the last column.
    pub truncated: bool,
}

/// Picks the first downwind position where the fitted curve's slope drops
/// to `slope_tol`.
///
/// When the visible plume ends before that point, R is the last profile
/// column at its observed center, flagged as truncated. If the fitted slope
/// there still exceeds ten times the tolerance the plume is reported as not
/// leveled.
pub fn select_r(fit: &AsymptoteFit, profile: &CenterlineProfile, slope_tol: f64) -> Result<PointR, MaskError> {
    if !fit.converged {
        return Err(MaskError::FitDiverged);
    }
    if profile.direction == PlumeDirection::Vertical {
        return Err(MaskError::VerticalPlume);
    }
    let samples = profile.samples();
    let Some(&(x_last, z_last)) = samples.last() else {
        return Err(MaskError::EmptyPlume);
    };
    let slope0 = fit.slope(0.0).abs();
    let x_level = if fit.b == 0.0 || slope0 <= slope_tol {
        0.0
    } else {
        (slope0 / slope_tol).ln() / fit.c
    };

    let (downwind, rise, truncated) = if x_level > x_last {
        let slope_end = fit.slope(x_last).abs();
        if slope_end > 10.0 * slope_tol {
            return Err(MaskError::NotLeveled { slope: slope_end });
        }
        (x_last, z_last, true)
    } else {
        (x_level, fit.eval(x_level), false)
    };

    let col = f64::from(profile.stack_col) + profile.direction_sign() * downwind;
    let row = f64::from(profile.stack_row) - rise;
    Ok(PointR {
        x_r_px: col + 0.5 - f64::from(profile.width_px) / 2.0,
        z_r_px: f64::from(profile.height_px) / 2.0 - row - 0.5,
        downwind_px: downwind,
        rise_px: rise,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ColumnSample;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn profile_from(f: impl Fn(f64) -> f64, n: u32) -> CenterlineProfile {
        let stack_row = 500;
        CenterlineProfile {
            columns: (0..n)
                .map(|i| {
                    let center = f64::from(stack_row) - f(f64::from(i));
                    ColumnSample {
                        col: 100 + i,
                        center_row: center,
                        upper_row: center.floor() as u32,
                        lower_row: center.ceil() as u32,
                    }
                })
                .collect(),
            stack_col: 100,
            stack_row,
            direction: PlumeDirection::Right,
            width_px: 1000,
            height_px: 1000,
        }
    }

    #[test]
    fn recovers_exact_saturation_curve() {
        let p = profile_from(|x| 100.0 * (1.0 - (-x / 50.0).exp()), 400);
        let fit = fit_asymptote(&p).unwrap();
        assert!(fit.converged && fit.c_constrained);
        assert_relative_eq!(fit.a, 100.0, epsilon = 1e-6);
        assert_relative_eq!(fit.b, 100.0, epsilon = 1e-6);
        assert_relative_eq!(fit.c, 0.02, epsilon = 1e-6);
        assert!(fit.rmse_px < 1e-6);
    }

    #[test]
    fn constant_profile_leaves_c_unconstrained() {
        let p = profile_from(|_| 42.0, 30);
        let fit = fit_asymptote(&p).unwrap();
        assert!(fit.converged);
        assert!(!fit.c_constrained);
        assert_eq!(fit.b, 0.0);
        assert_relative_eq!(fit.a, 42.0, epsilon = 1e-9);
        let r = select_r(&fit, &p, DEFAULT_SLOPE_TOL).unwrap();
        assert_eq!(r.downwind_px, 0.0);
    }

    #[test]
    fn noisy_profile_rmse_within_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let noise: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let p = profile_from(|x| 100.0 * (1.0 - (-x / 50.0).exp()) + noise[x as usize], 300);
            let fit = fit_asymptote(&p).unwrap();
            assert!(fit.converged);
            assert!(fit.rmse_px <= 1.0, "rmse {}", fit.rmse_px);
        }
    }

    #[test]
    fn too_few_columns() {
        let p = profile_from(|x| x, 5);
        assert_eq!(
            fit_asymptote(&p),
            Err(MaskError::TooFewColumns { needed: 8, got: 5 })
        );
    }

    #[test]
    fn r_from_closed_form_slope_inversion() {
        let p = profile_from(|x| 100.0 * (1.0 - (-x / 50.0).exp()), 400);
        let fit = AsymptoteFit {
            a: 100.0,
            b: 100.0,
            c: 0.02,
            rmse_px: 0.0,
            converged: true,
            c_constrained: true,
        };
        let r = select_r(&fit, &p, 0.02).unwrap();
        assert_relative_eq!(r.downwind_px, 50.0 * 100f64.ln(), epsilon = 1e-9);
        assert_relative_eq!(r.rise_px, 99.0, epsilon = 1e-9);
        assert!(!r.truncated);
        // stack pixel (100, 500) in a 1000x1000 frame sits at (-399.5, -0.5)
        assert_relative_eq!(r.x_r_px, -399.5 + r.downwind_px, epsilon = 1e-9);
        assert_relative_eq!(r.z_r_px, -0.5 + 99.0, epsilon = 1e-9);
    }

    #[test]
    fn short_profile_is_truncated_or_not_leveled() {
        let p = profile_from(|x| 100.0 * (1.0 - (-x / 50.0).exp()), 301);
        let fit = fit_asymptote(&p).unwrap();
        // slope at x=300 is 2e^-6 ≈ 0.00496; tolerance 0.001 puts the level point at x≈380
        let r = select_r(&fit, &p, 0.001).unwrap();
        assert!(r.truncated);
        assert_eq!(r.downwind_px, 300.0);
        assert_relative_eq!(r.rise_px, 100.0 * (1.0 - (-6f64).exp()), epsilon = 1e-9);
        assert!(matches!(select_r(&fit, &p, 1e-6), Err(MaskError::NotLeveled { .. })));
    }

    #[test]
    fn refuses_diverged_and_vertical() {
        let mut p = profile_from(|x| 100.0 * (1.0 - (-x / 50.0).exp()), 100);
        let mut fit = fit_asymptote(&p).unwrap();
        p.direction = PlumeDirection::Vertical;
        assert_eq!(select_r(&fit, &p, 0.02), Err(MaskError::VerticalPlume));
        fit.converged = false;
        assert_eq!(select_r(&fit, &p, 0.02), Err(MaskError::FitDiverged));
    }

    #[test]
    fn left_plume_maps_to_negative_x() {
        let mut p = profile_from(|x| 100.0 * (1.0 - (-x / 50.0).exp()), 400);
        p.stack_col = 500;
        p.direction = PlumeDirection::Left;
        for (i, s) in p.columns.iter_mut().enumerate() {
            s.col = 500 - i as u32;
        }
        let fit = fit_asymptote(&p).unwrap();
        let r = select_r(&fit, &p, 0.02).unwrap();
        assert_relative_eq!(r.x_r_px, 0.5 - r.downwind_px, epsilon = 1e-9);
    }

    proptest! {
        #[test]
        fn r_moves_downwind_as_tolerance_tightens(
            a in 20.0f64..300.0,
            c in 0.005f64..0.05,
            tol_hi in 0.005f64..0.2,
            shrink in 0.1f64..1.0,
        ) {
            let fit = AsymptoteFit { a, b: a, c, rmse_px: 0.0, converged: true, c_constrained: true };
            let p = profile_from(|x| a * (1.0 - (-c * x).exp()), 2000);
            let loose = select_r(&fit, &p, tol_hi);
            let tight = select_r(&fit, &p, tol_hi * shrink);
            if let (Ok(l), Ok(t)) = (loose, tight) {
                prop_assert!(t.downwind_px >= l.downwind_px);
            }
        }
    }
}
