//! Browser bindings for the plume-rise demo page. Every export returns a
//! JSON string; errors surface as thrown JS strings.

use plumerise::briggs::{stack_rise, AmbientConditions, BuoyancyForm};
use plumerise::geometry::{locate_point_r, plume_rise, wind_plane_angle, CameraModel, ImagePoint};
use plumerise::io::config::{load_roster, SITE_ROSTER_CSV};
use plumerise::io::{measure_mask, MeasureOptions};
use plumerise::mask::PlumeMask;
use plumerise::synth::{generate_detailed, Noise, SynthScenario};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Preview cells are this many mask pixels on a side.
const PREVIEW_BLOCK: u32 = 8;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Max-pooled preview as one '0'/'1' character per cell, row-major.
fn downsample(mask: &PlumeMask, block: u32) -> (u32, u32, String) {
    let (w, h) = (mask.width().div_ceil(block), mask.height().div_ceil(block));
    let mut cells = vec![false; (w * h) as usize];
    for row in 0..mask.height() {
        for col in 0..mask.width() {
            if mask.get(col, row) {
                cells[((row / block) * w + col / block) as usize] = true;
            }
        }
    }
    (w, h, cells.iter().map(|&c| if c { '1' } else { '0' }).collect())
}

pub fn synth_measure_json(theta_deg: f64, wind_mps: f64, jitter_px: u32, seed: u64) -> Result<String, String> {
    let mut scn = SynthScenario::site(theta_deg, wind_mps);
    scn.seed = seed;
    if jitter_px > 0 {
        scn.noise = Noise::BoundaryJitter { px: jitter_px };
    }
    let out = generate_detailed(&scn).map_err(err)?;
    let cam = CameraModel::new(&scn.camera).map_err(err)?;
    let m = measure_mask(&out.mask, &cam, scn.phi_deg, &MeasureOptions::default()).map_err(err)?;

    let b = f64::from(PREVIEW_BLOCK);
    let (sc, sr) = cam.stack_px();
    let sign = m.profile.direction_sign();
    // fitted curve in preview cells
    let curve: Vec<[f64; 2]> = m
        .profile
        .samples()
        .iter()
        .step_by(8)
        .map(|&(x, _)| [(f64::from(sc) + sign * x + 0.5) / b, (f64::from(sr) - m.fit.eval(x) + 0.5) / b])
        .collect();
    let r_col = m.point_r.x_r_px + f64::from(cam.width_px()) / 2.0;
    let r_row = f64::from(cam.height_px()) / 2.0 - m.point_r.z_r_px;
    let (w, h, cells) = downsample(&out.mask, PREVIEW_BLOCK);
    let truth = &out.truth;
    let v = json!({
        "phi_deg": scn.phi_deg,
        "end_reason": format!("{:?}", out.end_reason),
        "truth": { "delta_z_m": truth.delta_z_m, "x_max_m": truth.x_max_m, "x_R_px": truth.x_R_px },
        "measured": {
            "delta_z_m": m.rise.delta_z_m,
            "x_max_m": m.rise.x_max_m,
            "x_R_px": m.point_r.x_r_px,
            "z_R_px": m.point_r.z_r_px,
            "truncated": m.point_r.truncated,
            "fit": { "a": m.fit.a, "b": m.fit.b, "c": m.fit.c, "rmse_px": m.fit.rmse_px },
        },
        "preview": {
            "width": w,
            "height": h,
            "cells": cells,
            "stack": [(f64::from(sc) + 0.5) / b, (f64::from(sr) + 0.5) / b],
            "r": [r_col / b, r_row / b],
            "curve": curve,
        },
    });
    Ok(v.to_string())
}

pub fn briggs_curve_json(stack_id: &str, wind_mps: f64, x_max_m: f64, steps: u32, velocity_squared: bool) -> Result<String, String> {
    let roster = load_roster(SITE_ROSTER_CSV.as_bytes()).map_err(err)?;
    let stack = roster
        .iter()
        .find(|s| s.id == stack_id)
        .ok_or_else(|| format!("stack {stack_id:?} is not in the roster"))?;
    if !(x_max_m > 0.0) || steps == 0 {
        return Err("need a positive distance and at least one step".into());
    }
    let amb = AmbientConditions::new(288.0, wind_mps);
    let form = if velocity_squared { BuoyancyForm::VelocitySquared } else { BuoyancyForm::Standard };
    let mut xs = Vec::with_capacity(steps as usize + 1);
    let mut dz = Vec::with_capacity(steps as usize + 1);
    for i in 0..=steps {
        let x = x_max_m * f64::from(i) / f64::from(steps);
        xs.push(x);
        dz.push(stack_rise(stack, &amb, x, form).map_err(err)?);
    }
    let ids: Vec<&str> = roster.iter().map(|s| s.id.as_str()).collect();
    Ok(json!({ "stack": stack_id, "height_m": stack.height_m, "x_m": xs, "delta_z_m": dz, "roster": ids }).to_string())
}

pub fn locate_json(col: f64, row: f64, phi_deg: f64) -> Result<String, String> {
    let cam = CameraModel::new(&SynthScenario::site(0.0, 1.0).camera).map_err(err)?;
    let p = cam.pixel_to_image(col, row);
    let angle = wind_plane_angle(phi_deg, cam.plane_azimuth_deg());
    let sol = locate_point_r(&cam, p, &angle).map_err(err)?;
    let rise = plume_rise(&cam, &sol, p.z_px);
    let ImagePoint { x_px, z_px } = p;
    Ok(json!({
        "x_px": x_px,
        "z_px": z_px,
        "theta_deg": angle.raw_deg,
        "gamma_deg": sol.gamma_deg,
        "X_R_m": sol.x_r_m,
        "Y_R_m": sol.y_r_m,
        "G_R": sol.g_r_m_per_px,
        "Z_R_m": rise.z_r_m,
        "delta_z_m": rise.delta_z_m,
        "x_max_m": rise.x_max_m,
    })
    .to_string())
}

/// Renders a synthetic plume at the site and measures it back.
#[wasm_bindgen]
pub fn synth_measure(theta_deg: f64, wind_mps: f64, jitter_px: u32, seed: u32) -> Result<String, JsValue> {
    synth_measure_json(theta_deg, wind_mps, jitter_px, u64::from(seed)).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn briggs_curve(stack_id: &str, wind_mps: f64, x_max_m: f64, steps: u32, velocity_squared: bool) -> Result<String, JsValue> {
    briggs_curve_json(stack_id, wind_mps, x_max_m, steps, velocity_squared).map_err(|e| JsValue::from_str(&e))
}

/// Ground position and rise of a clicked site-camera pixel.
#[wasm_bindgen]
pub fn locate(col: f64, row: f64, phi_deg: f64) -> Result<String, JsValue> {
    locate_json(col, row, phi_deg).map_err(|e| JsValue::from_str(&e))
}
