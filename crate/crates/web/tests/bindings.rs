use plumerise_web::{briggs_curve_json, locate_json, synth_measure_json};
use serde_json::{json, Value};

#[test]
fn synth_round_trip_in_json() {
    let v: Value = serde_json::from_str(&synth_measure_json(30.0, 8.0, 0, 1).unwrap()).unwrap();
    let (got, want) = (v["measured"]["delta_z_m"].as_f64().unwrap(), v["truth"]["delta_z_m"].as_f64().unwrap());
    assert!((got - want).abs() <= 0.02 * want);
    let p = &v["preview"];
    assert_eq!((&p["width"], &p["height"]), (&json!(324), &json!(243)));
    assert_eq!(p["cells"].as_str().unwrap().len(), 324 * 243);
    assert!(p["cells"].as_str().unwrap().contains('1'));
}

#[test]
fn bad_scenario_is_an_error_string() {
    assert!(synth_measure_json(89.0, 8.0, 0, 1).unwrap_err().contains("85"));
}

#[test]
fn briggs_curve_starts_at_zero_and_grows() {
    let v: Value = serde_json::from_str(&briggs_curve_json("12908", 8.0, 2000.0, 4, false).unwrap()).unwrap();
    let dz: Vec<f64> = v["delta_z_m"].as_array().unwrap().iter().map(|d| d.as_f64().unwrap()).collect();
    assert_eq!(dz.len(), 5);
    assert_eq!(dz[0], 0.0);
    assert!(dz.windows(2).all(|w| w[1] > w[0]));
    assert!((dz[2] - 171.948).abs() < 1e-3);
    assert!(briggs_curve_json("nope", 8.0, 100.0, 4, false).is_err());
}

#[test]
fn locate_in_plane_keeps_offset() {
    // wind along the image plane: X_R equals G·x
    let v: Value = serde_json::from_str(&locate_json(1796.0, 1000.0, 252.0).unwrap()).unwrap();
    let g = 2.0 * 5180.0 * plumerise::synth::SITE_TAN_HALF_FOV / (2592f64.hypot(1944.0));
    assert!((v["X_R_m"].as_f64().unwrap() - g * 500.5).abs() < 1e-6);
    assert!(v["delta_z_m"].as_f64().unwrap() > 0.0);
}
