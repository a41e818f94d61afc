//! Masks on disk through wind lookup, measurement and the record log.

use approx::assert_relative_eq;
use chrono::{TimeDelta, TimeZone, Utc};
use plumerise::io::{
    config::SiteConfig,
    pipeline::{process_mask_file, MeasureOptions},
    record::{read_records, Flag, RecordLog},
    wind::load_wind_csv,
};
use plumerise::mask::encode_pgm_binary;
use plumerise::synth::{generate, SynthScenario};

const SITE: &str = r#"
[camera]
width_px = 2592
height_px = 1944
fov_deg = 55.0
stack_px = [1296, 1500]

[site]
stack_distance_m = 5180.0
plane_azimuth_deg = 252.0
"#;

#[test]
fn synthetic_mask_measured_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let scn = SynthScenario::site(30.0, 8.0);
    let (mask, truth) = generate(&scn).unwrap();
    let name = format!("{}_{}.pgm", scn.image_id, scn.timestamp.format("%Y%m%dT%H%M%SZ"));
    std::fs::write(dir.path().join(&name), encode_pgm_binary(&mask)).unwrap();

    // wind 10 min after the frame; the nearest record wins
    let t = scn.timestamp + TimeDelta::minutes(10);
    let csv = format!("timestamp,wd_deg\n{},{}\n{},0\n", t.to_rfc3339(), scn.phi_deg, (t + TimeDelta::hours(3)).to_rfc3339());
    let wind = load_wind_csv(csv.as_bytes()).unwrap();

    let mut cfg = SiteConfig::from_toml_str(SITE).unwrap();
    cfg.camera.fov_deg = scn.camera.fov_deg;
    let cam = cfg.camera_model().unwrap();
    let rec = process_mask_file(&dir.path().join(&name), &cam, &wind, &MeasureOptions::from_config(&cfg));
    assert!(rec.is_ok(), "{:?}", rec.error);
    assert_eq!(rec.image_id, scn.image_id);
    assert_relative_eq!(rec.delta_z_m.unwrap(), truth.delta_z_m.unwrap(), max_relative = 0.02);
    assert!(!rec.flags.contains(&Flag::FitDiverged));

    let log_path = dir.path().join("out.jsonl");
    let log = RecordLog::open(&log_path).unwrap();
    log.append(&rec).unwrap();
    log.append(&rec).unwrap();
    let back = read_records(&log_path).unwrap();
    assert_eq!(back.len(), 2);
    assert_eq!(back[0], rec);
}

#[test]
fn stale_wind_gives_failure_record() {
    let dir = tempfile::tempdir().unwrap();
    let scn = SynthScenario::site(0.0, 8.0);
    let (mask, _) = generate(&scn).unwrap();
    let path = dir.path().join("old_20191108T180013Z.pgm");
    std::fs::write(&path, encode_pgm_binary(&mask)).unwrap();
    let wind = load_wind_csv("timestamp,wd_deg\n2019-11-07T00:00:00Z,252\n".as_bytes()).unwrap();
    let cam = plumerise::geometry::CameraModel::new(&scn.camera).unwrap();
    let rec = process_mask_file(&path, &cam, &wind, &MeasureOptions::default());
    assert!(!rec.is_ok());
    assert_eq!(rec.timestamp, Some(Utc.with_ymd_and_hms(2019, 11, 8, 18, 0, 13).unwrap()));
    assert_eq!(rec.delta_z_m, None);
}
