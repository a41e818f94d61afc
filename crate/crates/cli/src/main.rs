use anyhow::{bail, Context, Result};
use chrono::Utc;
use clap::{Parser, Subcommand};
use plumerise::briggs::{stack_rise, AmbientConditions, BuoyancyForm};
use plumerise::io::config::{CameraSection, SiteConfig, SiteSection};
use plumerise::io::eval::{evaluate_dirs, Side};
use plumerise::io::pipeline::{is_mask_file, process_mask_file};
use plumerise::io::{load_wind_csv, MeasureOptions, RecordLog};
use plumerise::loss::read_fixtures;
use plumerise::mask::encode_pgm_binary;
use plumerise::synth::{generate_detailed, SynthScenario};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Plume-rise measurement from binary plume masks.
#[derive(Parser)]
#[command(name = "plumerise", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measure every mask in a directory and append one JSON record per mask.
    Measure {
        #[arg(long)]
        config: PathBuf,
        /// CSV with `timestamp,wd_deg` columns.
        #[arg(long)]
        wind: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        /// JSON-lines log, appended to.
        #[arg(long)]
        out: PathBuf,
    },
    /// Briggs rise for a rostered stack.
    Briggs {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stack: String,
        #[arg(long)]
        wind_speed: f64,
        /// Downwind distance in m; repeat for several.
        #[arg(long, required = true, num_args = 1..)]
        x: Vec<f64>,
        /// Use the squared-exit-velocity buoyancy flux instead of the configured form.
        #[arg(long)]
        velocity_squared: bool,
    },
    /// Pixel scores for same-named masks in two directories, as CSV on stdout.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Render a synthetic scenario: mask, truth record, wind table and site config.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute a loss fixture table and compare against its expected column.
    LossCheck {
        #[arg(long)]
        fixtures: PathBuf,
    },
}

/// Everything ran, but some items failed.
const PARTIAL: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Measure { config, wind, masks, out } => measure(&config, &wind, &masks, &out),
        Command::Briggs { config, stack, wind_speed, x, velocity_squared } => {
            briggs(&config, &stack, wind_speed, &x, velocity_squared)
        }
        Command::Eval { pred, gt } => eval(&pred, &gt),
        Command::Synth { scenario, out } => synth(&scenario, &out),
        Command::LossCheck { fixtures } => loss_check(&fixtures),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

// Each command returns Ok(false) when it finished with per-item failures.

fn measure(config: &Path, wind: &Path, masks: &Path, out: &Path) -> Result<bool> {
    let cfg = SiteConfig::load(config)?;
    let cam = cfg.camera_model()?;
    let opts = MeasureOptions::from_config(&cfg);
    let wind_bytes = std::fs::read(wind).with_context(|| format!("reading {}", wind.display()))?;
    let table = load_wind_csv(&wind_bytes).with_context(|| format!("wind table {}", wind.display()))?;

    let mut files: Vec<PathBuf> = std::fs::read_dir(masks)
        .with_context(|| format!("listing {}", masks.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_mask_file(p))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .pgm/.pbm/.pnm masks in {}", masks.display());
    }

    let log = RecordLog::open(out).with_context(|| format!("opening {}", out.display()))?;
    let run_id = format!("{}-{}", Utc::now().format("%Y%m%dT%H%M%SZ"), std::process::id());
    let failed = files
        .par_iter()
        .map(|path| -> Result<bool> {
            let mut rec = process_mask_file(path, &cam, &table, &opts);
            rec.run_id = Some(run_id.clone());
            log.append(&rec).with_context(|| format!("writing {}", out.display()))?;
            if let Some(e) = &rec.error {
                eprintln!("{}: {e}", path.display());
            }
            Ok(rec.is_ok())
        })
        .collect::<Result<Vec<bool>>>()?
        .into_iter()
        .filter(|ok| !ok)
        .count();
    eprintln!("run {run_id}: {} measured, {failed} failed", files.len() - failed);
    Ok(failed == 0)
}

fn briggs(config: &Path, stack_id: &str, wind_speed: f64, xs: &[f64], velocity_squared: bool) -> Result<bool> {
    let cfg = SiteConfig::load(config)?;
    let stack = cfg.stack(stack_id)?;
    let mut amb = AmbientConditions::new(cfg.briggs.air_temp_k, wind_speed);
    amb.entrainment = cfg.briggs.entrainment;
    let form = if velocity_squared { BuoyancyForm::VelocitySquared } else { cfg.briggs.buoyancy };
    println!("x_m,delta_z_m");
    for &x in xs {
        let dz = stack_rise(&stack, &amb, x, form)?;
        println!("{x},{dz:.3}");
    }
    Ok(true)
}

fn eval(pred: &Path, gt: &Path) -> Result<bool> {
    for d in [pred, gt] {
        if !d.is_dir() {
            bail!("{} is not a directory", d.display());
        }
    }
    let report = evaluate_dirs(pred, gt)?;
    print!("{}", report.to_csv());
    for m in &report.missing {
        let (have, lack) = match m.found_in {
            Side::Pred => ("pred", "gt"),
            Side::Gt => ("gt", "pred"),
        };
        eprintln!("{}: only in {have}, no {lack} counterpart", m.file);
    }
    for (file, e) in &report.errors {
        eprintln!("{file}: {e}");
    }
    Ok(report.is_clean())
}

fn synth(scenario: &Path, out: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(scenario).with_context(|| format!("reading {}", scenario.display()))?;
    let scn = SynthScenario::from_toml_str(&text)?;
    let rendered = generate_detailed(&scn)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;

    let stamp = scn.timestamp.format("%Y%m%dT%H%M%SZ");
    let mask_path = out.join(format!("{}_{stamp}.pgm", scn.image_id));
    std::fs::write(&mask_path, encode_pgm_binary(&rendered.mask))?;
    std::fs::write(out.join("truth.jsonl"), format!("{}\n", rendered.truth.to_json_line()))?;
    std::fs::write(out.join("wind.csv"), format!("timestamp,wd_deg\n{},{}\n", scn.timestamp.to_rfc3339(), scn.phi_deg))?;

    let c = &scn.camera;
    let mut cfg = SiteConfig::new(
        CameraSection {
            width_px: c.width_px,
            height_px: c.height_px,
            fov_deg: c.fov_deg,
            focal_length_mm: c.focal_length_mm,
            pixel_um: c.pixel_size_um,
            stack_px: c.stack_px,
        },
        SiteSection {
            stack_distance_m: c.stack_distance_m,
            plane_azimuth_deg: c.plane_azimuth_deg,
            stack_id: Some(scn.stack.id.clone()),
        },
    );
    cfg.analysis.slope_tol = scn.slope_tol;
    cfg.briggs.air_temp_k = scn.ambient.air_temp_k;
    cfg.briggs.entrainment = scn.ambient.entrainment;
    cfg.briggs.buoyancy = scn.buoyancy;
    std::fs::write(out.join("config.toml"), cfg.to_toml_string())?;

    eprintln!(
        "{}: {} columns, ends by {:?} at {:.0} m, true rise {:.1} m",
        mask_path.display(),
        rendered.columns,
        rendered.end_reason,
        rendered.end_distance_m,
        rendered.truth.delta_z_m.unwrap_or(0.0)
    );
    Ok(true)
}

fn loss_check(fixtures: &Path) -> Result<bool> {
    let file = std::fs::File::open(fixtures).with_context(|| format!("opening {}", fixtures.display()))?;
    let rows = read_fixtures(file).with_context(|| format!("parsing {}", fixtures.display()))?;
    if rows.is_empty() {
        bail!("{} has no fixture rows", fixtures.display());
    }
    let mut bad = 0;
    for row in &rows {
        let verdict = match row.evaluate() {
            Ok(got) if (got - row.expected).abs() <= 1e-9 * row.expected.abs().max(1.0) => format!("ok {got:.12}"),
            Ok(got) => {
                bad += 1;
                format!("MISMATCH got {got:.12}, expected {:.12}", row.expected)
            }
            Err(e) => {
                bad += 1;
                format!("ERROR {e}")
            }
        };
        println!("{}: {verdict}", row.name);
    }
    println!("{} of {} rows match", rows.len() - bad, rows.len());
    Ok(bad == 0)
}
