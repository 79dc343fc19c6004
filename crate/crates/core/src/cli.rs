//! Command implementations behind the `mapless` binary. Each returns the
//! process exit code: 0 on success, 1 on configuration or I/O errors, 2
//! when a run leaves the road.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::acceptance::{run_acceptance, Tolerances};
use crate::config::{load_table, set_key, ScenarioFile};
use crate::error::{Error, Result};
use crate::sim::{run_scenario, write_step_log, RunLog, RunMetrics, Scenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_FAILED_RUN: i32 = 2;

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub mode: Option<String>,
}

/// Writes `contents` next to `path` and renames it into place.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Builds the scenario at `path`, with dotted-key overrides applied.
pub fn load_with(path: &Path, overrides: &Overrides, extra: &[(String, String)]) -> Result<Scenario> {
    let file = path.display().to_string();
    // the raw text keeps line numbers for diagnostics
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        file: file.clone(),
        message: e.to_string(),
    })?;
    ScenarioFile::parse(&text, &file)?;
    let mut table = load_table(path)?;
    if let Some(seed) = overrides.seed {
        set_key(&mut table, "run.seed", &seed.to_string())?;
    }
    if let Some(mode) = &overrides.mode {
        set_key(&mut table, "run.mode", &format!("\"{mode}\""))?;
    }
    for (k, v) in extra {
        set_key(&mut table, k, v).map_err(|e| Error::Config {
            file: file.clone(),
            message: format!("{k}: {e}"),
        })?;
    }
    ScenarioFile::from_table(table, &file)?.to_scenario(&file)
}

/// Metrics, step log and plot data for one run.
pub fn write_bundle(dir: &Path, sc: &Scenario, metrics: &RunMetrics, log: &RunLog) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut header = format!("scenario = {}\nseed = {}\n", sc.name, sc.seed);
    header.push_str(&metrics.to_text());
    write_atomic(&dir.join("metrics.txt"), header.as_bytes())?;

    let mut buf = Vec::new();
    write_step_log(&mut buf, &log.steps)?;
    write_atomic(&dir.join("steps.csv"), &buf)?;

    let mut err = String::from("step,waypoint_index,s,lateral_error,segment\n");
    for (i, r) in log.steps.iter().enumerate() {
        let p = sc.track.project(r.x, r.y);
        let kind = match p.kind {
            crate::track::SegmentKind::Straight => "straight",
            crate::track::SegmentKind::Turn => "turn",
        };
        writeln!(err, "{i},{},{:.4},{:.6},{kind}", p.index, r.s, r.error()).expect("string write");
    }
    write_atomic(&dir.join("lateral_error.csv"), err.as_bytes())?;

    let mut vel = String::from("distance,v,v_ref,fsm_state\n");
    let s0 = log.steps.first().map_or(0.0, |r| r.s);
    for r in &log.steps {
        writeln!(vel, "{:.4},{:.4},{:.4},{}", r.s - s0, r.v, r.v_ref, r.fsm.label()).expect("string write");
    }
    write_atomic(&dir.join("velocity.csv"), vel.as_bytes())?;

    let mut path = String::from("series,x,y\n");
    for p in sc.track.points() {
        writeln!(path, "centerline,{:.4},{:.4}", p.x, p.y).expect("string write");
    }
    for r in &log.steps {
        writeln!(path, "vehicle,{:.4},{:.4}", r.x, r.y).expect("string write");
    }
    write_atomic(&dir.join("path.csv"), path.as_bytes())?;
    Ok(())
}

fn summary_line(m: &RunMetrics) -> String {
    format!(
        "rms_lateral={:.4} m max_lateral={:.4} m steps={} {}",
        m.lateral.rms,
        m.lateral.max,
        m.steps,
        if m.failed { "FAILED" } else { "completed" }
    )
}

pub fn cmd_run(scenario: &Path, out: &Path, overrides: &Overrides, quiet: bool) -> i32 {
    let sc = match load_with(scenario, overrides, &[]) {
        Ok(sc) => sc,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let (metrics, log) = match run_scenario(&sc) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {}: {e}", scenario.display());
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = write_bundle(out, &sc, &metrics, &log) {
        eprintln!("error: {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    if !quiet {
        println!("{}: {}", sc.name, summary_line(&metrics));
    }
    if metrics.failed {
        EXIT_FAILED_RUN
    } else {
        EXIT_OK
    }
}

/// Splits `key=v1,v2,...`.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| Error::Invalid(format!("sweep `{spec}` must look like KEY=V1,V2,...")))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(Error::Invalid(format!("sweep `{spec}` needs a key and at least one value")));
    }
    Ok((key.trim().to_string(), values))
}

enum SweepRow {
    Done(RunMetrics),
    Invalid(String),
}

/// One bundle per value under `out/<key>=<value>/` and `out/summary.csv`.
/// Values rejected by validation become `invalid` rows. Exits 1 when every
/// value is invalid, 2 when any run fails.
pub fn cmd_sweep(scenario: &Path, out: &Path, sweep: &str, overrides: &Overrides, quiet: bool) -> i32 {
    let (key, values) = match parse_sweep(sweep) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = load_with(scenario, overrides, &[]) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    let rows: Vec<(String, SweepRow)> = values
        .par_iter()
        .map(|v| {
            let row = match load_with(scenario, overrides, &[(key.clone(), v.clone())]) {
                Err(e) => SweepRow::Invalid(e.to_string()),
                Ok(sc) => match run_scenario(&sc) {
                    Err(e) => SweepRow::Invalid(e.to_string()),
                    Ok((m, log)) => {
                        let dir: PathBuf = out.join(format!("{key}={v}"));
                        match write_bundle(&dir, &sc, &m, &log) {
                            Ok(()) => SweepRow::Done(m),
                            Err(e) => SweepRow::Invalid(format!("{}: {e}", dir.display())),
                        }
                    }
                },
            };
            (v.clone(), row)
        })
        .collect();

    let mut csv = String::from("value,status,rms_lateral,max_lateral,mean_abs_stop_error,message\n");
    let mut any_failed = false;
    let mut valid = 0;
    for (v, row) in &rows {
        match row {
            SweepRow::Done(m) => {
                valid += 1;
                any_failed |= m.failed;
                let stop = m.mean_abs_stop_error().map_or_else(String::new, |e| format!("{e:.6}"));
                let status = if m.failed { "failed" } else { "ok" };
                writeln!(csv, "{v},{status},{:.6},{:.6},{stop},", m.lateral.rms, m.lateral.max).expect("string write");
                if !quiet {
                    println!("{key}={v}: {}", summary_line(m));
                }
            }
            SweepRow::Invalid(msg) => {
                writeln!(csv, "{v},invalid,,,,\"{}\"", msg.replace('"', "'")).expect("string write");
                if !quiet {
                    println!("{key}={v}: invalid: {msg}");
                }
            }
        }
    }
    if let Err(e) = fs::create_dir_all(out).map_err(Error::from).and_then(|_| write_atomic(&out.join("summary.csv"), csv.as_bytes())) {
        eprintln!("error: {}: {e}", out.display());
        return EXIT_CONFIG;
    }
    if valid == 0 {
        EXIT_CONFIG
    } else if any_failed {
        EXIT_FAILED_RUN
    } else {
        EXIT_OK
    }
}

/// Runs the acceptance suite and prints one line per criterion.
pub fn cmd_acceptance(tolerances: Option<&Path>, only: &[String]) -> i32 {
    let tol = match tolerances {
        None => Tolerances::default(),
        Some(p) => match fs::read_to_string(p).map_err(Error::from).and_then(|t| {
            toml::from_str::<Tolerances>(&t).map_err(|e| Error::Config {
                file: p.display().to_string(),
                message: e.to_string(),
            })
        }) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        },
    };
    let results = run_acceptance(&tol, only);
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILED_RUN
    }
}
