use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde_json::json;

use pilotbox_core::calibration::{self, CalibrationGrid};
use pilotbox_core::dispersion::{gc_omega_full, gc_omega_shallow, rs_omega, SHALLOW_LIMIT_KH};
use pilotbox_core::io::{self, fmt_f64, Manifest, RunStatus};
use pilotbox_core::statistics::{analyze_run, phase_space, AnalysisConfig, ModeAnalysis};
use pilotbox_core::sweep::{self, PLAN};
use pilotbox_core::{run_with_snapshots, Error, HydroParams};

use crate::{AnalyzeArgs, CalibrateArgs, DispersionArgs, SimulateArgs, SweepArgs};

/// Marks errors caused by the invocation rather than by a simulation.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<Error>() {
        Some(
            Error::InvalidParameter { .. }
            | Error::Config { .. }
            | Error::Cfl { .. }
            | Error::Malformed { .. },
        ) => 2,
        _ => 1,
    }
}

/// Parses `σ/ρ=1,g=1,H=0.1`; `sigma_over_rho` and `depth` are accepted as
/// ASCII spellings.
pub fn parse_hydro(spec: &str) -> Result<HydroParams> {
    let (mut s, mut g, mut h) = (None, None, None);
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| usage(format!("--hydro: expected key=value, got {part:?}")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("--hydro: {key} is not a number: {value:?}")))?;
        match key.trim() {
            "σ/ρ" | "sigma/rho" | "sigma_over_rho" => s = Some(v),
            "g" => g = Some(v),
            "H" | "depth" => h = Some(v),
            other => return Err(usage(format!("--hydro: unknown key {other:?}"))),
        }
    }
    match (s, g, h) {
        (Some(s), Some(g), Some(h)) => Ok(HydroParams::from_kinematic(s, g, h)?),
        _ => Err(usage("--hydro needs σ/ρ, g and H")),
    }
}

pub fn dispersion(a: DispersionArgs) -> Result<ExitCode> {
    if !(a.k_max > 0.0 && a.k_max.is_finite()) {
        return Err(usage(format!("--k-max must be > 0, got {}", a.k_max)));
    }
    if a.k_points == 0 {
        return Err(usage("--k-points must be >= 1"));
    }
    if !(a.epsilon >= 0.0 && a.epsilon.is_finite()) {
        return Err(usage(format!("--epsilon must be >= 0, got {}", a.epsilon)));
    }
    let hydro = a.hydro.as_deref().map(parse_hydro).transpose()?;
    let mut header = vec!["k", "omega_rs"];
    if hydro.is_some() {
        header.extend(["omega_gc_full", "omega_gc_shallow", "kH"]);
    }
    let mut rows = Vec::with_capacity(a.k_points);
    let mut beyond_shallow = None;
    for i in 1..=a.k_points {
        let k = a.k_max * i as f64 / a.k_points as f64;
        let mut row = vec![fmt_f64(k), fmt_f64(rs_omega(k, a.epsilon))];
        if let Some(h) = &hydro {
            let kh = k * h.depth;
            if kh > SHALLOW_LIMIT_KH && beyond_shallow.is_none() {
                beyond_shallow = Some(k);
            }
            row.push(fmt_f64(gc_omega_full(k, h)?));
            row.push(fmt_f64(gc_omega_shallow(k, h)?));
            row.push(fmt_f64(kh));
        }
        rows.push(row);
    }
    if let Some(k) = beyond_shallow {
        eprintln!(
            "warning: kH > {SHALLOW_LIMIT_KH} from k = {k}; omega_gc_shallow is outside its validity range there"
        );
    }
    match &a.output {
        Some(path) => io::write_csv(path, &header, rows)?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{}", header.join(","))?;
            for row in rows {
                writeln!(out, "{}", row.join(","))?;
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

pub fn simulate(a: SimulateArgs) -> Result<ExitCode> {
    let p = a.params.resolve()?;
    let started = Instant::now();
    let r = run_with_snapshots(&p, &a.snapshots)?;
    io::save_run(&a.output, &r, started.elapsed().as_secs_f64())
        .with_context(|| format!("writing {}", a.output.display()))?;
    match RunStatus::of(&r) {
        RunStatus::Failed => {
            eprintln!(
                "simulation failed: {}",
                r.failure.as_deref().unwrap_or("unknown")
            );
            return Ok(ExitCode::from(1));
        }
        RunStatus::Escaped => eprintln!(
            "warning: particle left the box at t = {}",
            r.escape_time.unwrap_or(f64::NAN)
        ),
        RunStatus::Complete => {}
    }
    println!(
        "{}: epsilon {} samples {} mean_kinetic {}",
        a.output.display(),
        r.epsilon,
        r.trajectory.len(),
        r.mean_kinetic.map(fmt_f64).unwrap_or_else(|| "n/a".into())
    );
    Ok(ExitCode::SUCCESS)
}

pub fn sweep(a: SweepArgs) -> Result<ExitCode> {
    let base = a.params.resolve()?;
    if a.jobs == 0 {
        return Err(usage("--jobs must be >= 1"));
    }
    let mut plan = sweep::plan_sweep(a.eps_min, a.eps_max, a.points, base)?;
    plan.parallelism = a.jobs;
    plan.output_dir = Some(a.output.clone());
    if a.resume && sweep::is_complete(&a.output, &plan) {
        println!("{}: sweep already complete", a.output.display());
        return Ok(ExitCode::SUCCESS);
    }
    let result = sweep::execute(&plan, a.resume)?;
    let stable = result.stability_mask.iter().filter(|s| **s).count();
    println!(
        "{}: {} runs, {stable} stable, {} energy levels",
        a.output.display(),
        result.runs.len(),
        result.levels.levels.len()
    );
    if result.bifurcation_map.all_escaped {
        eprintln!("warning: every run escaped or failed");
    }
    Ok(ExitCode::SUCCESS)
}

pub fn calibrate(a: CalibrateArgs) -> Result<ExitCode> {
    let base = a.params.resolve()?;
    if a.jobs == 0 {
        return Err(usage("--jobs must be >= 1"));
    }
    let defaults = CalibrationGrid::default();
    let grid = CalibrationGrid {
        gamma0: if a.gamma0_grid.is_empty() { defaults.gamma0 } else { a.gamma0_grid },
        damping_b: if a.damping_grid.is_empty() { defaults.damping_b } else { a.damping_grid },
        target_epsilon: a.target_epsilon,
        target_interior_peaks: a.target_peaks,
    };
    let started = Instant::now();
    let report = calibration::calibrate(&base, &grid, &AnalysisConfig::default(), a.jobs)?;
    io::write_dir_atomically(&a.output, |dir| {
        io::write_csv(
            &dir.join("calibration.csv"),
            &[
                "gamma0",
                "damping_b",
                "stable",
                "interior_peaks",
                "round_trips_per_period",
                "mean_kinetic",
                "effective_length",
            ],
            report.candidates.iter().map(|c| {
                vec![
                    fmt_f64(c.gamma0),
                    fmt_f64(c.damping_b),
                    u8::from(c.stable).to_string(),
                    c.interior_peaks.to_string(),
                    c.round_trips_per_period.map(|n| n.to_string()).unwrap_or_default(),
                    c.mean_kinetic.map(fmt_f64).unwrap_or_default(),
                    c.effective_length.map(fmt_f64).unwrap_or_default(),
                ]
            }),
        )?;
        fs::write(dir.join("best.cfg"), report.best_params.to_config_text())?;
        let mut m = Manifest::new("calibrate", &grid)?;
        m.wall_clock_seconds = started.elapsed().as_secs_f64();
        m.reason = report.best.is_none().then(|| "no grid point stayed in the box".into());
        m.summary = json!({ "base": base, "best": report.best_candidate() });
        m.write(dir)
    })?;
    match report.best_candidate() {
        Some(c) => println!(
            "best: gamma0 {} damping_b {} interior peaks {} round trips {:?}; parameters in {}",
            c.gamma0,
            c.damping_b,
            c.interior_peaks,
            c.round_trips_per_period,
            a.output.join("best.cfg").display()
        ),
        None => eprintln!("warning: no grid point stayed in the box"),
    }
    Ok(ExitCode::SUCCESS)
}

fn peak_rows(epsilon: f64, m: &ModeAnalysis) -> impl Iterator<Item = Vec<String>> + '_ {
    let n = m.peak_positions.len();
    (0..n).map(move |i| {
        let kind = if n >= 2 && (i == 0 || i == n - 1) { "boundary" } else { "interior" };
        vec![
            fmt_f64(epsilon),
            fmt_f64(m.peak_positions[i]),
            fmt_f64(m.peak_heights[i]),
            fmt_f64(m.peak_prominences[i]),
            kind.to_string(),
        ]
    })
}

const PEAK_HEADER: [&str; 5] = ["epsilon", "position", "height", "prominence", "kind"];

pub fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let input = &a.input;
    if !input.is_dir() {
        bail!(usage(format!("{} is not a directory", input.display())));
    }
    let out = a.output.clone().unwrap_or_else(|| input.clone());
    fs::create_dir_all(&out)?;
    let cfg = AnalysisConfig::default();
    if input.join(PLAN).exists() {
        analyze_sweep(input, &out)?;
    } else if input.join(io::MANIFEST).exists() {
        analyze_single(input, &out, &cfg)?;
    } else {
        bail!(usage(format!(
            "{} holds neither a run nor a sweep",
            input.display()
        )));
    }
    println!("{}: analysis written", out.display());
    Ok(ExitCode::SUCCESS)
}

fn analyze_single(input: &Path, out: &Path, cfg: &AnalysisConfig) -> Result<()> {
    let r = io::load_run(input)?;
    let analysis = analyze_run(&r, cfg);
    io::write_csv(
        &out.join("peaks.csv"),
        &PEAK_HEADER,
        peak_rows(r.epsilon, &analysis.modes),
    )?;
    let end = if r.escaped { r.trajectory.len().saturating_sub(1) } else { r.trajectory.len() };
    let ps = phase_space(
        &r.trajectory[..end],
        r.params_echo.t_transient,
        cfg.recurrence_tolerance,
    );
    io::write_phase_space(&out.join("phase_space.csv"), &ps)?;
    // A single run has no ε axis; the table is written with its header only.
    let levels = pilotbox_core::statistics::extract_energy_levels(&[], cfg);
    io::write_energy_levels(&out.join("energy_levels.csv"), &levels)?;
    io::write_json(
        &out.join("summary.json"),
        &json!({
            "kind": "run",
            "epsilon": r.epsilon,
            "escaped": r.escaped,
            "escape_time": r.escape_time,
            "failure": r.failure,
            "analysis": analysis,
            "coherent": ps.is_coherent(),
        }),
    )?;
    Ok(())
}

fn analyze_sweep(input: &Path, out: &Path) -> Result<()> {
    let (plan, result) = sweep::load_sweep(input)?;
    io::write_csv(
        &out.join("peaks.csv"),
        &PEAK_HEADER,
        result
            .analyses
            .iter()
            .flat_map(|a| peak_rows(a.epsilon, &a.modes).collect::<Vec<_>>()),
    )?;
    io::write_csv(
        &out.join("phase_space.csv"),
        &["epsilon", "period", "round_trips_per_period", "coherent"],
        result.analyses.iter().map(|a| {
            vec![
                fmt_f64(a.epsilon),
                a.period.map(fmt_f64).unwrap_or_default(),
                a.round_trips_per_period.map(|n| n.to_string()).unwrap_or_default(),
                u8::from(!a.transitional).to_string(),
            ]
        }),
    )?;
    io::write_energy_levels(&out.join("energy_levels.csv"), &result.levels)?;
    io::write_json(
        &out.join("summary.json"),
        &json!({
            "kind": "sweep",
            "runs": result.runs.len(),
            "stable": result.stability_mask.iter().filter(|s| **s).count(),
            "escaped": result.runs.iter().filter(|r| r.escaped).count(),
            "epsilon_range": [plan.epsilon_grid.first(), plan.epsilon_grid.last()],
            "levels": result.levels,
        }),
    )?;
    Ok(())
}
