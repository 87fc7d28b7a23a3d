//! Many runs over an `ε` grid: concurrent execution, crash-safe persistence
//! with resume, and assembly of the bifurcation map.
//!
//! Layout of a sweep directory:
//!
//! ```text
//! plan.json                 written first
//! runs/eps_0000/ ...        one run directory per grid point, atomic
//! bifurcation_map.csv       ε rows × x-bin columns, PDF/PDF_max
//! kinetic_energy.csv        ε, E_k, stable
//! stability.csv             per-run status and mode diagnostics
//! energy_levels.csv         extracted plateaus
//! manifest.json             written last
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{self, fmt_f64, Manifest, RunStatus};
use crate::params::NormalizedParams;
use crate::simulation::{self, finalize_statistics, RunResult};
use crate::statistics::{analyze_run, extract_energy_levels, AnalysisConfig, EnergyLevels, RunAnalysis};

pub const PLAN: &str = "plan.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    pub epsilon_grid: Vec<f64>,
    pub base_params: NormalizedParams,
    pub parallelism: usize,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

/// What identifies a plan's results: worker count and location excluded.
#[derive(Serialize)]
struct PlanIdentity<'a> {
    epsilon_grid: &'a [f64],
    base_params: &'a NormalizedParams,
    analysis: &'a AnalysisConfig,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon_grid.is_empty() {
            return Err(invalid("epsilon_grid", "empty"));
        }
        if self.epsilon_grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("epsilon_grid", "must be strictly increasing"));
        }
        if self.epsilon_grid[0] < self.base_params.epsilon_min {
            return Err(invalid(
                "epsilon_grid",
                format!("values must be >= epsilon_min = {}", self.base_params.epsilon_min),
            ));
        }
        if self.parallelism == 0 {
            return Err(invalid("parallelism", "must be >= 1"));
        }
        for &eps in &self.epsilon_grid {
            self.base_params.with_epsilon(eps).validate()?;
        }
        Ok(())
    }

    pub fn params_at(&self, index: usize) -> NormalizedParams {
        self.base_params.with_epsilon(self.epsilon_grid[index])
    }

    fn identity_hash(&self) -> Result<String> {
        io::content_hash(&PlanIdentity {
            epsilon_grid: &self.epsilon_grid,
            base_params: &self.base_params,
            analysis: &self.analysis,
        })
    }
}

/// Uniform grid of `n_points` values over `[eps_min, eps_max]`, endpoints
/// included.
pub fn plan_sweep(
    eps_min: f64,
    eps_max: f64,
    n_points: usize,
    base_params: NormalizedParams,
) -> Result<SweepPlan> {
    if n_points < 2 {
        return Err(invalid("points", "need at least 2 grid points"));
    }
    if !(eps_min.is_finite() && eps_max.is_finite() && eps_max > eps_min) {
        return Err(invalid("eps_range", format!("need eps_min < eps_max, got [{eps_min}, {eps_max}]")));
    }
    if eps_min < base_params.epsilon_min {
        return Err(invalid(
            "eps_min",
            format!("{eps_min} is below epsilon_min = {}", base_params.epsilon_min),
        ));
    }
    let span = eps_max - eps_min;
    let last = (n_points - 1) as f64;
    let epsilon_grid = (0..n_points)
        .map(|i| if i + 1 == n_points { eps_max } else { eps_min + span * i as f64 / last })
        .collect();
    let plan = SweepPlan {
        epsilon_grid,
        base_params,
        parallelism: 1,
        output_dir: None,
        analysis: AnalysisConfig::default(),
    };
    plan.validate()?;
    Ok(plan)
}

/// `PDF(ε)/PDF_max(ε)` rows; `None` for runs without usable statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationMap {
    pub epsilons: Vec<f64>,
    pub x_centers: Vec<f64>,
    pub rows: Vec<Option<Vec<f64>>>,
    /// Every row is empty.
    pub all_escaped: bool,
}

pub fn assemble_bifurcation_map(runs: &[RunResult]) -> BifurcationMap {
    let x_centers = runs
        .first()
        .map(|r| r.histogram.centers())
        .unwrap_or_default();
    let rows: Vec<Option<Vec<f64>>> = runs
        .iter()
        .map(|r| (r.is_stable() && !r.histogram.is_empty()).then(|| r.histogram.relative_to_max()))
        .collect();
    BifurcationMap {
        epsilons: runs.iter().map(|r| r.epsilon).collect(),
        x_centers,
        all_escaped: rows.iter().all(Option::is_none),
        rows,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub runs: Vec<RunResult>,
    pub analyses: Vec<RunAnalysis>,
    pub bifurcation_map: BifurcationMap,
    /// `true` where the run completed inside the box.
    pub stability_mask: Vec<bool>,
    pub levels: EnergyLevels,
}

impl SweepResult {
    pub fn from_runs(runs: Vec<RunResult>, cfg: &AnalysisConfig) -> Self {
        let analyses: Vec<RunAnalysis> = runs.iter().map(|r| analyze_run(r, cfg)).collect();
        let levels = extract_energy_levels(&analyses, cfg);
        Self {
            bifurcation_map: assemble_bifurcation_map(&runs),
            stability_mask: runs.iter().map(RunResult::is_stable).collect(),
            analyses,
            levels,
            runs,
        }
    }
}

fn run_dir(root: &Path, index: usize) -> PathBuf {
    root.join("runs").join(format!("eps_{index:04}"))
}

fn run_one(p: &NormalizedParams, n_bins: usize) -> RunResult {
    match simulation::run(p) {
        Ok(mut r) => {
            if r.histogram.n_bins() != n_bins {
                finalize_statistics(&mut r, n_bins);
            }
            r
        }
        Err(e) => {
            let mut r = RunResult {
                epsilon: p.epsilon,
                trajectory: Vec::new(),
                field_snapshots: Vec::new(),
                histogram: crate::statistics::PositionHistogram::empty(p.box_length, n_bins),
                mean_kinetic: None,
                escaped: false,
                escape_time: None,
                failure: Some(e.to_string()),
                params_echo: p.clone(),
            };
            finalize_statistics(&mut r, n_bins);
            r
        }
    }
}

/// Loads a previously completed run if its parameters match.
fn try_resume(dir: &Path, p: &NormalizedParams) -> Option<RunResult> {
    let manifest = Manifest::read(dir).ok()?;
    if manifest.input_hash != io::content_hash(p).ok()? {
        return None;
    }
    io::load_run(dir).ok()
}

/// Runs every grid point with at most `parallelism` concurrent simulations.
///
/// With an output directory, each run is persisted as soon as it finishes;
/// when `resume` is set, runs already on disk with matching parameters are
/// loaded instead of recomputed. Failed runs are recorded, never fatal.
pub fn execute(plan: &SweepPlan, resume: bool) -> Result<SweepResult> {
    plan.validate()?;
    let started = Instant::now();
    let identity = plan.identity_hash()?;
    if let Some(root) = &plan.output_dir {
        fs::create_dir_all(root.join("runs"))?;
        io::clean_temporaries(&root.join("runs"))?;
        let plan_path = root.join(PLAN);
        if resume && plan_path.exists() {
            let old: SweepPlan = io::read_json(&plan_path)?;
            if old.identity_hash()? != identity {
                return Err(invalid(
                    "resume",
                    format!("{} holds a different sweep plan", root.display()),
                ));
            }
        }
        io::write_json(&plan_path, plan)?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.parallelism)
        .build()
        .map_err(|e| invalid("parallelism", e.to_string()))?;
    let n_bins = plan.analysis.n_bins;
    let outcomes: Vec<Result<RunResult>> = pool.install(|| {
        (0..plan.epsilon_grid.len())
            .into_par_iter()
            .map(|i| {
                let p = plan.params_at(i);
                let dir = plan.output_dir.as_ref().map(|root| run_dir(root, i));
                if resume {
                    if let Some(r) = dir.as_deref().and_then(|d| try_resume(d, &p)) {
                        return Ok(r);
                    }
                }
                let t0 = Instant::now();
                let r = run_one(&p, n_bins);
                if let Some(d) = &dir {
                    io::save_run(d, &r, t0.elapsed().as_secs_f64())?;
                }
                Ok(r)
            })
            .collect()
    });
    let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let result = SweepResult::from_runs(runs, &plan.analysis);

    if let Some(root) = &plan.output_dir {
        write_sweep_tables(root, &result)?;
        let mut m = Manifest::new("sweep", plan)?;
        m.input_hash = identity;
        m.wall_clock_seconds = started.elapsed().as_secs_f64();
        m.status = RunStatus::Complete;
        m.reason = result.bifurcation_map.all_escaped.then(|| "every run escaped or failed".to_string());
        m.summary = serde_json::json!({
            "runs": result.runs.len(),
            "stable": result.stability_mask.iter().filter(|s| **s).count(),
            "levels": result.levels,
        });
        m.write(root)?;
    }
    Ok(result)
}

/// True when `root` holds a finished sweep of exactly this plan.
pub fn is_complete(root: &Path, plan: &SweepPlan) -> bool {
    let Ok(m) = Manifest::read(root) else {
        return false;
    };
    m.command == "sweep" && plan.identity_hash().is_ok_and(|h| h == m.input_hash)
}

/// Re-reads a persisted sweep.
pub fn load_sweep(root: &Path) -> Result<(SweepPlan, SweepResult)> {
    let plan: SweepPlan = io::read_json(&root.join(PLAN))?;
    let runs = (0..plan.epsilon_grid.len())
        .map(|i| io::load_run(&run_dir(root, i)))
        .collect::<Result<Vec<_>>>()?;
    let result = SweepResult::from_runs(runs, &plan.analysis);
    Ok((plan, result))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Writes the sweep-level CSV tables.
pub fn write_sweep_tables(root: &Path, result: &SweepResult) -> Result<()> {
    let map = &result.bifurcation_map;
    let mut header = vec!["epsilon".to_string()];
    header.extend(map.x_centers.iter().map(|x| fmt_f64(*x)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_csv(
        &root.join("bifurcation_map.csv"),
        &header_refs,
        map.epsilons.iter().zip(&map.rows).map(|(eps, row)| {
            let mut line = vec![fmt_f64(*eps)];
            match row {
                Some(values) => line.extend(values.iter().map(|v| fmt_f64(*v))),
                None => line.extend(std::iter::repeat_n(String::new(), map.x_centers.len())),
            }
            line
        }),
    )?;
    io::write_csv(
        &root.join("kinetic_energy.csv"),
        &["epsilon", "mean_kinetic", "stable"],
        result.runs.iter().map(|r| {
            vec![
                fmt_f64(r.epsilon),
                opt(r.mean_kinetic),
                u8::from(r.is_stable()).to_string(),
            ]
        }),
    )?;
    io::write_csv(
        &root.join("stability.csv"),
        &[
            "epsilon",
            "stable",
            "status",
            "escape_time",
            "interior_peaks",
            "effective_length",
            "period",
            "round_trips_per_period",
            "transitional",
        ],
        result.runs.iter().zip(&result.analyses).map(|(r, a)| {
            let status = match RunStatus::of(r) {
                RunStatus::Complete => "complete",
                RunStatus::Escaped => "escaped",
                RunStatus::Failed => "failed",
            };
            vec![
                fmt_f64(r.epsilon),
                u8::from(r.is_stable()).to_string(),
                status.to_string(),
                opt(r.escape_time),
                a.modes.interior_peak_count.to_string(),
                opt(a.modes.effective_length),
                opt(a.period),
                a.round_trips_per_period.map(|n| n.to_string()).unwrap_or_default(),
                u8::from(a.transitional).to_string(),
            ]
        }),
    )?;
    io::write_energy_levels(&root.join("energy_levels.csv"), &result.levels)
}

/// Reads `bifurcation_map.csv` back into a map.
pub fn read_bifurcation_map(path: &Path) -> Result<BifurcationMap> {
    let bad = |reason: &str| Error::Malformed {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let (header, rows) = io::read_csv(path)?;
    let x_centers = header[1..]
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| bad("bad header")))
        .collect::<Result<Vec<_>>>()?;
    let mut epsilons = Vec::new();
    let mut out = Vec::new();
    for row in rows {
        epsilons.push(row[0].parse::<f64>().map_err(|_| bad("bad epsilon"))?);
        if row[1..].iter().all(String::is_empty) {
            out.push(None);
        } else {
            out.push(Some(
                row[1..]
                    .iter()
                    .map(|s| s.parse::<f64>().map_err(|_| bad("bad value")))
                    .collect::<Result<Vec<_>>>()?,
            ));
        }
    }
    Ok(BifurcationMap {
        epsilons,
        x_centers,
        all_escaped: out.iter().all(Option::is_none),
        rows: out,
    })
}
