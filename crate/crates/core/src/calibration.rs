//! Search for the coupling and damping that produce a target mode.
//!
//! The forcing amplitude `γ₀` (only the product `αγ₀` matters) and the wave
//! damping `b` are free knobs. The search runs a `γ₀ × b` grid at one target
//! `ε`, analyses each run, and ranks the results: stable runs first, then by
//! distance of the interior peak count from the target, then coherent orbits
//! before transitional ones, then higher mean kinetic energy.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::params::NormalizedParams;
use crate::simulation;
use crate::statistics::{analyze_run, AnalysisConfig};

/// The default grid brackets the band between a pinned particle (weak
/// forcing) and one that walks out of the box (strong forcing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub gamma0: Vec<f64>,
    pub damping_b: Vec<f64>,
    pub target_epsilon: f64,
    pub target_interior_peaks: usize,
}

impl Default for CalibrationGrid {
    fn default() -> Self {
        Self {
            gamma0: vec![15.0, 17.5, 20.0, 22.5, 25.0, 30.0, 40.0, 50.0],
            damping_b: vec![0.05, 0.1, 0.3],
            target_epsilon: 2.73,
            target_interior_peaks: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCandidate {
    pub gamma0: f64,
    pub damping_b: f64,
    pub stable: bool,
    pub interior_peaks: usize,
    pub round_trips_per_period: Option<usize>,
    pub mean_kinetic: Option<f64>,
    pub effective_length: Option<f64>,
}

impl CalibrationCandidate {
    fn rank(&self, target: usize) -> (bool, usize, bool, f64) {
        (
            !self.stable,
            self.interior_peaks.abs_diff(target),
            self.round_trips_per_period != Some(1),
            -self.mean_kinetic.unwrap_or(0.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub grid: CalibrationGrid,
    /// Grid order: `γ₀` outer, `b` inner.
    pub candidates: Vec<CalibrationCandidate>,
    /// Index into `candidates` of the best-ranked point, `None` if no run
    /// stayed in the box.
    pub best: Option<usize>,
    /// Base parameters with the best `γ₀` and `b` applied (unchanged base
    /// when nothing was stable).
    pub best_params: NormalizedParams,
}

impl CalibrationReport {
    pub fn best_candidate(&self) -> Option<&CalibrationCandidate> {
        self.best.map(|i| &self.candidates[i])
    }
}

/// Runs the grid with `parallelism` workers; results do not depend on the
/// worker count.
pub fn calibrate(
    base: &NormalizedParams,
    grid: &CalibrationGrid,
    cfg: &AnalysisConfig,
    parallelism: usize,
) -> Result<CalibrationReport> {
    if grid.gamma0.is_empty() || grid.damping_b.is_empty() {
        return Err(invalid("calibration grid", "needs at least one gamma0 and one b"));
    }
    if parallelism == 0 {
        return Err(invalid("parallelism", "must be >= 1"));
    }
    let points: Vec<NormalizedParams> = grid
        .gamma0
        .iter()
        .flat_map(|&g| {
            grid.damping_b.iter().map(move |&b| NormalizedParams {
                gamma0: g,
                damping_b: b,
                ..base.with_epsilon(grid.target_epsilon)
            })
        })
        .collect();
    for p in &points {
        p.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| invalid("parallelism", e.to_string()))?;
    let candidates: Vec<CalibrationCandidate> = pool.install(|| {
        points
            .par_iter()
            .map(|p| candidate(p, cfg))
            .collect::<Result<_>>()
    })?;
    let best = (0..candidates.len())
        .filter(|&i| candidates[i].stable)
        .min_by(|&i, &j| {
            let (a, b) = (
                candidates[i].rank(grid.target_interior_peaks),
                candidates[j].rank(grid.target_interior_peaks),
            );
            a.partial_cmp(&b).unwrap_or(std::cmp::Ordering::Equal).then(i.cmp(&j))
        });
    let best_params = match best {
        Some(i) => NormalizedParams {
            gamma0: candidates[i].gamma0,
            damping_b: candidates[i].damping_b,
            ..base.clone()
        },
        None => base.clone(),
    };
    Ok(CalibrationReport {
        grid: grid.clone(),
        candidates,
        best,
        best_params,
    })
}

fn candidate(p: &NormalizedParams, cfg: &AnalysisConfig) -> Result<CalibrationCandidate> {
    let run = simulation::run(p)?;
    let a = analyze_run(&run, cfg);
    Ok(CalibrationCandidate {
        gamma0: p.gamma0,
        damping_b: p.damping_b,
        stable: a.stable,
        interior_peaks: a.modes.interior_peak_count,
        round_trips_per_period: a.round_trips_per_period,
        mean_kinetic: a.mean_kinetic,
        effective_length: a.modes.effective_length,
    })
}
