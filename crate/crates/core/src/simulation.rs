//! The coupled wave–particle time loop for one value of `ε`.
//!
//! Each step:
//! 1. predict the particle half a step ahead from the current field;
//! 2. propagate a copy of the field to `t + dt/2` with forcing interpolated
//!    from the current position to the predicted midpoint;
//! 3. move the particle with the midpoint-field gradient;
//! 4. propagate the field a full step with forcing interpolated between the
//!    old and new particle positions.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::NormalizedParams;
use crate::particle::{advance_from_midpoint, predict_half_step, ParticleState};
use crate::statistics::{build_histogram, mean_kinetic_energy, PositionHistogram, DEFAULT_BINS};
use crate::wavefield::{ForcingProjector, Propagator, WaveField};

/// Grid used for field snapshots.
pub const SNAPSHOT_POINTS: usize = 201;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x_p: f64,
    pub v_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSnapshot {
    pub time: f64,
    /// `(x, ξ)` on a uniform grid including the walls.
    pub samples: Vec<(f64, f64)>,
    /// Raw state for exact restart.
    pub field: WaveField,
}

impl FieldSnapshot {
    fn capture(time: f64, field: &WaveField) -> Self {
        Self {
            time,
            samples: field.sample_grid(SNAPSHOT_POINTS),
            field: field.clone(),
        }
    }

    /// Discrete L² norm of the sampled field.
    pub fn l2_norm(&self) -> f64 {
        let h = if self.samples.len() > 1 {
            self.samples[1].0 - self.samples[0].0
        } else {
            0.0
        };
        (self.samples.iter().map(|(_, v)| v * v).sum::<f64>() * h).sqrt()
    }
}

/// Outcome of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub epsilon: f64,
    pub trajectory: Vec<TrajectorySample>,
    pub field_snapshots: Vec<FieldSnapshot>,
    pub histogram: PositionHistogram,
    /// `⟨v_p²⟩/2` after the transient; `None` when no samples qualify.
    pub mean_kinetic: Option<f64>,
    pub escaped: bool,
    pub escape_time: Option<f64>,
    /// Set when the run aborted (e.g. field blow-up).
    pub failure: Option<String>,
    pub params_echo: NormalizedParams,
}

impl RunResult {
    /// Completed without escape or failure.
    pub fn is_stable(&self) -> bool {
        !self.escaped && self.failure.is_none()
    }

    /// Samples that count towards statistics.
    pub fn statistics_window(&self) -> &[TrajectorySample] {
        let start = self
            .trajectory
            .partition_point(|s| s.t < self.params_echo.t_transient);
        &self.trajectory[start..]
    }
}

/// Runs the coupled system from a quiescent field and a particle at rest.
pub fn run(p: &NormalizedParams) -> Result<RunResult> {
    run_with_snapshots(p, &[])
}

/// As [`run`], additionally capturing the field at the first step on or
/// after each requested time.
pub fn run_with_snapshots(p: &NormalizedParams, snapshot_times: &[f64]) -> Result<RunResult> {
    p.validate()?;
    let mut wanted: Vec<f64> = snapshot_times.to_vec();
    if let Some(bad) = wanted.iter().find(|t| !(**t >= 0.0 && **t <= p.t_final)) {
        return Err(crate::error::invalid(
            "snapshot_times",
            format!("{bad} outside [0, {}]", p.t_final),
        ));
    }
    wanted.sort_by(f64::total_cmp);
    let mut next_snapshot = 0;

    let dt = p.time_step();
    let n_steps = (p.t_final / dt).round() as usize;
    let stride = p.sample_stride();
    let n_modes = p.mode_count();

    let mut field = WaveField::for_params(p);
    let mut field_mid = field.clone();
    let full = Propagator::new(&field, dt)?;
    let half = Propagator::new(&field, 0.5 * dt)?;
    let projector = ForcingProjector::new(p);
    let mut f_now = vec![0.0; n_modes];
    let mut f_half = vec![0.0; n_modes];
    let mut f_next = vec![0.0; n_modes];

    let mut state = ParticleState::at_rest(p.particle_x0);
    let mut trajectory = Vec::with_capacity(n_steps / stride + 2);
    trajectory.push(TrajectorySample {
        t: 0.0,
        x_p: state.x_p,
        v_p: state.v_p,
    });
    let mut snapshots = Vec::new();
    while next_snapshot < wanted.len() && wanted[next_snapshot] <= 0.0 {
        snapshots.push(FieldSnapshot::capture(0.0, &field));
        next_snapshot += 1;
    }

    let mut escaped = false;
    let mut escape_time = None;
    let mut failure = None;
    projector.project_into(state.x_p, 0.0, &mut f_now);

    for step in 1..=n_steps {
        let t0 = (step - 1) as f64 * dt;
        let t1 = step as f64 * dt;

        let mid = predict_half_step(&field, state, dt, p);
        projector.project_into(mid.x_p, t0 + 0.5 * dt, &mut f_half);
        field_mid.coeffs.copy_from_slice(&field.coeffs);
        field_mid.coeff_rates.copy_from_slice(&field.coeff_rates);
        half.advance(&mut field_mid, &f_now, &f_half);

        let mut next = advance_from_midpoint(&field_mid, state, mid, dt, p);
        if next.escaped(p.box_length) {
            escaped = true;
            escape_time = Some(t1);
            trajectory.push(TrajectorySample {
                t: t1,
                x_p: next.x_p,
                v_p: next.v_p,
            });
            break;
        }

        projector.project_into(next.x_p, t1, &mut f_next);
        full.advance(&mut field, &f_now, &f_next);
        if p.inertial.is_none() {
            next.v_p = -p.alpha * field.value_and_slope(next.x_p).1;
        }
        state = next;
        std::mem::swap(&mut f_now, &mut f_next);

        let sample_now = step % stride == 0;
        if sample_now || step == n_steps {
            if let Err(e) = field.check_finite(t1) {
                failure = Some(e.to_string());
                break;
            }
        }
        if sample_now || step == n_steps {
            trajectory.push(TrajectorySample {
                t: t1,
                x_p: state.x_p,
                v_p: state.v_p,
            });
        }
        while next_snapshot < wanted.len() && (wanted[next_snapshot] <= t1 || step == n_steps) {
            snapshots.push(FieldSnapshot::capture(t1, &field));
            next_snapshot += 1;
        }
    }

    let mut result = RunResult {
        epsilon: p.epsilon,
        trajectory,
        field_snapshots: snapshots,
        histogram: PositionHistogram::empty(p.box_length, DEFAULT_BINS),
        mean_kinetic: None,
        escaped,
        escape_time,
        failure,
        params_echo: p.clone(),
    };
    finalize_statistics(&mut result, DEFAULT_BINS);
    Ok(result)
}

/// Recomputes the histogram and mean kinetic energy from the trajectory.
///
/// Escaped samples are excluded: the sample recorded at the escape step lies
/// outside the box and is kept in the trajectory only as a marker.
pub fn finalize_statistics(result: &mut RunResult, n_bins: usize) {
    let p = &result.params_echo;
    let end = if result.escaped {
        result.trajectory.len().saturating_sub(1)
    } else {
        result.trajectory.len()
    };
    let inside = &result.trajectory[..end];
    result.histogram = build_histogram(inside, p.t_transient, n_bins, p.box_length);
    result.mean_kinetic = mean_kinetic_energy(inside, p.t_transient);
}
