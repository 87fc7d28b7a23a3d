//! Particle state and its equation of motion.
//!
//! Default law: massless guiding `ẋ = −α ∂ξ/∂x`. Optional inertial law:
//! `m ẍ = −D ẋ − f ∂ξ/∂x`, integrated with the drag treated exactly so the
//! overdamped limit stays stable and reduces to the massless midpoint rule.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::params::{InertialParams, NormalizedParams};
use crate::wavefield::WaveField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x_p: f64,
    pub v_p: f64,
}

impl ParticleState {
    pub fn at_rest(x_p: f64) -> Self {
        Self { x_p, v_p: 0.0 }
    }

    pub fn escaped(&self, box_length: f64) -> bool {
        !(self.x_p.abs() <= 0.5 * box_length)
    }
}

/// `v = −α ∂ξ/∂x` at `x_p`.
pub fn guide_velocity(field: &WaveField, x_p: f64, alpha: f64) -> Result<f64> {
    Ok(-alpha * field.evaluate_gradient(x_p)?)
}

fn slope(field: &WaveField, x: f64) -> f64 {
    field.value_and_slope(x).1
}

/// `(1 − e^{−λt})/λ` and `(t − that)/λ`, with their `λ → 0` limits.
fn drag_kernels(lambda: f64, t: f64) -> (f64, f64) {
    let z = lambda * t;
    if z.abs() < 1e-8 {
        (t * (1.0 - 0.5 * z), 0.5 * t * t * (1.0 - z / 3.0))
    } else {
        let phi1 = -(-z).exp_m1() / lambda;
        (phi1, (t - phi1) / lambda)
    }
}

fn inertial_advance(state: ParticleState, accel: f64, i: &InertialParams, t: f64) -> ParticleState {
    let lambda = i.drag / i.mass;
    let (phi1, phi2) = drag_kernels(lambda, t);
    ParticleState {
        x_p: state.x_p + phi1 * state.v_p + phi2 * accel,
        v_p: (-lambda * t).exp() * state.v_p + phi1 * accel,
    }
}

/// Half-step prediction from the field at the start of the step.
pub fn predict_half_step(
    field_now: &WaveField,
    state: ParticleState,
    dt: f64,
    p: &NormalizedParams,
) -> ParticleState {
    let grad = slope(field_now, state.x_p);
    match &p.inertial {
        None => {
            let v = -p.alpha * grad;
            ParticleState {
                x_p: state.x_p + 0.5 * dt * v,
                v_p: v,
            }
        }
        Some(i) => inertial_advance(state, -i.coupling * grad / i.mass, i, 0.5 * dt),
    }
}

/// Completes a midpoint step given the half-step prediction and the field
/// at `t + dt/2`.
pub fn advance_from_midpoint(
    field_mid: &WaveField,
    state: ParticleState,
    midpoint: ParticleState,
    dt: f64,
    p: &NormalizedParams,
) -> ParticleState {
    let grad = slope(field_mid, midpoint.x_p);
    match &p.inertial {
        None => {
            let v = -p.alpha * grad;
            ParticleState {
                x_p: state.x_p + dt * v,
                v_p: v,
            }
        }
        Some(i) => inertial_advance(state, -i.coupling * grad / i.mass, i, dt),
    }
}

/// One explicit-midpoint step. In massless mode the returned `v_p` is the
/// midpoint velocity; callers holding the end-of-step field refresh it with
/// [`guide_velocity`].
pub fn step_particle(
    field_now: &WaveField,
    field_mid: &WaveField,
    state: ParticleState,
    dt: f64,
    p: &NormalizedParams,
) -> ParticleState {
    let mid = predict_half_step(field_now, state, dt, p);
    advance_from_midpoint(field_mid, state, mid, dt, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn single_mode(amplitude: f64) -> WaveField {
        let mut f = WaveField::zeros(10.0, 1.0, 0.0, 3);
        f.coeffs[0] = amplitude;
        f
    }

    fn massless(alpha: f64) -> NormalizedParams {
        NormalizedParams {
            alpha,
            box_length: 10.0,
            ..NormalizedParams::desk()
        }
    }

    #[test]
    fn guide_examples() {
        let zero = WaveField::zeros(10.0, 1.0, 0.0, 3);
        assert_eq!(guide_velocity(&zero, 1.0, 2.0).unwrap(), 0.0);
        let f = single_mode(1.0);
        assert!(guide_velocity(&f, 0.0, 2.0).unwrap().abs() < 1e-15);
        // On the left flank of the first mode the slope is positive.
        let x = -2.0;
        assert!(f.evaluate_gradient(x).unwrap() > 0.0);
        assert!(guide_velocity(&f, x, 2.0).unwrap() < 0.0);
        assert!(guide_velocity(&f, 6.0, 2.0).is_err());
    }

    fn frozen_trajectory(dt: f64, t_end: f64) -> f64 {
        let f = single_mode(0.8);
        let p = massless(1.5);
        let mut s = ParticleState::at_rest(-1.0);
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            s = step_particle(&f, &f, s, dt, &p);
        }
        s.x_p
    }

    #[test]
    fn frozen_field_converges_at_second_order() {
        // With u = k(x + L/2), ẋ = −α a k cos u becomes u' = −c cos u,
        // c = α a k², whose solution is tan(u/2 + π/4) ∝ e^{−ct}.
        let (alpha, a, l) = (1.5, 0.8, 10.0);
        let k = PI / l;
        let c = alpha * a * k * k;
        let t_end = 3.0;
        let u0 = k * (-1.0 + l / 2.0);
        let w = (u0 / 2.0 + PI / 4.0).tan() * (-c * t_end).exp();
        let u = 2.0 * (w.atan() - PI / 4.0);
        let exact = u / k - l / 2.0;

        let e1 = (frozen_trajectory(0.1, t_end) - exact).abs();
        let e2 = (frozen_trajectory(0.05, t_end) - exact).abs();
        let e3 = (frozen_trajectory(0.025, t_end) - exact).abs();
        let r1 = (e1 / e2).log2();
        let r2 = (e2 / e3).log2();
        assert!(r1 > 1.8 && r2 > 1.8, "orders {r1} {r2} (errors {e1} {e2} {e3})");
    }

    #[test]
    fn pure_drag_decays_exponentially() {
        let f = WaveField::zeros(10.0, 1.0, 0.0, 3);
        let p = NormalizedParams {
            inertial: Some(InertialParams {
                mass: 2.0,
                drag: 0.5,
                coupling: 0.0,
            }),
            ..massless(1.0)
        };
        let mut s = ParticleState { x_p: 0.0, v_p: 1.0 };
        let dt = 0.1;
        for _ in 0..100 {
            s = step_particle(&f, &f, s, dt, &p);
        }
        assert!((s.v_p - (-0.25f64 * 10.0).exp()).abs() < 1e-12);
        assert!((s.x_p - (1.0 - (-2.5f64).exp()) / 0.25).abs() < 1e-12);
    }

    #[test]
    fn overdamped_inertial_matches_massless() {
        let f = single_mode(0.8);
        let alpha = 1.5;
        let drag = 1.0;
        let inertial = NormalizedParams {
            inertial: Some(InertialParams {
                mass: 1e-4,
                drag,
                coupling: alpha * drag,
            }),
            ..massless(alpha)
        };
        let plain = massless(alpha);
        let dt = 0.01;
        let mut a = ParticleState::at_rest(-1.0);
        let mut b = ParticleState::at_rest(-1.0);
        for _ in 0..300 {
            a = step_particle(&f, &f, a, dt, &inertial);
            b = step_particle(&f, &f, b, dt, &plain);
        }
        let disp_a = a.x_p + 1.0;
        let disp_b = b.x_p + 1.0;
        assert!((disp_a - disp_b).abs() < 0.01 * disp_b.abs(), "{disp_a} vs {disp_b}");
    }

    #[test]
    fn mirrored_field_negates_motion() {
        let mut f = WaveField::zeros(10.0, 1.0, 0.0, 6);
        f.coeffs = vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.05];
        let mut mirrored = f.clone();
        // sin(k_m(−x + L/2)) = (−1)^{m+1} sin(k_m(x + L/2)).
        for (m, a) in mirrored.coeffs.iter_mut().enumerate() {
            if m % 2 == 1 {
                *a = -*a;
            }
        }
        let p = massless(2.0);
        let mut s = ParticleState::at_rest(1.3);
        let mut r = ParticleState::at_rest(-1.3);
        for _ in 0..500 {
            s = step_particle(&f, &f, s, 0.02, &p);
            r = step_particle(&mirrored, &mirrored, r, 0.02, &p);
            assert!((s.x_p + r.x_p).abs() < 1e-9);
        }
    }

    #[test]
    fn escape_flag() {
        assert!(ParticleState::at_rest(5.1).escaped(10.0));
        assert!(!ParticleState::at_rest(-5.0).escaped(10.0));
        assert!(ParticleState::at_rest(f64::NAN).escaped(10.0));
    }
}
