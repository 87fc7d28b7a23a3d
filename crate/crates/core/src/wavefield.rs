//! Sine-mode representation of the damped, forced RS field on the box and
//! its exact-in-time propagation.
//!
//! The field is `ξ(x,t) = Σ a_m(t) sin(k_m (x + L/2))` with `k_m = πm/L`.
//! The sine basis satisfies `ξ = ξ_xx = 0` at both walls and diagonalizes
//! `−∂⁴ + ε∂² − ε²/4`, so each mode obeys an independent damped oscillator
//! `a'' + b a' + ω_m² a = F_m(t)` with `ω_m = k_m² + ε/2`.
//!
//! Sliding walls (`ξ_x = ξ_xxx = 0`) use the cosine basis `cos(k_m(x + L/2))`,
//! `m = 0, 1, …`, which is diagonal for the same operator.

pub mod oracle;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dispersion::rs_omega;
use crate::error::{invalid, Error, Result};
use crate::params::{Boundary, NormalizedParams};

/// `|a_m|` above which a run is declared blown up.
pub const BLOW_UP_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveField {
    pub coeffs: Vec<f64>,
    pub coeff_rates: Vec<f64>,
    pub mode_wavenumbers: Vec<f64>,
    pub box_length: f64,
    pub epsilon: f64,
    pub damping_b: f64,
    #[serde(default)]
    pub boundary: Boundary,
}

impl WaveField {
    /// Quiescent field `ξ = ξ_t = 0` with simply-supported walls.
    pub fn zeros(box_length: f64, epsilon: f64, damping_b: f64, n_modes: usize) -> Self {
        Self::zeros_with(Boundary::SimplySupported, box_length, epsilon, damping_b, n_modes)
    }

    pub fn zeros_with(
        boundary: Boundary,
        box_length: f64,
        epsilon: f64,
        damping_b: f64,
        n_modes: usize,
    ) -> Self {
        let first = boundary.first_mode();
        Self {
            coeffs: vec![0.0; n_modes],
            coeff_rates: vec![0.0; n_modes],
            mode_wavenumbers: (first..first + n_modes)
                .map(|m| PI * m as f64 / box_length)
                .collect(),
            box_length,
            epsilon,
            damping_b,
            boundary,
        }
    }

    pub fn for_params(p: &NormalizedParams) -> Self {
        Self::zeros_with(p.boundary, p.box_length, p.epsilon, p.damping_b, p.mode_count())
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.box_length
    }

    pub fn omega(&self, m: usize) -> f64 {
        rs_omega(self.mode_wavenumbers[m], self.epsilon)
    }

    fn check_inside(&self, x: f64) -> Result<()> {
        let half = self.half_length();
        if x.abs() <= half {
            Ok(())
        } else {
            Err(Error::OutOfBox { x, half })
        }
    }

    /// `ξ(x)`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.check_inside(x)?;
        Ok(self.value_and_slope(x).0)
    }

    /// `∂ξ/∂x` at `x`.
    pub fn evaluate_gradient(&self, x: f64) -> Result<f64> {
        self.check_inside(x)?;
        Ok(self.value_and_slope(x).1)
    }

    /// `(ξ, ξ_x)` at `x` without the bounds check.
    ///
    /// Mode phases are generated by repeated rotation by `θ = π(x + L/2)/L`.
    pub fn value_and_slope(&self, x: f64) -> (f64, f64) {
        let theta = PI * (x + self.half_length()) / self.box_length;
        let (s1, c1) = theta.sin_cos();
        let (mut s, mut c) = self.boundary.start_phase(s1, c1);
        let mut value = 0.0;
        let mut slope = 0.0;
        let sine = self.boundary == Boundary::SimplySupported;
        for (&a, &k) in self.coeffs.iter().zip(&self.mode_wavenumbers) {
            if sine {
                value += a * s;
                slope += a * k * c;
            } else {
                value += a * c;
                slope -= a * k * s;
            }
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
        (value, slope)
    }

    /// `ξ` on `n_points` uniformly spaced positions including both walls.
    pub fn sample_grid(&self, n_points: usize) -> Vec<(f64, f64)> {
        let half = self.half_length();
        let n = n_points.max(2);
        (0..n)
            .map(|i| {
                let x = -half + self.box_length * i as f64 / (n - 1) as f64;
                (x, self.value_and_slope(x).0)
            })
            .collect()
    }

    /// Per-mode energies `(ȧ_m² + ω_m² a_m²)/2`.
    pub fn mode_energies(&self) -> Vec<f64> {
        (0..self.n_modes())
            .map(|m| {
                let w = self.omega(m);
                0.5 * (self.coeff_rates[m].powi(2) + (w * self.coeffs[m]).powi(2))
            })
            .collect()
    }

    pub fn energy(&self) -> f64 {
        self.mode_energies().iter().sum()
    }

    /// Advances by `dt` under forcing interpolated linearly from
    /// `forcing_now` to `forcing_next`.
    pub fn step(&self, forcing_now: &[f64], forcing_next: &[f64], dt: f64) -> Result<WaveField> {
        let prop = Propagator::new(self, dt)?;
        let mut next = self.clone();
        prop.advance(&mut next, forcing_now, forcing_next);
        next.check_finite(dt)?;
        Ok(next)
    }

    /// Fails if any coefficient is non-finite or exceeds [`BLOW_UP_THRESHOLD`].
    pub fn check_finite(&self, time: f64) -> Result<()> {
        let worst = self
            .coeffs
            .iter()
            .chain(&self.coeff_rates)
            .fold(0.0f64, |acc, a| if a.is_finite() { acc.max(a.abs()) } else { f64::INFINITY });
        if worst > BLOW_UP_THRESHOLD {
            Err(Error::BlowUp {
                magnitude: worst,
                time,
            })
        } else {
            Ok(())
        }
    }
}

/// Closed-form one-step propagator of `a'' + b a' + ω² a = F(t)` for each
/// mode, exact for piecewise-linear `F`.
#[derive(Debug, Clone)]
pub struct Propagator {
    dt: f64,
    damping_b: f64,
    omega_sq: Vec<f64>,
    /// `e^{−bt/2} cos Ωt` (cosh for overdamped modes).
    c: Vec<f64>,
    /// `e^{−bt/2} sin Ωt / Ω` (sinh / t limits likewise).
    s: Vec<f64>,
}

impl Propagator {
    pub fn new(field: &WaveField, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {dt}")));
        }
        let beta = 0.5 * field.damping_b;
        let decay = (-beta * dt).exp();
        let n = field.n_modes();
        let mut omega_sq = Vec::with_capacity(n);
        let mut c = Vec::with_capacity(n);
        let mut s = Vec::with_capacity(n);
        for m in 0..n {
            let w = field.omega(m);
            let w2 = w * w;
            let disc = w2 - beta * beta;
            let (cm, sm) = if disc > 1e-12 * w2.max(1e-300) {
                let big = disc.sqrt();
                let (sin, cos) = (big * dt).sin_cos();
                (cos, sin / big)
            } else if disc < -1e-12 * w2.max(1e-300) {
                let big = (-disc).sqrt();
                ((big * dt).cosh(), (big * dt).sinh() / big)
            } else {
                (1.0, dt)
            };
            omega_sq.push(w2);
            c.push(decay * cm);
            s.push(decay * sm);
        }
        Ok(Self {
            dt,
            damping_b: field.damping_b,
            omega_sq,
            c,
            s,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// In-place advance by `dt`.
    pub fn advance(&self, field: &mut WaveField, forcing_now: &[f64], forcing_next: &[f64]) {
        let beta = 0.5 * self.damping_b;
        let inv_dt = 1.0 / self.dt;
        for m in 0..field.coeffs.len() {
            let w2 = self.omega_sq[m];
            let f0 = forcing_now.get(m).copied().unwrap_or(0.0);
            let f1 = forcing_next.get(m).copied().unwrap_or(0.0);
            // Particular solution A + B t for F = f0 + (f1 - f0) t / dt.
            let slope = (f1 - f0) * inv_dt;
            let b_lin = slope / w2;
            let a_const = (f0 - self.damping_b * b_lin) / w2;
            let a0 = field.coeffs[m] - a_const;
            let v0 = field.coeff_rates[m] - b_lin;
            let (c, s) = (self.c[m], self.s[m]);
            field.coeffs[m] = a_const + b_lin * self.dt + a0 * c + (v0 + beta * a0) * s;
            field.coeff_rates[m] = b_lin + v0 * c - (beta * v0 + w2 * a0) * s;
        }
    }
}

/// Precomputed sine-Galerkin projection of the moving Gaussian forcing
/// `F = −γ₀ ε sin(2εt) g(x − x_p)`, `g` a unit-mass Gaussian of width `π/√ε`.
#[derive(Debug, Clone)]
pub struct ForcingProjector {
    box_length: f64,
    amplitude: f64,
    drive_frequency: f64,
    boundary: Boundary,
    /// `(2/L) exp(−k_m² ã² / 4)` per mode (`1/L` for a constant mode).
    overlap: Vec<f64>,
}

impl ForcingProjector {
    pub fn new(p: &NormalizedParams) -> Self {
        let width = p.forcing_width();
        let n = p.mode_count();
        let first = p.boundary.first_mode();
        let overlap = (first..first + n)
            .map(|m| {
                let k = PI * m as f64 / p.box_length;
                let norm = if m == 0 { 1.0 } else { 2.0 } / p.box_length;
                norm * (-(k * width).powi(2) / 4.0).exp()
            })
            .collect();
        Self {
            box_length: p.box_length,
            amplitude: p.forcing_amplitude(),
            drive_frequency: 2.0 * p.epsilon,
            boundary: p.boundary,
            overlap,
        }
    }

    /// Per-mode forcing `F_m(t)` for a particle at `x_p`, written into `out`.
    pub fn project_into(&self, x_p: f64, t: f64, out: &mut [f64]) {
        let scale = -self.amplitude * (self.drive_frequency * t).sin();
        if scale == 0.0 {
            out.iter_mut().for_each(|f| *f = 0.0);
            return;
        }
        let theta = PI * (x_p + 0.5 * self.box_length) / self.box_length;
        let (s1, c1) = theta.sin_cos();
        let (mut s, mut c) = self.boundary.start_phase(s1, c1);
        let sine = self.boundary == Boundary::SimplySupported;
        for (f, &w) in out.iter_mut().zip(&self.overlap) {
            *f = scale * w * if sine { s } else { c };
            let next_s = s * c1 + c * s1;
            c = c * c1 - s * s1;
            s = next_s;
        }
    }

    pub fn n_modes(&self) -> usize {
        self.overlap.len()
    }
}

/// Per-mode forcing list `F_m(t)` for a particle at `x_p`.
pub fn project_forcing(x_p: f64, t: f64, p: &NormalizedParams) -> Result<Vec<f64>> {
    let half = p.half_length();
    if !(x_p.abs() < half) {
        return Err(Error::OutOfBox { x: x_p, half });
    }
    if p.epsilon < p.epsilon_min {
        return Err(invalid(
            "epsilon",
            format!("forcing needs epsilon >= {}", p.epsilon_min),
        ));
    }
    let proj = ForcingProjector::new(p);
    let mut out = vec![0.0; proj.n_modes()];
    proj.project_into(x_p, t, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(n_modes: usize, mode: usize, box_length: f64) -> WaveField {
        let mut f = WaveField::zeros(box_length, 1.0, 0.0, n_modes);
        f.coeffs[mode] = 1.0;
        f
    }

    #[test]
    fn evaluate_examples() {
        let zero = WaveField::zeros(PI, 1.0, 0.0, 8);
        assert_eq!(zero.evaluate(0.3).unwrap(), 0.0);
        assert_eq!(zero.evaluate_gradient(0.3).unwrap(), 0.0);
        assert!((unit(4, 0, PI).evaluate(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(unit(4, 1, PI).evaluate(0.0).unwrap().abs() < 1e-15);
        assert!(unit(4, 0, PI).evaluate_gradient(0.0).unwrap().abs() < 1e-15);
        assert!(matches!(
            zero.evaluate(2.0),
            Err(Error::OutOfBox { .. })
        ));
        assert!(zero.evaluate_gradient(-1.6).is_err());
    }

    #[test]
    fn walls_are_nodes() {
        let mut f = WaveField::zeros(7.0, 1.0, 0.0, 12);
        for (m, a) in f.coeffs.iter_mut().enumerate() {
            *a = 1.0 / (m as f64 + 1.0);
        }
        assert!(f.evaluate(3.5).unwrap().abs() < 1e-13);
        assert!(f.evaluate(-3.5).unwrap().abs() < 1e-13);
    }

    #[test]
    fn gradient_matches_central_difference() {
        let mut f = WaveField::zeros(20.0, 1.3, 0.0, 30);
        for (m, a) in f.coeffs.iter_mut().enumerate() {
            *a = ((m * 7919) % 13) as f64 / 13.0 - 0.5;
        }
        let h = 1e-5;
        for i in 0..20 {
            let x = -9.0 + 0.9 * i as f64;
            let fd = (f.evaluate(x + h).unwrap() - f.evaluate(x - h).unwrap()) / (2.0 * h);
            let exact = f.evaluate_gradient(x).unwrap();
            assert!((fd - exact).abs() < 1e-6, "x={x} fd={fd} exact={exact}");
        }
    }

    #[test]
    fn undamped_mode_returns_after_one_period() {
        let mut f = unit(3, 2, 5.0);
        f.coeff_rates[2] = 0.3;
        let w = f.omega(2);
        let steps = 1000;
        let dt = 2.0 * PI / w / steps as f64;
        let prop = Propagator::new(&f, dt).unwrap();
        let zeros = vec![0.0; 3];
        let start = f.clone();
        for _ in 0..steps {
            prop.advance(&mut f, &zeros, &zeros);
        }
        assert!((f.coeffs[2] - start.coeffs[2]).abs() < 1e-10);
        assert!((f.coeff_rates[2] - start.coeff_rates[2]).abs() < 1e-10 * w);
    }

    #[test]
    fn damped_mode_decays_with_envelope() {
        let b = 0.05;
        let mut f = WaveField::zeros(5.0, 1.0, b, 1);
        f.coeffs[0] = 1.0;
        let w = f.omega(0);
        let period = 2.0 * PI / w;
        let dt = period / 200.0;
        let prop = Propagator::new(&f, dt).unwrap();
        let e0 = f.energy();
        let zeros = [0.0];
        // Analytic damped oscillator, independent of the propagator.
        let beta = b / 2.0;
        let big = (w * w - beta * beta).sqrt();
        for step in 1..=2000 {
            prop.advance(&mut f, &zeros, &zeros);
            let t = step as f64 * dt;
            let exact = (-beta * t).exp() * ((big * t).cos() + beta / big * (big * t).sin());
            assert!((f.coeffs[0] - exact).abs() < 1e-12);
        }
        let t = 2000.0 * dt;
        let ratio = f.energy() / e0 / (-b * t).exp();
        assert!((ratio - 1.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn constant_forcing_settles_to_static_deflection() {
        let mut f = WaveField::zeros(5.0, 1.0, 0.5, 2);
        let force = [0.7, -0.2];
        let prop = Propagator::new(&f, 0.05).unwrap();
        for _ in 0..20_000 {
            prop.advance(&mut f, &force, &force);
        }
        for m in 0..2 {
            let w = f.omega(m);
            assert!((f.coeffs[m] - force[m] / (w * w)).abs() < 1e-10);
        }
    }

    #[test]
    fn linear_forcing_is_integrated_exactly() {
        // a'' + ω² a = c t, a(0)=a'(0)=0  =>  a = c (t - sin(ωt)/ω) / ω².
        let mut f = WaveField::zeros(3.0, 0.0, 0.0, 1);
        let w = f.omega(0);
        let c = 0.4;
        let dt = 0.37;
        let prop = Propagator::new(&f, dt).unwrap();
        let mut t = 0.0;
        for _ in 0..50 {
            prop.advance(&mut f, &[c * t], &[c * (t + dt)]);
            t += dt;
        }
        let exact = c * (t - (w * t).sin() / w) / (w * w);
        assert!((f.coeffs[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn overdamped_mode_matches_analytic() {
        let mut f = WaveField::zeros(30.0, 0.0, 1.0, 1);
        f.coeffs[0] = 1.0;
        let w = f.omega(0);
        let beta: f64 = 0.5;
        assert!(beta > w);
        let r = (beta * beta - w * w).sqrt();
        let prop = Propagator::new(&f, 0.1).unwrap();
        for _ in 0..30 {
            prop.advance(&mut f, &[0.0], &[0.0]);
        }
        let t = 3.0;
        let exact = (-beta * t).exp() * ((r * t).cosh() + beta / r * (r * t).sinh());
        assert!((f.coeffs[0] - exact).abs() < 1e-12);
    }

    #[test]
    fn blow_up_detected() {
        let mut f = WaveField::zeros(5.0, 1.0, 0.0, 2);
        f.coeffs[1] = 2e6;
        assert!(matches!(f.check_finite(1.0), Err(Error::BlowUp { .. })));
        f.coeffs[1] = f64::NAN;
        assert!(f.step(&[0.0; 2], &[0.0; 2], 0.1).is_err());
    }

    #[test]
    fn forcing_vanishes_at_t_zero() {
        let p = NormalizedParams::desk().with_epsilon(2.0);
        let f = project_forcing(1.0, 0.0, &p).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn centered_particle_excites_only_symmetric_modes() {
        let p = NormalizedParams::desk().with_epsilon(2.0);
        let f = project_forcing(0.0, 0.3, &p).unwrap();
        for (m, v) in f.iter().enumerate() {
            if (m + 1) % 2 == 0 {
                assert!(v.abs() < 1e-15, "mode {} = {v}", m + 1);
            }
        }
        assert!(f[0].abs() > 0.0);
    }

    #[test]
    fn forcing_rejects_outside_particle() {
        let p = NormalizedParams::desk();
        assert!(project_forcing(10.0, 1.0, &p).is_err());
        let low = NormalizedParams {
            epsilon: 0.01,
            ..NormalizedParams::desk()
        };
        assert!(project_forcing(0.0, 1.0, &low).is_err());
    }

    #[test]
    fn forcing_matches_quadrature() {
        // Trapezoid quadrature of (2/L)∫ F(x) sin(k_m(x + L/2)) dx on 4096 points.
        let p = NormalizedParams {
            box_length: 40.0,
            ..NormalizedParams::desk().with_epsilon(2.5)
        };
        let width = p.forcing_width();
        let x_p: f64 = 1.7;
        assert!(p.half_length() - x_p.abs() >= 3.0 * width);
        let t = 0.41;
        let closed = project_forcing(x_p, t, &p).unwrap();
        let n = 4096;
        let h = p.box_length / (n - 1) as f64;
        let drive = -p.gamma0 * p.epsilon * (2.0 * p.epsilon * t).sin();
        for (m, &cf) in closed.iter().enumerate().take(40) {
            let k = PI * (m + 1) as f64 / p.box_length;
            let mut acc = 0.0;
            for i in 0..n {
                let x = -p.half_length() + i as f64 * h;
                let g = (-((x - x_p) / width).powi(2)).exp() / (width * PI.sqrt());
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                acc += w * drive * g * (k * (x + p.half_length())).sin();
            }
            let quad = 2.0 / p.box_length * acc * h;
            assert!((quad - cf).abs() < 1e-8, "mode {} quad {quad} closed {cf}", m + 1);
        }
    }

    #[test]
    fn sliding_walls_have_zero_slope() {
        let mut f = WaveField::zeros_with(Boundary::Sliding, 7.0, 1.0, 0.0, 12);
        assert_eq!(f.mode_wavenumbers[0], 0.0);
        for (m, a) in f.coeffs.iter_mut().enumerate() {
            *a = 1.0 / (m as f64 + 1.0);
        }
        assert!(f.evaluate_gradient(3.5).unwrap().abs() < 1e-12);
        assert!(f.evaluate_gradient(-3.5).unwrap().abs() < 1e-12);
        let expected: f64 = f.coeffs.iter().sum();
        assert!((f.evaluate(-3.5).unwrap() - expected).abs() < 1e-12);
        let h = 1e-6;
        let fd = (f.evaluate(1.2 + h).unwrap() - f.evaluate(1.2 - h).unwrap()) / (2.0 * h);
        assert!((fd - f.evaluate_gradient(1.2).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn sliding_forcing_matches_quadrature() {
        let p = NormalizedParams {
            box_length: 40.0,
            boundary: Boundary::Sliding,
            ..NormalizedParams::desk().with_epsilon(2.5)
        };
        let width = p.forcing_width();
        let x_p: f64 = -2.3;
        let t = 0.41;
        let closed = project_forcing(x_p, t, &p).unwrap();
        let n = 4096;
        let h = p.box_length / (n - 1) as f64;
        let drive = -p.gamma0 * p.epsilon * (2.0 * p.epsilon * t).sin();
        for (m, &cf) in closed.iter().enumerate().take(40) {
            let k = PI * m as f64 / p.box_length;
            let mut acc = 0.0;
            for i in 0..n {
                let x = -p.half_length() + i as f64 * h;
                let g = (-((x - x_p) / width).powi(2)).exp() / (width * PI.sqrt());
                let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                acc += w * drive * g * (k * (x + p.half_length())).cos();
            }
            let norm = if m == 0 { 1.0 } else { 2.0 } / p.box_length;
            let quad = norm * acc * h;
            assert!((quad - cf).abs() < 1e-8, "mode {m} quad {quad} closed {cf}");
        }
    }

    proptest! {
        #[test]
        fn evaluation_is_linear(
            a in proptest::collection::vec(-1.0f64..1.0, 10),
            b in proptest::collection::vec(-1.0f64..1.0, 10),
            x in -4.9f64..4.9,
            s in -3.0f64..3.0,
        ) {
            let mut fa = WaveField::zeros(10.0, 1.0, 0.0, 10);
            fa.coeffs = a;
            let mut fb = fa.clone();
            fb.coeffs = b;
            let mut fc = fa.clone();
            fc.coeffs = fa.coeffs.iter().zip(&fb.coeffs).map(|(u, v)| u + s * v).collect();
            let (va, ga) = fa.value_and_slope(x);
            let (vb, gb) = fb.value_and_slope(x);
            let (vc, gc) = fc.value_and_slope(x);
            prop_assert!((vc - (va + s * vb)).abs() < 1e-12);
            prop_assert!((gc - (ga + s * gb)).abs() < 1e-11);
        }

        #[test]
        fn undamped_energy_conserved_per_step(
            a in proptest::collection::vec(-1.0f64..1.0, 6),
            eps in 0.0f64..4.0,
            dt in 1e-3f64..0.5,
        ) {
            let mut f = WaveField::zeros(8.0, eps, 0.0, 6);
            f.coeffs = a.clone();
            f.coeff_rates = a.iter().rev().cloned().collect();
            let e0 = f.energy();
            prop_assume!(e0 > 1e-6);
            let next = f.step(&[0.0; 6], &[0.0; 6], dt).unwrap();
            prop_assert!((next.energy() - e0).abs() / e0 < 1e-12);
        }
    }
}
