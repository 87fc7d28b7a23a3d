//! Physical parameter sets, the quantum/hydrodynamic conversion, and the
//! dimensionless parameter set consumed by the solver.
//!
//! Lengths are measured in units of `1/k_n`, times in units of `1/ω_n`, with
//! `(ω_n, k_n)` the natural scales of the base potential `V₀`. The normalized
//! potential `ε = V'/V₀` rescales these to `ω' = ε ω_n` and `k' = √ε k_n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Lower bound on `ε` for forced runs; the forcing width `π/√ε` and period
/// `π/ε` diverge as `ε → 0`.
pub const DEFAULT_EPSILON_MIN: f64 = 0.1;

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {value}")))
    }
}

/// Quantum side: reduced Planck constant, particle mass and base potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumParams {
    pub hbar: f64,
    pub mass: f64,
    pub v0: f64,
}

impl QuantumParams {
    pub fn new(hbar: f64, mass: f64, v0: f64) -> Result<Self> {
        let q = Self { hbar, mass, v0 };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("hbar", self.hbar)?;
        require_positive("mass", self.mass)?;
        require_positive("V0", self.v0)
    }
}

/// Hydrodynamic side: surface tension, density, gravity and depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroParams {
    pub sigma: f64,
    pub rho: f64,
    pub g: f64,
    pub depth: f64,
}

impl HydroParams {
    pub fn new(sigma: f64, rho: f64, g: f64, depth: f64) -> Result<Self> {
        let h = Self {
            sigma,
            rho,
            g,
            depth,
        };
        h.validate()?;
        Ok(h)
    }

    /// Unit density with the given kinematic surface tension `σ/ρ`.
    pub fn from_kinematic(sigma_over_rho: f64, g: f64, depth: f64) -> Result<Self> {
        Self::new(sigma_over_rho, 1.0, g, depth)
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sigma", self.sigma)?;
        require_positive("rho", self.rho)?;
        require_positive("g", self.g)?;
        require_positive("H", self.depth)
    }

    pub fn sigma_over_rho(&self) -> f64 {
        self.sigma / self.rho
    }
}

/// Natural `(ω_n, k_n)` of the quantum system: `(2V₀/ħ, 2√(mV₀)/ħ)`.
pub fn normalize_quantum(q: &QuantumParams) -> Result<(f64, f64)> {
    q.validate()?;
    Ok((2.0 * q.v0 / q.hbar, 2.0 * (q.mass * q.v0).sqrt() / q.hbar))
}

/// Natural `(ω_n, k_n)` of shallow gravity-capillary waves:
/// `(√(g²Hρ/σ), √(gρ/σ))`.
pub fn normalize_hydro(h: &HydroParams) -> Result<(f64, f64)> {
    h.validate()?;
    let s = h.sigma_over_rho();
    Ok(((h.g * h.g * h.depth / s).sqrt(), (h.g / s).sqrt()))
}

/// Residuals `(σH/ρ − ħ²/4m², gH − V₀/m)`; both zero when the two systems
/// share a wave equation up to the constant `V₀²/ħ²` term.
pub fn conversion_check(q: &QuantumParams, h: &HydroParams) -> (f64, f64) {
    let capillary = h.sigma_over_rho() * h.depth - q.hbar * q.hbar / (4.0 * q.mass * q.mass);
    let gravity = h.g * h.depth - q.v0 / q.mass;
    (capillary, gravity)
}

/// Natural scales of the rescaled potential `V' = εV₀`, relative to the base
/// scales: `(ω'/ω_n, k'/k_n) = (ε, √ε)`.
pub fn rescaled_scales(epsilon: f64) -> (f64, f64) {
    (epsilon, epsilon.sqrt())
}

/// Run-length profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `t_final = 3000`, `t_transient = 300`.
    Desk,
    /// `t_final = 30000`, `t_transient = 3000`.
    Paper,
}

impl Profile {
    pub fn durations(self) -> (f64, f64) {
        match self {
            Profile::Desk => (3_000.0, 300.0),
            Profile::Paper => (30_000.0, 3_000.0),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(invalid("profile", format!("expected desk|paper, got {other}"))),
        }
    }
}

/// Wall condition at `x = ±L/2`; both keep the fourth-order operator
/// diagonal in a trigonometric basis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// `ξ = ξ_xx = 0`: sine modes `m = 1, 2, …`.
    #[default]
    SimplySupported,
    /// `ξ_x = ξ_xxx = 0`: cosine modes `m = 0, 1, …`; the guiding slope
    /// vanishes at the walls.
    Sliding,
}

impl Boundary {
    pub fn first_mode(self) -> usize {
        match self {
            Boundary::SimplySupported => 1,
            Boundary::Sliding => 0,
        }
    }

    /// `(sin mθ, cos mθ)` of the first mode given `(sin θ, cos θ)`.
    pub(crate) fn start_phase(self, s1: f64, c1: f64) -> (f64, f64) {
        match self {
            Boundary::SimplySupported => (s1, c1),
            Boundary::Sliding => (0.0, 1.0),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simply_supported" => Ok(Boundary::SimplySupported),
            "sliding" => Ok(Boundary::Sliding),
            other => Err(invalid(
                "boundary",
                format!("expected simply_supported|sliding, got {other}"),
            )),
        }
    }
}

/// Inertial particle law `m ẍ = −D ẋ − f ∂ξ/∂x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialParams {
    pub mass: f64,
    pub drag: f64,
    pub coupling: f64,
}

/// The complete dimensionless parameter set of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedParams {
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub box_length: f64,
    pub damping_b: f64,
    pub gamma0: f64,
    pub alpha: f64,
    /// `None` picks the smallest `m` with `πm/L ≥ max(4√ε, 12)`.
    pub n_modes: Option<usize>,
    /// `None` picks `min(π/ε, 2π/ω_max)/200` over the forced band.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub t_transient: f64,
    pub particle_x0: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// `None` selects the massless guiding law.
    pub inertial: Option<InertialParams>,
}

impl Default for NormalizedParams {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            epsilon_min: DEFAULT_EPSILON_MIN,
            box_length: 20.0,
            damping_b: 0.02,
            gamma0: 1.0,
            alpha: 2.0,
            n_modes: None,
            dt: None,
            t_final: 30_000.0,
            t_transient: 3_000.0,
            particle_x0: 2.6,
            boundary: Boundary::default(),
            inertial: None,
        }
    }
}

impl NormalizedParams {
    /// Default parameters with the given profile's durations.
    pub fn with_profile(profile: Profile) -> Self {
        let (t_final, t_transient) = profile.durations();
        Self {
            t_final,
            t_transient,
            ..Self::default()
        }
    }

    pub fn desk() -> Self {
        Self::with_profile(Profile::Desk)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..self.clone()
        }
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.box_length
    }

    /// Width `ã = π/√ε` of the forcing Gaussian.
    pub fn forcing_width(&self) -> f64 {
        std::f64::consts::PI / self.epsilon.sqrt()
    }

    /// Amplitude `γ₀ ω'²/k'² = γ₀ ε` of the forcing.
    pub fn forcing_amplitude(&self) -> f64 {
        self.gamma0 * self.epsilon
    }

    pub fn mode_count(&self) -> usize {
        self.n_modes.unwrap_or_else(|| {
            let k_needed = (4.0 * self.epsilon.sqrt()).max(12.0);
            (k_needed * self.box_length / std::f64::consts::PI).ceil() as usize
        })
    }

    pub fn time_step(&self) -> f64 {
        self.dt.unwrap_or_else(|| {
            let eps = self.epsilon.max(self.epsilon_min);
            let k_band = 4.0 * eps.sqrt();
            let omega_max = k_band * k_band + 0.5 * eps;
            let period = std::f64::consts::PI / eps;
            period.min(2.0 * std::f64::consts::PI / omega_max) / 200.0
        })
    }

    /// Record every `max(1, round(0.1/dt))` steps.
    pub fn sample_stride(&self) -> usize {
        ((0.1 / self.time_step()).round() as usize).max(1)
    }

    /// Checks every invariant; `forced` additionally enforces `ε ≥ epsilon_min`.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(invalid("epsilon", "must be finite and >= 0"));
        }
        require_positive("epsilon_min", self.epsilon_min)?;
        require_positive("box_length", self.box_length)?;
        if !(self.damping_b.is_finite() && self.damping_b >= 0.0) {
            return Err(invalid("damping_b", "must be finite and >= 0"));
        }
        if !(self.gamma0.is_finite() && self.gamma0 >= 0.0) {
            return Err(invalid("gamma0", "must be finite and >= 0"));
        }
        if !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be finite"));
        }
        if self.mode_count() == 0 {
            return Err(invalid("n_modes", "must be >= 1"));
        }
        require_positive("t_final", self.t_final)?;
        let dt = self.time_step();
        if !(dt.is_finite() && dt > 0.0 && dt < self.t_final) {
            return Err(invalid("dt", format!("need 0 < dt < t_final, got {dt}")));
        }
        if !(self.t_transient >= 0.0 && self.t_transient < self.t_final) {
            return Err(invalid("t_transient", "need 0 <= t_transient < t_final"));
        }
        if !(self.particle_x0.abs() < self.half_length()) {
            return Err(invalid("particle_x0", "must lie strictly inside the box"));
        }
        if self.gamma0 > 0.0 && self.epsilon < self.epsilon_min {
            return Err(invalid(
                "epsilon",
                format!(
                    "forced runs need epsilon >= {} (got {})",
                    self.epsilon_min, self.epsilon
                ),
            ));
        }
        if let Some(inertial) = &self.inertial {
            require_positive("inertial_mass", inertial.mass)?;
            if !(inertial.drag.is_finite() && inertial.drag >= 0.0) {
                return Err(invalid("inertial_drag", "must be finite and >= 0"));
            }
            if !inertial.coupling.is_finite() {
                return Err(invalid("inertial_coupling", "must be finite"));
            }
        }
        Ok(())
    }

    /// Sets one field from its textual `key = value` form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = |name: &'static str| -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| invalid(name, format!("not a number: {value:?}")))
        };
        let auto = value.eq_ignore_ascii_case("auto");
        match key {
            "epsilon" => self.epsilon = num("epsilon")?,
            "epsilon_min" => self.epsilon_min = num("epsilon_min")?,
            "box_length" => self.box_length = num("box_length")?,
            "damping_b" => self.damping_b = num("damping_b")?,
            "gamma0" => self.gamma0 = num("gamma0")?,
            "alpha" => self.alpha = num("alpha")?,
            "n_modes" => {
                self.n_modes = if auto {
                    None
                } else {
                    Some(
                        value
                            .parse()
                            .map_err(|_| invalid("n_modes", format!("not a count: {value:?}")))?,
                    )
                }
            }
            "dt" => self.dt = if auto { None } else { Some(num("dt")?) },
            "t_final" => self.t_final = num("t_final")?,
            "t_transient" => self.t_transient = num("t_transient")?,
            "particle_x0" => self.particle_x0 = num("particle_x0")?,
            "boundary" => self.boundary = value.parse()?,
            "profile" => {
                let (t_final, t_transient) = value.parse::<Profile>()?.durations();
                self.t_final = t_final;
                self.t_transient = t_transient;
            }
            "inertial" => {
                let on = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(invalid("inertial", format!("not a bool: {value:?}"))),
                };
                self.inertial = match (on, self.inertial) {
                    (true, Some(i)) => Some(i),
                    (true, None) => Some(InertialParams {
                        mass: 1e-3,
                        drag: 1.0,
                        coupling: self.alpha,
                    }),
                    (false, _) => None,
                };
            }
            "inertial_mass" | "inertial_drag" | "inertial_coupling" => {
                let name: &'static str = match key {
                    "inertial_mass" => "inertial_mass",
                    "inertial_drag" => "inertial_drag",
                    _ => "inertial_coupling",
                };
                let v = num(name)?;
                let i = self.inertial.get_or_insert(InertialParams {
                    mass: 1e-3,
                    drag: 1.0,
                    coupling: self.alpha,
                });
                match key {
                    "inertial_mass" => i.mass = v,
                    "inertial_drag" => i.drag = v,
                    _ => i.coupling = v,
                }
            }
            _ => return Err(invalid("config", format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Renders the parameters as a config text that [`apply_config`]
    /// reads back to an equal value.
    ///
    /// [`apply_config`]: Self::apply_config
    pub fn to_config_text(&self) -> String {
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".to_string());
        let boundary = match self.boundary {
            Boundary::SimplySupported => "simply_supported",
            Boundary::Sliding => "sliding",
        };
        let mut lines = vec![
            format!("epsilon = {}", self.epsilon),
            format!("epsilon_min = {}", self.epsilon_min),
            format!("box_length = {}", self.box_length),
            format!("damping_b = {}", self.damping_b),
            format!("gamma0 = {}", self.gamma0),
            format!("alpha = {}", self.alpha),
            format!("n_modes = {}", auto(self.n_modes.map(|n| n.to_string()))),
            format!("dt = {}", auto(self.dt.map(|d| d.to_string()))),
            format!("t_final = {}", self.t_final),
            format!("t_transient = {}", self.t_transient),
            format!("particle_x0 = {}", self.particle_x0),
            format!("boundary = {boundary}"),
        ];
        match self.inertial {
            Some(i) => {
                lines.push(format!("inertial_mass = {}", i.mass));
                lines.push(format!("inertial_drag = {}", i.drag));
                lines.push(format!("inertial_coupling = {}", i.coupling));
            }
            None => lines.push("inertial = false".to_string()),
        }
        lines.join("\n") + "\n"
    }

    /// Applies a flat `key = value` configuration (`#` starts a comment).
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (key, value, line) in parse_config(text)? {
            self.set(&key, &value).map_err(|e| Error::Config {
                line,
                reason: e.to_string(),
            })?;
        }
        Ok(())
    }
}

/// Splits a flat `key = value` file into `(key, value, line_number)` triples.
pub fn parse_config(text: &str) -> Result<Vec<(String, String, usize)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
            line: idx + 1,
            reason: format!("expected `key = value`, got {line:?}"),
        })?;
        out.push((key.trim().to_string(), value.trim().to_string(), idx + 1));
    }
    Ok(out)
}
