//! Simulation of a particle that forces, and is guided by, a real
//! fourth-order Schrödinger wave field in a finite box, plus the statistics
//! that turn long trajectories into position PDFs and energy levels.
//!
//! Everything downstream of [`params`] works in dimensionless units.

pub mod calibration;
pub mod dispersion;
pub mod error;
pub mod io;
pub mod params;
pub mod particle;
pub mod simulation;
pub mod statistics;
pub mod sweep;
pub mod wavefield;

pub use error::{Error, Result};
pub use params::{HydroParams, InertialParams, NormalizedParams, Profile, QuantumParams};
pub use particle::ParticleState;
pub use simulation::{run, run_with_snapshots, RunResult, TrajectorySample};
pub use statistics::{AnalysisConfig, EnergyLevels, ModeAnalysis, PositionHistogram};
pub use sweep::{execute, plan_sweep, SweepPlan, SweepResult};
pub use wavefield::WaveField;
