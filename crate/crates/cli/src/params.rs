//! Parameter flags shared by the run-producing subcommands.
//!
//! Resolution order: profile defaults, then the config file, then `--set`
//! pairs, then the dedicated flags.

use std::fs;
use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use pilotbox_core::{NormalizedParams, Profile};

#[derive(Args, Debug, Default)]
pub struct ParamArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run-length profile.
    #[arg(long, value_parser = ["desk", "paper"])]
    pub profile: Option<String>,
    /// Extra `key=value` overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub damping_b: Option<f64>,
    #[arg(long)]
    pub box_length: Option<f64>,
    #[arg(long)]
    pub n_modes: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    #[arg(long)]
    pub t_transient: Option<f64>,
    #[arg(long)]
    pub x0: Option<f64>,
    #[arg(long, value_parser = ["simply_supported", "sliding"])]
    pub boundary: Option<String>,
}

impl ParamArgs {
    pub fn resolve(&self) -> Result<NormalizedParams> {
        let profile: Profile = match &self.profile {
            Some(name) => name.parse()?,
            None => Profile::Desk,
        };
        let mut p = NormalizedParams::with_profile(profile);
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| pilotbox_core::Error::Config {
                line: 0,
                reason: format!("cannot read {}: {e}", path.display()),
            })?;
            p.apply_config(&text)?;
            // An explicit --profile still wins over the file.
            if let Some(name) = &self.profile {
                p.set("profile", name)?;
            }
        }
        for pair in &self.set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| pilotbox_core::Error::Config {
                    line: 0,
                    reason: format!("--set expects KEY=VALUE, got {pair:?}"),
                })?;
            p.set(key.trim(), value.trim())?;
        }
        let numbers = [
            ("epsilon", self.epsilon),
            ("gamma0", self.gamma0),
            ("alpha", self.alpha),
            ("damping_b", self.damping_b),
            ("box_length", self.box_length),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("t_transient", self.t_transient),
            ("particle_x0", self.x0),
        ];
        for (key, value) in numbers {
            if let Some(v) = value {
                p.set(key, &v.to_string())?;
            }
        }
        if let Some(n) = self.n_modes {
            p.set("n_modes", &n.to_string())?;
        }
        if let Some(b) = &self.boundary {
            p.set("boundary", b)?;
        }
        p.validate()?;
        Ok(p)
    }
}
