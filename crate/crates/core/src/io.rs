//! On-disk artifacts: CSV tables, JSON manifests and run directories.
//!
//! Floats are written with 17 significant digits so every value round-trips
//! exactly and repeated runs produce byte-identical tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::NormalizedParams;
use crate::simulation::{finalize_statistics, FieldSnapshot, RunResult, TrajectorySample};
use crate::statistics::{EnergyLevels, ModeAnalysis, PhaseSpace, PositionHistogram};

pub const MANIFEST: &str = "manifest.json";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const HISTOGRAM: &str = "histogram.csv";

/// Fixed 17-significant-digit rendering.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Writes a header plus rows of pre-formatted fields.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| malformed(path, e.to_string()))?;
    w.write_record(header)
        .map_err(|e| malformed(path, e.to_string()))?;
    for row in rows {
        w.write_record(&row)
            .map_err(|e| malformed(path, e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV with a header into rows of strings.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| malformed(path, e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| malformed(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| malformed(path, e.to_string()))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn parse_f64(path: &Path, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| malformed(path, format!("not a number: {s:?}")))
}

/// SHA-256 of the canonical JSON encoding of `value`.
pub fn content_hash<T: Serialize>(value: &T) -> Result<String> {
    let bytes = serde_json::to_vec(value)?;
    let mut h = Sha256::new();
    h.update(format!("params {}\0", bytes.len()).as_bytes());
    h.update(&bytes);
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Escaped,
    Failed,
}

impl RunStatus {
    pub fn of(run: &RunResult) -> Self {
        if run.failure.is_some() {
            RunStatus::Failed
        } else if run.escaped {
            RunStatus::Escaped
        } else {
            RunStatus::Complete
        }
    }
}

/// Self-contained description of an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub parameters: serde_json::Value,
    pub input_hash: String,
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
    pub reason: Option<String>,
    #[serde(default)]
    pub summary: serde_json::Value,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, parameters: &T) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            parameters: serde_json::to_value(parameters)?,
            input_hash: content_hash(parameters)?,
            wall_clock_seconds: 0.0,
            status: RunStatus::Complete,
            reason: None,
            summary: serde_json::Value::Null,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(MANIFEST), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| malformed(path, e.to_string()))
}

/// Builds a directory under a temporary sibling name, then renames it into
/// place, replacing any previous content.
pub fn write_dir_atomically(dir: &Path, fill: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = dir.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(parent)?;
    let name = dir
        .file_name()
        .ok_or_else(|| malformed(dir, "output path has no final component"))?
        .to_string_lossy();
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    if let Err(e) = fill(&tmp) {
        let _ = fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if dir.exists() {
        fs::remove_dir_all(dir)?;
    }
    fs::rename(&tmp, dir)?;
    Ok(())
}

/// Removes leftovers of interrupted atomic writes inside `dir`.
pub fn clean_temporaries(dir: &Path) -> Result<()> {
    if !dir.exists() {
        return Ok(());
    }
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') && name.contains(".tmp-") {
            fs::remove_dir_all(entry.path())?;
        }
    }
    Ok(())
}

pub fn write_trajectory(path: &Path, trajectory: &[TrajectorySample]) -> Result<()> {
    write_csv(
        path,
        &["t", "x_p", "v_p"],
        trajectory
            .iter()
            .map(|s| vec![fmt_f64(s.t), fmt_f64(s.x_p), fmt_f64(s.v_p)]),
    )
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectorySample>> {
    let (_, rows) = read_csv(path)?;
    rows.iter()
        .map(|r| {
            if r.len() < 3 {
                return Err(malformed(path, "expected 3 columns"));
            }
            Ok(TrajectorySample {
                t: parse_f64(path, &r[0])?,
                x_p: parse_f64(path, &r[1])?,
                v_p: parse_f64(path, &r[2])?,
            })
        })
        .collect()
}

pub fn write_histogram(path: &Path, h: &PositionHistogram) -> Result<()> {
    let rel = h.relative_to_max();
    write_csv(
        path,
        &["x_lo", "x_hi", "count", "density", "density_over_max"],
        (0..h.n_bins()).map(|i| {
            vec![
                fmt_f64(h.bin_edges[i]),
                fmt_f64(h.bin_edges[i + 1]),
                h.counts[i].to_string(),
                fmt_f64(h.normalized_density[i]),
                fmt_f64(rel[i]),
            ]
        }),
    )
}

pub fn write_snapshot(dir: &Path, index: usize, snap: &FieldSnapshot) -> Result<()> {
    write_csv(
        &dir.join(format!("snapshot_{index:04}.csv")),
        &["x", "xi"],
        snap.samples
            .iter()
            .map(|(x, v)| vec![fmt_f64(*x), fmt_f64(*v)]),
    )?;
    write_json(&dir.join(format!("snapshot_{index:04}.json")), snap)
}

/// Per-run facts stored in the manifest summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub epsilon: f64,
    pub escaped: bool,
    pub escape_time: Option<f64>,
    pub mean_kinetic: Option<f64>,
    pub n_bins: usize,
    pub samples: usize,
    pub snapshots: usize,
}

/// Writes trajectory, histogram and snapshots, then the manifest, into a
/// fresh directory that replaces `dir` atomically.
pub fn save_run(dir: &Path, run: &RunResult, wall_clock_seconds: f64) -> Result<()> {
    write_dir_atomically(dir, |tmp| {
        write_trajectory(&tmp.join(TRAJECTORY), &run.trajectory)?;
        write_histogram(&tmp.join(HISTOGRAM), &run.histogram)?;
        for (i, s) in run.field_snapshots.iter().enumerate() {
            write_snapshot(tmp, i, s)?;
        }
        let mut m = Manifest::new("simulate", &run.params_echo)?;
        m.wall_clock_seconds = wall_clock_seconds;
        m.status = RunStatus::of(run);
        m.reason = run.failure.clone().or_else(|| {
            run.escape_time
                .map(|t| format!("particle left the box at t = {t}"))
        });
        m.summary = serde_json::to_value(RunSummary {
            epsilon: run.epsilon,
            escaped: run.escaped,
            escape_time: run.escape_time,
            mean_kinetic: run.mean_kinetic,
            n_bins: run.histogram.n_bins(),
            samples: run.trajectory.len(),
            snapshots: run.field_snapshots.len(),
        })?;
        m.write(tmp)
    })
}

/// Reconstructs a [`RunResult`] from its directory.
pub fn load_run(dir: &Path) -> Result<RunResult> {
    let manifest = Manifest::read(dir)?;
    let params: NormalizedParams = serde_json::from_value(manifest.parameters.clone())?;
    let summary: RunSummary = serde_json::from_value(manifest.summary.clone())?;
    let trajectory = read_trajectory(&dir.join(TRAJECTORY))?;
    if trajectory.len() != summary.samples {
        return Err(malformed(dir, "trajectory length disagrees with manifest"));
    }
    let mut field_snapshots = Vec::with_capacity(summary.snapshots);
    for i in 0..summary.snapshots {
        field_snapshots.push(read_json(&dir.join(format!("snapshot_{i:04}.json")))?);
    }
    let failure = match manifest.status {
        RunStatus::Failed => Some(manifest.reason.clone().unwrap_or_default()),
        _ => None,
    };
    let mut run = RunResult {
        epsilon: summary.epsilon,
        trajectory,
        field_snapshots,
        histogram: PositionHistogram::empty(params.box_length, summary.n_bins),
        mean_kinetic: None,
        escaped: summary.escaped,
        escape_time: summary.escape_time,
        failure,
        params_echo: params,
    };
    finalize_statistics(&mut run, summary.n_bins);
    Ok(run)
}

pub fn write_peaks(path: &Path, m: &ModeAnalysis) -> Result<()> {
    let n = m.peak_positions.len();
    write_csv(
        path,
        &["position", "height", "prominence", "kind"],
        (0..n).map(|i| {
            let kind = if n >= 2 && (i == 0 || i == n - 1) {
                "boundary"
            } else {
                "interior"
            };
            vec![
                fmt_f64(m.peak_positions[i]),
                fmt_f64(m.peak_heights[i]),
                fmt_f64(m.peak_prominences[i]),
                kind.to_string(),
            ]
        }),
    )
}

pub fn write_phase_space(path: &Path, ps: &PhaseSpace) -> Result<()> {
    write_csv(
        path,
        &["t", "x_p", "v_p"],
        ps.points
            .iter()
            .map(|(t, x, v)| vec![fmt_f64(*t), fmt_f64(*x), fmt_f64(*v)]),
    )
}

pub fn write_energy_levels(path: &Path, levels: &EnergyLevels) -> Result<()> {
    write_csv(
        path,
        &[
            "n",
            "epsilon_n",
            "epsilon_lo",
            "epsilon_hi",
            "mean_kinetic",
            "effective_length",
            "eigen_energy_reference",
        ],
        levels.levels.iter().map(|l| {
            let reference = levels
                .effective_length
                .map(|len| crate::statistics::eigen_energy_reference(l.mode_number, len));
            vec![
                l.mode_number.to_string(),
                fmt_f64(l.epsilon),
                fmt_f64(l.epsilon_range.0),
                fmt_f64(l.epsilon_range.1),
                fmt_f64(l.kinetic_energy),
                fmt_opt(l.effective_length),
                fmt_opt(reference),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn atomic_write_replaces_directory() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("out");
        write_dir_atomically(&out, |d| Ok(fs::write(d.join("a.txt"), "1")?)).unwrap();
        write_dir_atomically(&out, |d| Ok(fs::write(d.join("b.txt"), "2")?)).unwrap();
        assert!(!out.join("a.txt").exists());
        assert_eq!(fs::read_to_string(out.join("b.txt")).unwrap(), "2");
        let failed = write_dir_atomically(&out, |_| Err(malformed(Path::new("x"), "boom")));
        assert!(failed.is_err());
        assert!(out.join("b.txt").exists());
        let leftovers: Vec<_> = fs::read_dir(root.path()).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
    }

    #[test]
    fn hash_depends_on_content() {
        let a = NormalizedParams::desk();
        let b = a.with_epsilon(2.0);
        assert_eq!(content_hash(&a).unwrap(), content_hash(&a.clone()).unwrap());
        assert_ne!(content_hash(&a).unwrap(), content_hash(&b).unwrap());
    }

    proptest! {
        #[test]
        fn float_text_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = fmt_f64(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }
}
