//! Trajectory observables: position PDFs, peak/mode detection, phase space,
//! mean kinetic energy and energy-level extraction across a sweep.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::simulation::{RunResult, TrajectorySample};

pub const DEFAULT_BINS: usize = 200;

/// Post-processing knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub n_bins: usize,
    pub min_prominence_fraction: f64,
    pub min_separation: f64,
    /// Moving-median window over sweep points.
    pub smoothing_window: usize,
    /// Relative band above a local minimum of smoothed `E_k` counted as the
    /// same plateau.
    pub plateau_tolerance: f64,
    /// Recurrence radius as a fraction of the phase-space extent.
    pub recurrence_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            n_bins: DEFAULT_BINS,
            min_prominence_fraction: 0.2,
            min_separation: 0.5,
            smoothing_window: 5,
            plateau_tolerance: 0.05,
            recurrence_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub normalized_density: Vec<f64>,
}

impl PositionHistogram {
    pub fn empty(box_length: f64, n_bins: usize) -> Self {
        let n = n_bins.max(1);
        let half = 0.5 * box_length;
        Self {
            bin_edges: (0..=n)
                .map(|i| -half + box_length * i as f64 / n as f64)
                .collect(),
            counts: vec![0; n],
            normalized_density: vec![0.0; n],
        }
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_edges[1] - self.bin_edges[0]
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// `∫ density dx` (1 for a non-empty histogram).
    pub fn integral(&self) -> f64 {
        self.normalized_density.iter().sum::<f64>() * self.bin_width()
    }

    /// Density divided by its maximum (`PDF/PDF_max`); all zeros when empty.
    pub fn relative_to_max(&self) -> Vec<f64> {
        let max = self.normalized_density.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            self.normalized_density.iter().map(|d| d / max).collect()
        } else {
            vec![0.0; self.n_bins()]
        }
    }

    fn recompute_density(&mut self) {
        let total = self.total();
        let w = self.bin_width();
        self.normalized_density = if total == 0 {
            vec![0.0; self.n_bins()]
        } else {
            self.counts
                .iter()
                .map(|&c| c as f64 / (total as f64 * w))
                .collect()
        };
    }

    pub fn from_counts(box_length: f64, counts: Vec<u64>) -> Self {
        let mut h = Self::empty(box_length, counts.len());
        h.counts = counts;
        h.recompute_density();
        h
    }
}

/// Uniform-bin position density over the box from samples with
/// `t ≥ t_transient`. Samples outside the box are ignored.
pub fn build_histogram(
    trajectory: &[TrajectorySample],
    t_transient: f64,
    n_bins: usize,
    box_length: f64,
) -> PositionHistogram {
    let mut h = PositionHistogram::empty(box_length, n_bins);
    let n = h.n_bins();
    let half = 0.5 * box_length;
    for s in trajectory.iter().filter(|s| s.t >= t_transient) {
        if !(s.x_p.abs() <= half) {
            continue;
        }
        let idx = (((s.x_p + half) / box_length) * n as f64).floor() as usize;
        h.counts[idx.min(n - 1)] += 1;
    }
    h.recompute_density();
    h
}

/// Peaks of a position PDF, classified into boundary and interior peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeAnalysis {
    pub peak_positions: Vec<f64>,
    pub peak_heights: Vec<f64>,
    pub peak_prominences: Vec<f64>,
    pub interior_peak_count: usize,
    /// Outermost two peaks, where the particle reverses.
    pub effective_boundaries: Option<(f64, f64)>,
    pub effective_length: Option<f64>,
    /// Fewer than two peaks: boundaries undefined.
    pub flagged: bool,
}

/// Prominence of each index in `peaks` with zero padding beyond both ends.
fn prominences(data: &[f64], peaks: &[usize]) -> Vec<f64> {
    peaks
        .iter()
        .map(|&p| {
            let h = data[p];
            let mut left_min = h;
            let mut i = p;
            let mut bounded = false;
            while i > 0 {
                i -= 1;
                if data[i] > h {
                    bounded = true;
                    break;
                }
                left_min = left_min.min(data[i]);
            }
            if !bounded {
                left_min = left_min.min(0.0);
            }
            let mut right_min = h;
            bounded = false;
            for &v in &data[p + 1..] {
                if v > h {
                    bounded = true;
                    break;
                }
                right_min = right_min.min(v);
            }
            if !bounded {
                right_min = right_min.min(0.0);
            }
            h - left_min.max(right_min)
        })
        .collect()
}

/// Local maxima (flat tops resolved to their middle bin), with the region
/// beyond both ends treated as zero.
fn local_maxima(data: &[f64]) -> Vec<usize> {
    let n = data.len();
    let at = |i: isize| -> f64 {
        if i < 0 || i >= n as isize {
            0.0
        } else {
            data[i as usize]
        }
    };
    let mut peaks = Vec::new();
    let mut i = 0isize;
    while i < n as isize {
        let v = at(i);
        if v > at(i - 1) {
            let mut j = i;
            while j + 1 < n as isize && at(j + 1) == v {
                j += 1;
            }
            if v > at(j + 1) {
                peaks.push(((i + j) / 2) as usize);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Local maxima with prominence `≥ fraction · max(density)` and pairwise
/// separation `≥ min_separation` (taller peaks win).
pub fn detect_peaks(
    h: &PositionHistogram,
    min_prominence_fraction: f64,
    min_separation: f64,
) -> ModeAnalysis {
    let data = &h.normalized_density;
    let max = data.iter().cloned().fold(0.0, f64::max);
    let centers = h.centers();
    let mut kept: Vec<(usize, f64)> = Vec::new();
    if max > 0.0 {
        let candidates = local_maxima(data);
        let prom = prominences(data, &candidates);
        let mut strong: Vec<(usize, f64)> = candidates
            .into_iter()
            .zip(prom)
            .filter(|(_, p)| *p >= min_prominence_fraction * max)
            .collect();
        strong.sort_by(|a, b| data[b.0].total_cmp(&data[a.0]).then(a.0.cmp(&b.0)));
        for (idx, p) in strong {
            if kept
                .iter()
                .all(|(k, _)| (centers[*k] - centers[idx]).abs() >= min_separation)
            {
                kept.push((idx, p));
            }
        }
        kept.sort_by_key(|(idx, _)| *idx);
    }
    let peak_positions: Vec<f64> = kept.iter().map(|(i, _)| centers[*i]).collect();
    let peak_heights = kept.iter().map(|(i, _)| data[*i]).collect();
    let peak_prominences = kept.iter().map(|(_, p)| *p).collect();
    let (effective_boundaries, effective_length, interior, flagged) = if peak_positions.len() >= 2
    {
        let lo = peak_positions[0];
        let hi = *peak_positions.last().unwrap();
        (Some((lo, hi)), Some(hi - lo), peak_positions.len() - 2, false)
    } else {
        (None, None, 0, true)
    };
    ModeAnalysis {
        peak_positions,
        peak_heights,
        peak_prominences,
        interior_peak_count: interior,
        effective_boundaries,
        effective_length,
        flagged,
    }
}

/// Time average of `v_p²/2` over samples with `t ≥ t_transient`.
pub fn mean_kinetic_energy(trajectory: &[TrajectorySample], t_transient: f64) -> Option<f64> {
    let (sum, n) = trajectory
        .iter()
        .filter(|s| s.t >= t_transient)
        .fold((0.0, 0usize), |(acc, n), s| (acc + 0.5 * s.v_p * s.v_p, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Time average of `v_p` over samples with `t ≥ t_transient`.
pub fn mean_velocity(trajectory: &[TrajectorySample], t_transient: f64) -> Option<f64> {
    let (sum, n) = trajectory
        .iter()
        .filter(|s| s.t >= t_transient)
        .fold((0.0, 0usize), |(acc, n), s| (acc + s.v_p, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpace {
    /// `(t, x_p, v_p)` after the transient.
    pub points: Vec<(f64, f64, f64)>,
    /// Recurrence period, when the orbit returns near its start.
    pub period: Option<f64>,
    /// Side-to-side round trips (left half ↔ right half and back) per period.
    pub round_trips_per_period: Option<usize>,
}

impl PhaseSpace {
    /// One wall-to-wall round trip per period.
    pub fn is_coherent(&self) -> bool {
        self.round_trips_per_period == Some(1)
    }
}

/// Post-transient phase portrait with a recurrence-based period estimate.
///
/// The orbit must leave a ball of radius `3·tol` around its first point and
/// later come back within `tol` (coordinates scaled by their ranges); the
/// closest approach is refined by a parabola through three samples.
pub fn phase_space(
    trajectory: &[TrajectorySample],
    t_transient: f64,
    recurrence_tolerance: f64,
) -> PhaseSpace {
    let points: Vec<(f64, f64, f64)> = trajectory
        .iter()
        .filter(|s| s.t >= t_transient)
        .map(|s| (s.t, s.x_p, s.v_p))
        .collect();
    let period = recurrence_period(&points, recurrence_tolerance);
    let round_trips_per_period = period.and_then(|p| round_trips(&points, p));
    PhaseSpace {
        points,
        period,
        round_trips_per_period,
    }
}

fn recurrence_period(points: &[(f64, f64, f64)], tol: f64) -> Option<f64> {
    if points.len() < 4 {
        return None;
    }
    let range = |f: fn(&(f64, f64, f64)) -> f64| {
        let (lo, hi) = points
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        hi - lo
    };
    let sx = range(|p| p.1);
    let sv = range(|p| p.2);
    if !(sx > 0.0 || sv > 0.0) {
        return None;
    }
    let sx = if sx > 0.0 { sx } else { 1.0 };
    let sv = if sv > 0.0 { sv } else { 1.0 };
    let (t0, x0, v0) = points[0];
    let dist = |p: &(f64, f64, f64)| (((p.1 - x0) / sx).powi(2) + ((p.2 - v0) / sv).powi(2)).sqrt();
    let d: Vec<f64> = points.iter().map(dist).collect();
    let left = d.iter().position(|&v| v > 3.0 * tol)?;
    let mut i = left;
    while i + 1 < d.len() {
        if d[i] < tol && d[i] <= d[i - 1] && d[i] <= d[i + 1] {
            // Minimize the squared distance, which is smooth at the return.
            let (a, b, c) = (d[i - 1].powi(2), d[i].powi(2), d[i + 1].powi(2));
            let denom = a - 2.0 * b + c;
            let shift = if denom > 0.0 { 0.5 * (a - c) / denom } else { 0.0 };
            let step = points[i + 1].0 - points[i].0;
            return Some(points[i].0 + shift.clamp(-1.0, 1.0) * step - t0);
        }
        i += 1;
    }
    None
}

/// Counts left↔right side switches over one period; hysteresis band of a
/// quarter of the occupied half-width suppresses in-place oscillations.
fn round_trips(points: &[(f64, f64, f64)], period: f64) -> Option<usize> {
    let t0 = points.first()?.0;
    let window: Vec<f64> = points
        .iter()
        .take_while(|p| p.0 - t0 <= period)
        .map(|p| p.1)
        .collect();
    let extent = window.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if extent == 0.0 {
        return Some(0);
    }
    let band = 0.25 * extent;
    let mut side = 0i8;
    let mut switches = 0usize;
    for x in window {
        let s = if x > band {
            1
        } else if x < -band {
            -1
        } else {
            0
        };
        if s != 0 {
            if side != 0 && s != side {
                switches += 1;
            }
            side = s;
        }
    }
    Some(switches.div_ceil(2))
}

/// Particle-in-a-box eigen-energy `2π²n²/L²` in units of `V₀`.
pub fn eigen_energy_reference(n: usize, box_length: f64) -> f64 {
    2.0 * PI * PI * (n * n) as f64 / (box_length * box_length)
}

/// Everything the level extraction needs from one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAnalysis {
    pub epsilon: f64,
    pub stable: bool,
    pub mean_kinetic: Option<f64>,
    pub modes: ModeAnalysis,
    pub period: Option<f64>,
    pub round_trips_per_period: Option<usize>,
    /// Not a single-round-trip periodic orbit.
    pub transitional: bool,
    pub mean_velocity: Option<f64>,
}

pub fn analyze_run(run: &RunResult, cfg: &AnalysisConfig) -> RunAnalysis {
    let p = &run.params_echo;
    let end = if run.escaped {
        run.trajectory.len().saturating_sub(1)
    } else {
        run.trajectory.len()
    };
    let inside = &run.trajectory[..end];
    let hist = if run.histogram.n_bins() == cfg.n_bins {
        run.histogram.clone()
    } else {
        build_histogram(inside, p.t_transient, cfg.n_bins, p.box_length)
    };
    let modes = detect_peaks(&hist, cfg.min_prominence_fraction, cfg.min_separation);
    let phase = phase_space(inside, p.t_transient, cfg.recurrence_tolerance);
    RunAnalysis {
        epsilon: run.epsilon,
        stable: run.is_stable(),
        mean_kinetic: mean_kinetic_energy(inside, p.t_transient),
        transitional: !phase.is_coherent(),
        period: phase.period,
        round_trips_per_period: phase.round_trips_per_period,
        modes,
        mean_velocity: mean_velocity(inside, p.t_transient),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevel {
    /// Potential at the minimum of the plateau.
    pub epsilon: f64,
    /// `(ε_first, ε_last)` of the plateau.
    pub epsilon_range: (f64, f64),
    pub mode_number: usize,
    /// Median `E_k` over the plateau.
    pub kinetic_energy: f64,
    pub effective_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyLevels {
    pub levels: Vec<EnergyLevel>,
    pub epsilon_n: Vec<f64>,
    pub mode_numbers: Vec<usize>,
    /// `C` of the least-squares fit `E_k = C n²`.
    pub fit_coefficient: Option<f64>,
    /// Coefficient of determination of that fit.
    pub fit_quality: Option<f64>,
    /// Median effective box length over plateau runs.
    pub effective_length: Option<f64>,
    /// `2π²/L_eff²`.
    pub reference_coefficient: Option<f64>,
    pub flags: Vec<String>,
}

fn moving_median(values: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            median(&values[lo..hi])
        })
        .collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mode_of(counts: impl Iterator<Item = usize>) -> Option<usize> {
    let mut v: Vec<usize> = counts.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    let mut best = (v[0], 0usize);
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|&&x| x == v[i]).count();
        if j > best.1 {
            best = (v[i], j);
        }
        i += j;
    }
    Some(best.0)
}

/// Fits `y = C n²` through the origin; returns `(C, R²)`.
pub fn fit_quadratic(modes: &[usize], energies: &[f64]) -> Option<(f64, f64)> {
    if modes.is_empty() || modes.len() != energies.len() {
        return None;
    }
    let n2: Vec<f64> = modes.iter().map(|&n| (n * n) as f64).collect();
    let denom: f64 = n2.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return None;
    }
    let c = n2.iter().zip(energies).map(|(a, e)| a * e).sum::<f64>() / denom;
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let ss_res: f64 = n2.iter().zip(energies).map(|(a, e)| (e - c * a).powi(2)).sum();
    let ss_tot: f64 = energies.iter().map(|e| (e - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    Some((c, r2))
}

/// Minimum number of stable runs for a meaningful extraction.
pub const MIN_STABLE_RUNS: usize = 10;

/// Locates plateaus of `E_k(ε)` and matches them to mode numbers.
///
/// Over stable runs ordered by `ε`, `E_k` is smoothed with a moving median.
/// A plateau is a maximal stretch within `plateau_tolerance` of a local
/// minimum of the smoothed curve that is bounded on both sides by higher
/// values. Its mode number is the most frequent interior peak count among
/// its coherent runs (all runs if none is coherent).
pub fn extract_energy_levels(runs: &[RunAnalysis], cfg: &AnalysisConfig) -> EnergyLevels {
    let mut flags = Vec::new();
    let mut stable: Vec<&RunAnalysis> = runs
        .iter()
        .filter(|r| r.stable && r.mean_kinetic.is_some())
        .collect();
    stable.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    if stable.len() < MIN_STABLE_RUNS {
        flags.push(format!(
            "only {} stable runs (need {MIN_STABLE_RUNS})",
            stable.len()
        ));
    }
    let energy: Vec<f64> = stable.iter().map(|r| r.mean_kinetic.unwrap()).collect();
    let smooth = moving_median(&energy, cfg.smoothing_window);
    let tol = cfg.plateau_tolerance;

    let mut segments: Vec<(usize, usize, usize)> = Vec::new();
    for m in 1..smooth.len().saturating_sub(1) {
        if !(smooth[m] <= smooth[m - 1] && smooth[m] <= smooth[m + 1]) {
            continue;
        }
        let level = smooth[m];
        let within = |v: f64| v <= level + tol * level.abs();
        let mut lo = m;
        while lo > 0 && within(smooth[lo - 1]) {
            lo -= 1;
        }
        let mut hi = m;
        while hi + 1 < smooth.len() && within(smooth[hi + 1]) {
            hi += 1;
        }
        if lo == 0 || hi + 1 == smooth.len() {
            continue;
        }
        if segments.last().is_some_and(|s| s.0 == lo && s.1 == hi) {
            continue;
        }
        segments.push((lo, hi, m));
    }
    // Drop plateaus nested in, or overlapping, a deeper one.
    segments.sort_by(|a, b| smooth[a.2].total_cmp(&smooth[b.2]));
    let mut chosen: Vec<(usize, usize, usize)> = Vec::new();
    for s in segments {
        if chosen.iter().all(|c| s.1 < c.0 || s.0 > c.1) {
            chosen.push(s);
        }
    }
    chosen.sort_by_key(|s| s.0);

    let mut levels = Vec::new();
    for (lo, hi, _) in chosen {
        let members = &stable[lo..=hi];
        let coherent: Vec<&&RunAnalysis> = members.iter().filter(|r| !r.transitional).collect();
        let counted: Vec<usize> = if coherent.is_empty() {
            members.iter().map(|r| r.modes.interior_peak_count).collect()
        } else {
            coherent.iter().map(|r| r.modes.interior_peak_count).collect()
        };
        let Some(mode_number) = mode_of(counted.into_iter()) else {
            continue;
        };
        if mode_number == 0 {
            flags.push(format!(
                "plateau at eps {:.4} has no interior peaks",
                members[0].epsilon
            ));
            continue;
        }
        let e_slice = &energy[lo..=hi];
        let argmin = (lo..=hi)
            .min_by(|&a, &b| energy[a].total_cmp(&energy[b]))
            .unwrap();
        let lengths: Vec<f64> = members
            .iter()
            .filter_map(|r| r.modes.effective_length)
            .collect();
        levels.push(EnergyLevel {
            epsilon: stable[argmin].epsilon,
            epsilon_range: (members[0].epsilon, members[members.len() - 1].epsilon),
            mode_number,
            kinetic_energy: median(e_slice),
            effective_length: (!lengths.is_empty()).then(|| median(&lengths)),
        });
    }
    if levels.is_empty() {
        flags.push("no plateaus found".to_string());
    }
    if levels.windows(2).any(|w| w[1].mode_number <= w[0].mode_number) {
        flags.push("mode numbers not strictly increasing with epsilon".to_string());
    }

    let modes: Vec<usize> = levels.iter().map(|l| l.mode_number).collect();
    let energies: Vec<f64> = levels.iter().map(|l| l.kinetic_energy).collect();
    let fit = fit_quadratic(&modes, &energies);
    let lengths: Vec<f64> = levels.iter().filter_map(|l| l.effective_length).collect();
    let effective_length = (!lengths.is_empty()).then(|| median(&lengths));
    EnergyLevels {
        epsilon_n: levels.iter().map(|l| l.epsilon).collect(),
        mode_numbers: modes,
        fit_coefficient: fit.map(|f| f.0),
        fit_quality: fit.map(|f| f.1),
        reference_coefficient: effective_length.map(|l| 2.0 * PI * PI / (l * l)),
        effective_length,
        levels,
        flags,
    }
}
