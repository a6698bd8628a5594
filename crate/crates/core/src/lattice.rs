// SPDX-License-Identifier: Apache-2.0

//! Driven tight-binding lattice dynamics:
//!
//! i dc_n/dt = −κ_n c_{n−1} − κ_{n+1} c_{n+1} + n F(t) c_n,  c_{−1} = c_N = 0.
//!
//! The on-site term is removed exactly by the gauge c_n = b_n e^{−inφ(t)},
//! φ = ∫F, leaving i db_n/dt = −κ_n e^{iφ} b_{n−1} − κ_{n+1} e^{−iφ} b_{n+1},
//! which is integrated with the adaptive Dormand–Prince scheme. Snapshots are
//! returned in the original (lab) gauge.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::breakpoints_up_to;
use crate::error::{Error, Result};
use crate::ode::{self, ComplexSystem, OdeSettings};
use crate::quad;
use crate::types::{DriveSpec, LatticeSpec, Trajectory};

/// Edge occupation above which a run is declared truncation-limited.
pub const EDGE_THRESHOLD: f64 = 1e-6;
/// Allowed drift of Σ|c_n|² over a run.
pub const NORM_TOLERANCE: f64 = 1e-8;
/// Default number of sites for driven runs.
pub const DEFAULT_TRUNCATION: usize = 128;
/// Auto-truncation doubles N at most this many times.
pub const MAX_TRUNCATION_RETRIES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum step as a fraction of the reference period (the drive period,
    /// or 2π/σ for dc drives).
    pub max_step: f64,
    /// Snapshots per reference period.
    pub snapshot_stride: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0 / 50.0,
            snapshot_stride: 64,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(tol > 0.0 && tol <= 1e-3) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must lie in (0, 1e-3], got {tol}"
                )));
            }
        }
        if !(self.max_step > 0.0 && self.max_step <= 1.0 / 50.0) {
            return Err(Error::InvalidArgument(format!(
                "max_step must lie in (0, 1/50] of the period, got {}",
                self.max_step
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::InvalidArgument("snapshot_stride must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn ode(&self, reference_period: f64) -> OdeSettings {
        OdeSettings {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step * reference_period,
            max_steps: 50_000_000,
        }
    }
}

/// Time scale used for step bounds and snapshot spacing.
pub fn reference_period(drive: &DriveSpec, sigma: f64) -> f64 {
    drive.period().unwrap_or(TAU / sigma)
}

/// Starting condition for lattice runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// c_n(0) = δ_{n,k}.
    Site(usize),
    /// Explicit amplitudes, zero-padded when the lattice grows.
    Amplitudes(Vec<Complex64>),
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Site(0)
    }
}

impl InitialState {
    pub fn amplitudes(&self, sites: usize) -> Result<Vec<Complex64>> {
        let mut v = vec![Complex64::new(0.0, 0.0); sites];
        match self {
            InitialState::Site(k) => {
                if *k >= sites {
                    return Err(Error::SiteOutOfRange {
                        index: *k,
                        truncation: sites,
                    });
                }
                v[*k] = Complex64::new(1.0, 0.0);
            }
            InitialState::Amplitudes(a) => {
                if a.len() > sites {
                    return Err(Error::InvalidArgument(format!(
                        "{} amplitudes do not fit {sites} sites",
                        a.len()
                    )));
                }
                v[..a.len()].copy_from_slice(a);
            }
        }
        Ok(v)
    }
}

/// Single-site excitation δ_{n,k} on `sites` sites.
pub fn single_site(k: usize, sites: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); sites];
    v[k] = Complex64::new(1.0, 0.0);
    v
}

struct RotatingFrame<'a> {
    hops: Vec<f64>,
    drive: &'a DriveSpec,
}

impl ComplexSystem for RotatingFrame<'_> {
    fn dim(&self) -> usize {
        self.hops.len()
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let n = y.len();
        let (s, c) = self.drive.phase(t).sin_cos();
        // i·e^{iφ} and i·e^{-iφ}
        let up = Complex64::new(-s, c);
        let down = Complex64::new(s, c);
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            if j > 0 {
                acc += up * (y[j - 1] * self.hops[j]);
            }
            if j + 1 < n {
                acc += down * (y[j + 1] * self.hops[j + 1]);
            }
            dy[j] = acc;
        }
    }
}

fn edge_occupation(lattice: &LatticeSpec, probs: impl Fn(usize) -> f64) -> f64 {
    let last = probs(lattice.truncation() - 1);
    if lattice.law().is_semi_infinite() {
        last
    } else {
        last.max(probs(0))
    }
}

/// Snapshot times 0, Δ, 2Δ, … up to and including `t_end`, with
/// Δ = reference period / stride, so every multiple of the drive period is hit.
pub fn snapshot_times(drive: &DriveSpec, sigma: f64, t_end: f64, stride: usize) -> Vec<f64> {
    let dt = reference_period(drive, sigma) / stride as f64;
    let count = (t_end / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * dt).collect();
    let last = count as f64 * dt;
    if t_end - last > 1e-9 * dt {
        times.push(t_end);
    } else if count > 0 {
        times[count] = t_end;
    }
    times
}

/// Integrate the lattice from `initial` up to `t_end` with snapshots on the
/// settings' grid.
pub fn evolve(
    lattice: &LatticeSpec,
    drive: &DriveSpec,
    initial: &[Complex64],
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be nonnegative, got {t_end}")));
    }
    let times = snapshot_times(drive, lattice.sigma(), t_end, settings.snapshot_stride);
    evolve_at(lattice, drive, initial, &times, settings)
}

/// Integrate with snapshots exactly at the given nondecreasing times
/// (the first must be 0).
pub fn evolve_at(
    lattice: &LatticeSpec,
    drive: &DriveSpec,
    initial: &[Complex64],
    times: &[f64],
    settings: &IntegratorSettings,
) -> Result<Trajectory> {
    settings.validate()?;
    let n = lattice.truncation();
    if initial.len() != n {
        return Err(Error::InvalidArgument(format!(
            "initial state has {} amplitudes, lattice has {n} sites",
            initial.len()
        )));
    }
    let norm0: f64 = initial.iter().map(|c| c.norm_sqr()).sum();
    if (norm0 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "initial state must be normalized, |c|^2 = {norm0}"
        )));
    }
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("snapshot times must start at 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("snapshot times must be strictly increasing".into()));
    }

    let system = RotatingFrame {
        hops: lattice.hops(),
        drive,
    };
    let ode_settings = settings.ode(reference_period(drive, lattice.sigma()));
    let mut trajectory = Trajectory {
        times: Vec::with_capacity(times.len()),
        states: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        edge_occupation: Vec::with_capacity(times.len()),
    };
    let mut y = initial.to_vec();
    ode::integrate(&system, &mut y, 0.0, times, &ode_settings, |t, b| {
        let phase = drive.phase(t);
        let state: Vec<Complex64> = b
            .iter()
            .enumerate()
            .map(|(j, bj)| bj * Complex64::from_polar(1.0, -(j as f64) * phase))
            .collect();
        let norm: f64 = state.iter().map(|c| c.norm_sqr()).sum();
        let edge = edge_occupation(lattice, |j| state[j].norm_sqr());
        if edge > EDGE_THRESHOLD {
            return Err(Error::TruncationInsufficient {
                truncation: n,
                time: t,
                occupation: edge,
            });
        }
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Accuracy(format!(
                "norm drifted to {norm:.12} at t = {t:.6}"
            )));
        }
        trajectory.times.push(t);
        trajectory.states.push(state);
        trajectory.norms.push(norm);
        trajectory.edge_occupation.push(edge);
        Ok(())
    })?;
    Ok(trajectory)
}

/// [`evolve`] with automatic truncation: on a truncation failure N is
/// doubled (up to [`MAX_TRUNCATION_RETRIES`] times). Returns the lattice
/// that succeeded alongside the trajectory.
pub fn evolve_auto(
    lattice: &LatticeSpec,
    drive: &DriveSpec,
    initial: &InitialState,
    t_end: f64,
    settings: &IntegratorSettings,
) -> Result<(LatticeSpec, Trajectory)> {
    let times = snapshot_times(drive, lattice.sigma(), t_end, settings.snapshot_stride);
    evolve_auto_at(lattice, drive, initial, &times, settings)
}

pub fn evolve_auto_at(
    lattice: &LatticeSpec,
    drive: &DriveSpec,
    initial: &InitialState,
    times: &[f64],
    settings: &IntegratorSettings,
) -> Result<(LatticeSpec, Trajectory)> {
    let mut current = lattice.clone();
    let mut attempt = 0;
    loop {
        let amplitudes = initial.amplitudes(current.truncation())?;
        match evolve_at(&current, drive, &amplitudes, times, settings) {
            Ok(traj) => return Ok((current, traj)),
            Err(Error::TruncationInsufficient { .. }) if attempt < MAX_TRUNCATION_RETRIES => {
                attempt += 1;
                current = current.with_truncation(2 * current.truncation())?;
            }
            Err(e) => return Err(e),
        }
    }
}

/// 1 − ½ Σ_n |p_n − q_n|: one for identical occupations, zero for disjoint.
pub fn occupation_fidelity(reference: &[f64], probe: &[f64]) -> f64 {
    let tv: f64 = reference
        .iter()
        .zip(probe)
        .map(|(a, b)| (a - b).abs())
        .sum();
    (1.0 - 0.5 * tv).clamp(0.0, 1.0)
}

/// Site probabilities at time `t`, linearly interpolated between the
/// bracketing snapshots.
pub fn probabilities_at(traj: &Trajectory, t: f64) -> Option<Vec<f64>> {
    let end = traj.t_end();
    let tol = 1e-9 * end.max(1.0);
    if traj.is_empty() || t < -tol || t > end + tol {
        return None;
    }
    let k = traj.times.partition_point(|&s| s < t - tol);
    let k = k.min(traj.len() - 1);
    if (traj.times[k] - t).abs() <= tol || k == 0 {
        return Some(traj.probabilities(k));
    }
    let (t0, t1) = (traj.times[k - 1], traj.times[k]);
    let w = (t - t0) / (t1 - t0);
    let p0 = traj.probabilities(k - 1);
    let p1 = traj.probabilities(k);
    Some(p0.iter().zip(&p1).map(|(a, b)| a + w * (b - a)).collect())
}

/// Revival fidelity at t = lT for l = 1..=cycles.
pub fn revival_fidelity(traj: &Trajectory, period: f64, cycles: usize) -> Result<Vec<f64>> {
    if traj.is_empty() {
        return Err(Error::InvalidArgument("empty trajectory".into()));
    }
    let initial = traj.probabilities(0);
    (1..=cycles)
        .map(|l| {
            probabilities_at(traj, l as f64 * period)
                .map(|p| occupation_fidelity(&initial, &p))
                .ok_or(Error::CycleOutOfRange {
                    cycle: l,
                    t_end: traj.t_end(),
                })
        })
        .collect()
}

/// Per-site |c_n(lT)|² − |c_n(0)|² for diagnostics.
pub fn revival_site_deltas(traj: &Trajectory, period: f64, cycle: usize) -> Result<Vec<f64>> {
    let p = probabilities_at(traj, cycle as f64 * period).ok_or(Error::CycleOutOfRange {
        cycle,
        t_end: traj.t_end(),
    })?;
    Ok(p.iter()
        .zip(traj.probabilities(0))
        .map(|(a, b)| a - b)
        .collect())
}

/// S(q) = Σ_n |c_n|² e^{iqn}.
pub fn occupation_spectrum(state: &[Complex64], q: f64) -> Complex64 {
    state
        .iter()
        .enumerate()
        .map(|(n, c)| Complex64::from_polar(c.norm_sqr(), q * n as f64))
        .sum()
}

/// ∫₀ᵀ exp(i ∫₀ᵗ F) dt; zero exactly at the homogeneous-lattice
/// localization condition.
pub fn dl_integral_condition(drive: &DriveSpec) -> Result<Complex64> {
    let period = drive.period().ok_or(Error::NotPeriodic)?;
    let breaks = breakpoints_up_to(drive, period);
    let q = quad::integrate_with_breaks(
        |t| Complex64::from_polar(1.0, drive.phase(t)),
        0.0,
        period,
        &breaks,
        1e-13 * period,
    )?;
    Ok(q.value)
}
