// SPDX-License-Identifier: Apache-2.0

//! Floquet analysis of the 2×2 operator system
//!
//! i d/dt (â, b̂†)ᵀ = M(t) (â, b̂†)ᵀ,   M(t) = [[F/2, −σ], [σ, −F/2]],
//!
//! which governs the pseudo-Glauber-Fock lattice. M is real and traceless,
//! so the monodromy U has det U = 1 and the symmetry U₂₂ = conj U₁₁,
//! U₂₁ = conj U₁₂ (trace U is real). Localization requires degenerate
//! quasi-energies, i.e. trace U = ±2.

use std::f64::consts::TAU;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::lattice::{self, InitialState, IntegratorSettings};
use crate::ode::{self, ComplexSystem};
use crate::roots;
use crate::types::{CrossingKind, DLPoint, Degeneracy, DriveSpec, LatticeSpec, QuasiEnergyPair, Waveform};

/// Accuracy gate on the (scale-aware) determinant residual.
pub const DET_FAILURE: f64 = 1e-8;
/// Monodromy steps are bounded by this fraction of the period.
pub const MONODROMY_MAX_STEP: f64 = 1.0 / 200.0;

pub type Mat2 = Matrix2<Complex64>;

/// M(t) = [[F(t)/2, −σ], [σ, −F(t)/2]].
pub fn coefficient_matrix(drive: &DriveSpec, sigma: f64, t: f64) -> Matrix2<f64> {
    let half = 0.5 * drive.value(t);
    Matrix2::new(half, -sigma, sigma, -half)
}

/// Tolerances used for monodromy integration.
pub fn monodromy_settings() -> IntegratorSettings {
    IntegratorSettings {
        rel_tol: 1e-12,
        abs_tol: 1e-14,
        max_step: MONODROMY_MAX_STEP,
        snapshot_stride: 1,
    }
}

struct TwoLevel<'a> {
    drive: &'a DriveSpec,
    sigma: f64,
}

impl ComplexSystem for TwoLevel<'_> {
    fn dim(&self) -> usize {
        4
    }

    // column-major V, dV/dt = −i M V
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let half = 0.5 * self.drive.value(t);
        let mi = Complex64::new(0.0, -1.0);
        for col in 0..2 {
            let (top, bottom) = (y[2 * col], y[2 * col + 1]);
            dy[2 * col] = mi * (top * half - bottom * self.sigma);
            dy[2 * col + 1] = mi * (top * self.sigma - bottom * half);
        }
    }
}

/// Propagator V(t) of the 2×2 system with V(0) = 1 at each of the
/// nondecreasing `times`.
pub fn propagators(
    drive: &DriveSpec,
    sigma: f64,
    times: &[f64],
    settings: &IntegratorSettings,
) -> Result<Vec<Mat2>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma}")));
    }
    settings.validate()?;
    let system = TwoLevel { drive, sigma };
    let reference = drive
        .period()
        .unwrap_or(TAU / sigma.max(drive.f0()).max(1e-300));
    let mut ode_settings = settings.ode(reference);
    ode_settings.max_step = ode_settings.max_step.min(MONODROMY_MAX_STEP * reference);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut y = vec![one, zero, zero, one];
    let mut out = Vec::with_capacity(times.len());
    ode::integrate(&system, &mut y, 0.0, times, &ode_settings, |_, v| {
        out.push(Mat2::from_column_slice(v));
        Ok(())
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monodromy {
    pub u: Mat2,
    /// |det U − 1| relative to the magnitude of the products entering det U
    /// and to the transient growth.
    pub det_residual: f64,
    /// Deviation from U₂₂ = conj U₁₁, U₂₁ = conj U₁₂, relative to max(1, |U|).
    pub symmetry_residual: f64,
    /// Largest entry of V(t) over the period. Integration error in U scales
    /// with it, not with |U|.
    pub growth: f64,
    pub period: f64,
}

impl Monodromy {
    pub fn from_matrix(u: Mat2, period: f64) -> Self {
        Self::with_growth(u, period, 1.0)
    }

    /// As `from_matrix`, with the transient growth of V(t) over the period.
    pub fn with_growth(u: Mat2, period: f64, growth: f64) -> Self {
        let det = u[(0, 0)] * u[(1, 1)] - u[(0, 1)] * u[(1, 0)];
        let scale = (u[(0, 0)] * u[(1, 1)]).norm() + (u[(0, 1)] * u[(1, 0)]).norm();
        let size = u.iter().fold(1.0_f64, |m, z| m.max(z.norm()));
        let symmetry = ((u[(1, 1)] - u[(0, 0)].conj()).norm()
            + (u[(1, 0)] - u[(0, 1)].conj()).norm())
            / size;
        let growth = growth.max(size);
        Self {
            u,
            det_residual: (det - 1.0).norm() / scale.max(growth),
            symmetry_residual: symmetry,
            growth,
            period,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.u[(0, 0)] + self.u[(1, 1)]
    }

    /// |trace U| − 2.
    pub fn crossing_value(&self) -> f64 {
        self.trace().re.abs() - 2.0
    }
}

/// One-period propagator of the 2×2 system.
pub fn monodromy(drive: &DriveSpec, sigma: f64, settings: &IntegratorSettings) -> Result<Monodromy> {
    let period = drive.period().ok_or(Error::NotPeriodic)?;
    let samples = (MONODROMY_MAX_STEP.recip()) as usize;
    let times: Vec<f64> = (1..=samples).map(|k| period * k as f64 / samples as f64).collect();
    let path = propagators(drive, sigma, &times, settings)?;
    let growth = path
        .iter()
        .flat_map(|v| v.iter())
        .fold(1.0_f64, |m, z| m.max(z.norm()));
    let m = Monodromy::with_growth(path[samples - 1], period, growth);
    if !(m.det_residual <= DET_FAILURE) {
        return Err(Error::Accuracy(format!(
            "monodromy determinant residual {:.3e} exceeds {DET_FAILURE:.0e}",
            m.det_residual
        )));
    }
    Ok(m)
}

/// Reduce the real part into (−ω/2, ω/2].
fn reduce_branch(mu: Complex64, omega: f64) -> Complex64 {
    let mut re = mu.re.rem_euclid(omega);
    if re > 0.5 * omega {
        re -= omega;
    }
    Complex64::new(re, mu.im)
}

fn in_branch(mu: Complex64, omega: f64) -> bool {
    mu.re > -0.5 * omega && mu.re <= 0.5 * omega
}

/// Floquet exponents μ with eigenvalues e^{−iμT} of the monodromy.
pub fn quasi_energies(m: &Monodromy, omega: f64) -> Result<QuasiEnergyPair> {
    if !(omega > 0.0) {
        return Err(Error::InvalidArgument(format!("omega must be positive, got {omega}")));
    }
    let period = TAU / omega;
    let i = Complex64::new(0.0, 1.0);
    let half_trace = 0.5 * m.trace();
    // characteristic polynomial ρ² − tr ρ + 1 (det U = 1 is certified)
    let disc = half_trace * half_trace - 1.0;
    let root = disc.sqrt();
    let rho1 = if (half_trace + root).norm() >= (half_trace - root).norm() {
        half_trace + root
    } else {
        half_trace - root
    };
    let rho2 = if rho1.norm() <= 1e3 {
        2.0 * half_trace - rho1
    } else {
        1.0 / rho1
    };
    let to_mu = |rho: Complex64| reduce_branch(i * rho.ln() / period, omega);
    let (mut mu1, mut mu2) = (to_mu(rho1), to_mu(rho2));

    let sum = reduce_branch(mu1 + mu2, omega);
    if sum.norm() > 1e-8 {
        return Err(Error::Accuracy(format!(
            "quasi-energies not paired: mu1 + mu2 = {sum:.3e}"
        )));
    }

    let degeneracy = if disc.norm() <= 1e-10 {
        let deviation = (m.u - Mat2::identity() * half_trace)
            .iter()
            .fold(0.0_f64, |acc, z| acc.max(z.norm()));
        let common = to_mu(half_trace);
        mu1 = common;
        mu2 = common;
        if deviation <= 1e-6 {
            Degeneracy::Diagonalizable
        } else {
            Degeneracy::Defective
        }
    } else {
        Degeneracy::None
    };

    if (mu2.im, mu2.re) > (mu1.im, mu1.re) {
        std::mem::swap(&mut mu1, &mut mu2);
    }
    Ok(QuasiEnergyPair {
        mu1,
        mu2,
        branch_certified: in_branch(mu1, omega) && in_branch(mu2, omega),
        degeneracy,
    })
}

/// Periodic drives of one waveform at fixed ω and σ, parametrized by Γ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveFamily {
    pub waveform: Waveform,
    pub omega: f64,
    pub sigma: f64,
}

impl DriveFamily {
    pub fn new(waveform: Waveform, omega: f64, sigma: f64) -> Result<Self> {
        if matches!(waveform, Waveform::Dc) {
            return Err(Error::NotPeriodic);
        }
        if !(omega > 0.0 && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "omega and sigma must be positive, got {omega}, {sigma}"
            )));
        }
        Ok(Self {
            waveform,
            omega,
            sigma,
        })
    }

    /// Sinusoidal drive at ω/σ with σ = 1.
    pub fn sinusoidal(omega_over_sigma: f64) -> Result<Self> {
        Self::new(Waveform::Sinusoidal, omega_over_sigma, 1.0)
    }

    pub fn omega_over_sigma(&self) -> f64 {
        self.omega / self.sigma
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    pub fn drive(&self, gamma: f64) -> Result<DriveSpec> {
        if !(gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be nonnegative, got {gamma}")));
        }
        DriveSpec::from_gamma(self.waveform.clone(), gamma, self.omega)
    }

    pub fn monodromy(&self, gamma: f64, settings: &IntegratorSettings) -> Result<Monodromy> {
        monodromy(&self.drive(gamma)?, self.sigma, settings).map_err(|e| match e {
            Error::Accuracy(msg) => Error::Accuracy(format!("{msg} (gamma = {gamma})")),
            other => other,
        })
    }
}

/// |trace U(Γ)| − 2: positive where the quasi-energies are imaginary,
/// zero exactly where they coincide.
pub fn crossing_functional(family: &DriveFamily, gamma: f64, settings: &IntegratorSettings) -> Result<f64> {
    Ok(family.monodromy(gamma, settings)?.crossing_value())
}

/// A point of a Γ scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSample {
    pub gamma: f64,
    pub monodromy: Monodromy,
}

impl ScanSample {
    pub fn functional(&self) -> f64 {
        self.monodromy.crossing_value()
    }
}

/// Uniform Γ grid from `min` to `max` inclusive.
pub fn gamma_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) || min < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "invalid gamma range [{min}, {max}] step {step}"
        )));
    }
    let count = ((max - min) / step + 1e-9).floor() as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| min + k as f64 * step).collect();
    if max - grid[count] > 1e-9 * step {
        grid.push(max);
    }
    Ok(grid)
}

/// Monodromy at every grid point, in grid order.
pub fn scan(
    family: &DriveFamily,
    gammas: &[f64],
    settings: &IntegratorSettings,
    execution: Execution,
) -> Result<Vec<ScanSample>> {
    exec::map(execution, gammas, |&gamma| {
        family.monodromy(gamma, settings).map(|monodromy| ScanSample { gamma, monodromy })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchOptions {
    pub settings: IntegratorSettings,
    /// Largest |functional| accepted at a tangential crossing, per unit of
    /// transient growth.
    pub touch_tol: f64,
    /// Root bracket width on the Γ axis.
    pub xtol: f64,
    pub execution: Execution,
    /// Lattice verification of each point (pseudo-Glauber-Fock, edge start,
    /// one period).
    pub verify: Option<VerifyOptions>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            settings: monodromy_settings(),
            touch_tol: 1e-7,
            xtol: 1e-10,
            execution: Execution::Parallel,
            verify: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub settings: IntegratorSettings,
    pub truncation: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            settings: IntegratorSettings {
                snapshot_stride: 16,
                ..IntegratorSettings::default()
            },
            truncation: lattice::DEFAULT_TRUNCATION,
        }
    }
}

/// Scan Γ ∈ [0, gamma_max] with the given step and refine every crossing.
pub fn find_dl_points(
    family: &DriveFamily,
    gamma_max: f64,
    step: f64,
    options: &SearchOptions,
) -> Result<Vec<DLPoint>> {
    if !(gamma_max > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma_max must be positive, got {gamma_max}")));
    }
    let grid = gamma_grid(0.0, gamma_max, step)?;
    let samples = scan(family, &grid, &options.settings, options.execution)?;
    locate_dl_points(family, &samples, options)
}

/// Refine the crossings visible in a scan.
pub fn locate_dl_points(
    family: &DriveFamily,
    samples: &[ScanSample],
    options: &SearchOptions,
) -> Result<Vec<DLPoint>> {
    let f: Vec<f64> = samples.iter().map(ScanSample::functional).collect();
    let g: Vec<f64> = samples.iter().map(|s| s.gamma).collect();
    let eval = |gamma: f64| crossing_functional(family, gamma, &options.settings);
    let mut found: Vec<(f64, CrossingKind)> = Vec::new();

    for i in 0..samples.len() {
        if f[i] == 0.0 {
            found.push((g[i], CrossingKind::Touch));
            continue;
        }
        if i + 1 < samples.len() && f[i] * f[i + 1] < 0.0 {
            let root = roots::brent(eval, g[i], g[i + 1], options.xtol, 200)?;
            found.push((root, CrossingKind::SignChange));
        }
        let interior = i > 0 && i + 1 < samples.len();
        if interior
            && f[i - 1] * f[i] > 0.0
            && f[i] * f[i + 1] > 0.0
            && f[i].abs() <= f[i - 1].abs()
            && f[i].abs() < f[i + 1].abs()
        {
            found.extend(refine_touch(family, &samples[i - 1], &samples[i + 1], f[i], options)?);
        }
    }

    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.dedup_by(|b, a| (b.0 - a.0).abs() < 1e3 * options.xtol);
    found
        .into_iter()
        .map(|(gamma0, kind)| {
            let residual = eval(gamma0)?;
            let fidelity = match &options.verify {
                Some(v) => verify_dl_point(family, gamma0, v).ok(),
                None => None,
            };
            Ok(DLPoint {
                gamma0,
                residual,
                fidelity,
                omega_over_sigma: family.omega_over_sigma(),
                kind,
            })
        })
        .collect()
}

/// Refine a local minimum of the functional between two bracketing
/// samples. Returns nothing for an avoided crossing.
fn refine_touch(
    family: &DriveFamily,
    left: &ScanSample,
    right: &ScanSample,
    sign_ref: f64,
    options: &SearchOptions,
) -> Result<Vec<(f64, CrossingKind)>> {
    let settings = &options.settings;
    let (lo, hi) = (left.gamma, right.gamma);
    let eval = |gamma: f64| crossing_functional(family, gamma, settings);
    // minima can be far narrower than the grid step at low frequency
    let signed = |gamma: f64| eval(gamma).map(|f| f * sign_ref.signum());
    let (x, _) = roots::golden_min(signed, lo, hi, options.xtol)?;
    let mx = family.monodromy(x, settings)?;
    let fx = mx.crossing_value();
    if fx.abs() <= options.touch_tol * mx.growth {
        return Ok(vec![(polish_touch(family, x, lo, hi, options)?, CrossingKind::Touch)]);
    }
    if fx * sign_ref < 0.0 {
        // dipped through zero between grid points: two simple crossings
        let a = roots::brent(eval, lo, x, options.xtol, 200)?;
        let b = roots::brent(eval, x, hi, options.xtol, 200)?;
        return Ok(vec![(a, CrossingKind::SignChange), (b, CrossingKind::SignChange)]);
    }
    Ok(Vec::new())
}

/// Near a touch U ≈ ±(1 + δA) with Im U₁₁ linear in δ, so its root pins the
/// touch more sharply than the quadratic minimum does.
fn polish_touch(family: &DriveFamily, x: f64, lo: f64, hi: f64, options: &SearchOptions) -> Result<f64> {
    let im = |gamma: f64| family.monodromy(gamma, &options.settings).map(|m| m.u[(0, 0)].im);
    let mut width = 1e3 * options.xtol;
    while width < 0.5 * (hi - lo) {
        let (a, b) = ((x - width).max(lo), (x + width).min(hi));
        match roots::brent(im, a, b, options.xtol, 200) {
            Ok(root) => {
                let m = family.monodromy(root, &options.settings)?;
                if m.crossing_value().abs() <= options.touch_tol * m.growth {
                    return Ok(root);
                }
                return Ok(x);
            }
            Err(Error::NotBracketed { .. }) => width *= 4.0,
            Err(e) => return Err(e),
        }
    }
    Ok(x)
}

/// Revival fidelity after one period of the pseudo-Glauber-Fock lattice
/// driven at Γ, starting from the edge site.
pub fn verify_dl_point(family: &DriveFamily, gamma: f64, options: &VerifyOptions) -> Result<f64> {
    let drive = family.drive(gamma)?;
    let lat = LatticeSpec::pseudo_glauber_fock(family.sigma, options.truncation)?;
    let period = family.period();
    let (_, traj) = lattice::evolve_auto(&lat, &drive, &InitialState::Site(0), period, &options.settings)?;
    Ok(lattice::revival_fidelity(&traj, period, 1)?[0])
}

/// Site occupations of the pseudo-Glauber-Fock lattice started at the edge,
/// from the 2×2 propagator: |c_n|² = |α|^{-2} (|β|²/|α|²)^n with
/// (α, β) the first row of V(t).
pub fn edge_start_occupation(v: &Mat2, sites: usize) -> Vec<f64> {
    let a2 = v[(0, 0)].norm_sqr();
    let ratio = v[(0, 1)].norm_sqr() / a2;
    let mut p = 1.0 / a2;
    (0..sites)
        .map(|_| {
            let out = p;
            p *= ratio;
            out
        })
        .collect()
}

/// One row of a quasi-energy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiEnergySample {
    pub gamma: f64,
    pub mu1: Complex64,
    pub mu2: Complex64,
    pub abs_trace: f64,
}

impl QuasiEnergySample {
    pub fn from_scan(sample: &ScanSample, omega: f64) -> Result<Self> {
        let q = quasi_energies(&sample.monodromy, omega)?;
        Ok(Self {
            gamma: sample.gamma,
            mu1: q.mu1,
            mu2: q.mu2,
            abs_trace: sample.monodromy.trace().re.abs(),
        })
    }
}
