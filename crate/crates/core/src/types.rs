// SPDX-License-Identifier: Apache-2.0

//! Shared domain types: lattice and drive specifications, trajectories,
//! quasi-energy pairs and localization points.
//!
//! Units follow ħ = 1 and unit lattice spacing. Rates and forces are in the
//! same (arbitrary) energy unit; the CLI fixes it to the coupling σ.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the zero-mean check on sampled waveforms.
const ZERO_MEAN_TOL: f64 = 1e-12;

/// Site dependence of the nearest-neighbour hopping rate κ_n
/// (κ_n couples sites n-1 and n).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum HoppingLaw {
    /// κ_n = σ.
    Homogeneous,
    /// κ_n = σ √n.
    GlauberFock,
    /// κ_n = σ n.
    PseudoGlauberFock,
    /// Explicit table of κ_n, one entry per retained site.
    Custom { hops: Vec<f64> },
}

impl HoppingLaw {
    /// Lattices whose site 0 is a physical edge rather than a truncation.
    pub fn is_semi_infinite(&self) -> bool {
        matches!(self, HoppingLaw::GlauberFock | HoppingLaw::PseudoGlauberFock)
    }

    pub fn name(&self) -> &'static str {
        match self {
            HoppingLaw::Homogeneous => "homogeneous",
            HoppingLaw::GlauberFock => "glauber-fock",
            HoppingLaw::PseudoGlauberFock => "pseudo-glauber-fock",
            HoppingLaw::Custom { .. } => "custom",
        }
    }
}

/// A truncated tight-binding lattice with sites `0..truncation`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpec {
    law: HoppingLaw,
    sigma: f64,
    truncation: usize,
}

impl LatticeSpec {
    pub fn new(law: HoppingLaw, sigma: f64, truncation: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidLattice(format!(
                "coupling sigma must be positive, got {sigma}"
            )));
        }
        if truncation < 2 {
            return Err(Error::InvalidLattice(format!(
                "truncation must be at least 2, got {truncation}"
            )));
        }
        if let HoppingLaw::Custom { hops } = &law {
            if hops.len() != truncation {
                return Err(Error::InvalidLattice(format!(
                    "custom hopping table has {} entries, truncation is {truncation}",
                    hops.len()
                )));
            }
            if let Some(bad) = hops.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
                return Err(Error::InvalidLattice(format!(
                    "custom hopping rates must be finite and nonnegative, got {bad}"
                )));
            }
        }
        Ok(Self {
            law,
            sigma,
            truncation,
        })
    }

    pub fn homogeneous(sigma: f64, truncation: usize) -> Result<Self> {
        Self::new(HoppingLaw::Homogeneous, sigma, truncation)
    }

    pub fn glauber_fock(sigma: f64, truncation: usize) -> Result<Self> {
        Self::new(HoppingLaw::GlauberFock, sigma, truncation)
    }

    pub fn pseudo_glauber_fock(sigma: f64, truncation: usize) -> Result<Self> {
        Self::new(HoppingLaw::PseudoGlauberFock, sigma, truncation)
    }

    pub fn law(&self) -> &HoppingLaw {
        &self.law
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Same hopping law with a different number of retained sites.
    /// Custom tables cannot be resized.
    pub fn with_truncation(&self, truncation: usize) -> Result<Self> {
        if matches!(self.law, HoppingLaw::Custom { .. }) && truncation != self.truncation {
            return Err(Error::InvalidLattice(
                "a custom hopping table cannot be resized".into(),
            ));
        }
        Self::new(self.law.clone(), self.sigma, truncation)
    }

    /// All rates κ_0..κ_{N-1}.
    pub fn hops(&self) -> Vec<f64> {
        (0..self.truncation)
            .map(|n| self.rate_unchecked(n))
            .collect()
    }

    fn rate_unchecked(&self, n: usize) -> f64 {
        match &self.law {
            HoppingLaw::Homogeneous => self.sigma,
            HoppingLaw::GlauberFock => self.sigma * (n as f64).sqrt(),
            HoppingLaw::PseudoGlauberFock => self.sigma * n as f64,
            HoppingLaw::Custom { hops } => hops[n],
        }
    }
}

/// Hopping rate κ_n between sites n-1 and n.
pub fn hopping_rate(lattice: &LatticeSpec, n: usize) -> Result<f64> {
    if n >= lattice.truncation {
        return Err(Error::SiteOutOfRange {
            index: n,
            truncation: lattice.truncation,
        });
    }
    Ok(lattice.rate_unchecked(n))
}

/// Time dependence of the applied force.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "waveform")]
pub enum Waveform {
    /// F(t) = F₀ cos ωt.
    Sinusoidal,
    /// +F₀ on the first half period, -F₀ on the second.
    SquareWave,
    /// F(t) = F₀.
    Dc,
    /// F(t) = F₀ s(t), with s linearly interpolated between uniformly spaced
    /// samples covering one period (sample i sits at t = iT/m).
    CustomSamples { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriveSpec {
    waveform: Waveform,
    f0: f64,
    omega: f64,
    /// Cumulative integral of the sample shape at each node (custom only).
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl DriveSpec {
    pub fn new(waveform: Waveform, f0: f64, omega: f64) -> Result<Self> {
        if !(f0.is_finite() && f0 >= 0.0) {
            return Err(Error::InvalidDrive(format!(
                "amplitude f0 must be finite and nonnegative, got {f0}"
            )));
        }
        let periodic = !matches!(waveform, Waveform::Dc);
        if periodic && !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidDrive(format!(
                "angular frequency must be positive for periodic drives, got {omega}"
            )));
        }
        let mut cumulative = Vec::new();
        if let Waveform::CustomSamples { samples } = &waveform {
            if samples.len() < 2 {
                return Err(Error::InvalidDrive(
                    "custom waveform needs at least 2 samples".into(),
                ));
            }
            if samples.iter().any(|s| !s.is_finite()) {
                return Err(Error::InvalidDrive("custom samples must be finite".into()));
            }
            let scale = samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            if mean.abs() > ZERO_MEAN_TOL * scale.max(1.0) {
                return Err(Error::InvalidDrive(format!(
                    "custom waveform must have zero mean over a period, mean is {mean:.3e}"
                )));
            }
            let m = samples.len();
            let h = 1.0 / m as f64;
            cumulative.reserve(m + 1);
            cumulative.push(0.0);
            for i in 0..m {
                let next = samples[(i + 1) % m];
                let last = cumulative[i];
                cumulative.push(last + 0.5 * h * (samples[i] + next));
            }
        }
        Ok(Self {
            waveform,
            f0,
            omega: if periodic { omega } else { 0.0 },
            cumulative,
        })
    }

    pub fn sinusoidal(f0: f64, omega: f64) -> Result<Self> {
        Self::new(Waveform::Sinusoidal, f0, omega)
    }

    pub fn square_wave(f0: f64, omega: f64) -> Result<Self> {
        Self::new(Waveform::SquareWave, f0, omega)
    }

    pub fn dc(f0: f64) -> Result<Self> {
        Self::new(Waveform::Dc, f0, 0.0)
    }

    /// Periodic drive parametrized by Γ = F₀/ω.
    pub fn from_gamma(waveform: Waveform, gamma: f64, omega: f64) -> Result<Self> {
        if matches!(waveform, Waveform::Dc) {
            return Err(Error::InvalidDrive("a dc drive has no Γ".into()));
        }
        Self::new(waveform, gamma * omega, omega)
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Angular frequency; zero for dc drives.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn is_periodic(&self) -> bool {
        !matches!(self.waveform, Waveform::Dc)
    }

    pub fn period(&self) -> Option<f64> {
        self.is_periodic().then(|| TAU / self.omega)
    }

    /// Γ = F₀/ω for periodic drives.
    pub fn gamma(&self) -> Option<f64> {
        self.is_periodic().then(|| self.f0 / self.omega)
    }

    /// Copy with a different amplitude.
    pub fn with_f0(&self, f0: f64) -> Result<Self> {
        Self::new(self.waveform.clone(), f0, self.omega)
    }

    /// Points in (0, T) where F(t) is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match (&self.waveform, self.period()) {
            (Waveform::SquareWave, Some(period)) => vec![0.5 * period],
            (Waveform::CustomSamples { samples }, Some(period)) => {
                let m = samples.len();
                (1..m).map(|i| period * i as f64 / m as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Position within the current period, in [0, T).
    fn reduce(&self, t: f64) -> f64 {
        let period = TAU / self.omega;
        let tau = t.rem_euclid(period);
        if tau >= period {
            0.0
        } else {
            tau
        }
    }

    /// Instantaneous force F(t).
    pub fn value(&self, t: f64) -> f64 {
        match &self.waveform {
            Waveform::Sinusoidal => self.f0 * (self.omega * t).cos(),
            Waveform::Dc => self.f0,
            Waveform::SquareWave => {
                let tau = self.reduce(t);
                if tau < PI / self.omega {
                    self.f0
                } else {
                    -self.f0
                }
            }
            Waveform::CustomSamples { samples } => {
                let m = samples.len();
                let x = self.reduce(t) * self.omega / TAU * m as f64;
                let i = (x.floor() as usize).min(m - 1);
                let frac = x - i as f64;
                let (a, b) = (samples[i], samples[(i + 1) % m]);
                self.f0 * (a + (b - a) * frac)
            }
        }
    }

    /// Accumulated phase φ(t) = ∫₀ᵗ F(t') dt', exact for every waveform.
    pub fn phase(&self, t: f64) -> f64 {
        match &self.waveform {
            Waveform::Sinusoidal => self.f0 / self.omega * (self.omega * t).sin(),
            Waveform::Dc => self.f0 * t,
            Waveform::SquareWave => {
                let half = PI / self.omega;
                let tau = self.reduce(t);
                if tau < half {
                    self.f0 * tau
                } else {
                    self.f0 * (2.0 * half - tau)
                }
            }
            Waveform::CustomSamples { samples } => {
                let m = samples.len();
                let period = TAU / self.omega;
                let x = self.reduce(t) / period * m as f64;
                let i = (x.floor() as usize).min(m - 1);
                let frac = x - i as f64;
                let (a, b) = (samples[i], samples[(i + 1) % m]);
                let h = 1.0 / m as f64;
                let partial = h * (a * frac + 0.5 * (b - a) * frac * frac);
                self.f0 * period * (self.cumulative[i] + partial)
            }
        }
    }
}

/// Force F(t) of a drive.
pub fn drive_value(drive: &DriveSpec, t: f64) -> f64 {
    drive.value(t)
}

/// Accumulated phase ∫₀ᵗ F.
pub fn drive_phase(drive: &DriveSpec, t: f64) -> f64 {
    drive.phase(t)
}

/// Time-stamped lattice amplitudes c_n(t) with per-snapshot diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
    pub norms: Vec<f64>,
    pub edge_occupation: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn sites(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Site probabilities |c_n|² of snapshot `k`.
    pub fn probabilities(&self, k: usize) -> Vec<f64> {
        self.states[k].iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.norms
            .iter()
            .fold(0.0_f64, |m, n| m.max((n - 1.0).abs()))
    }
}

/// How the two Floquet exponents relate at a degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Degeneracy {
    /// Distinct quasi-energies.
    None,
    /// μ₁ = μ₂ with a diagonalizable monodromy (U = ±1).
    Diagonalizable,
    /// μ₁ = μ₂ with a single eigenvector (Jordan block).
    Defective,
}

/// Complex Floquet exponents of the 2×2 system, branch-reduced so that
/// Re μ ∈ (-ω/2, ω/2] and ordered with Im μ₁ ≥ Im μ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiEnergyPair {
    pub mu1: Complex64,
    pub mu2: Complex64,
    pub branch_certified: bool,
    pub degeneracy: Degeneracy,
}

/// How a localization point was located on the Γ axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CrossingKind {
    /// The crossing functional changes sign.
    SignChange,
    /// The crossing functional touches zero from above.
    Touch,
}

/// A quasi-energy crossing Γ₀ at a fixed ω/σ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DLPoint {
    pub gamma0: f64,
    pub residual: f64,
    pub fidelity: Option<f64>,
    pub omega_over_sigma: f64,
    pub kind: CrossingKind,
}
