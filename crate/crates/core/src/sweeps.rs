// SPDX-License-Identifier: Apache-2.0

//! Parameter studies over (ω/σ, Γ): quasi-energy curves, the first
//! localization point Γ₀(ω/σ), WKB overlays, and dc Bloch revivals. All quantities are in
//! units of σ (σ = 1).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analytic::{self, PtPhase};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::floquet::{self, DriveFamily, QuasiEnergySample, SearchOptions, VerifyOptions};
use crate::lattice::{self, InitialState, IntegratorSettings};
use crate::types::{DLPoint, DriveSpec, HoppingLaw, LatticeSpec, Waveform};

/// DL points verified below this fidelity are flagged.
pub const FIDELITY_FLAG: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl GammaRange {
    pub fn new(min: f64, max: f64, step: f64) -> Result<Self> {
        let range = Self { min, max, step };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.min >= 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "gamma range needs 0 <= min <= max and step > 0, got {}:{}:{}",
                self.min, self.max, self.step
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        self.validate()?;
        if self.min == self.max {
            return Ok(vec![self.min]);
        }
        floquet::gamma_grid(self.min, self.max, self.step)
    }
}

impl Default for GammaRange {
    fn default() -> Self {
        Self { min: 0.0, max: 8.0, step: 0.01 }
    }
}

fn default_waveform() -> Waveform {
    Waveform::Sinusoidal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    pub omega_over_sigma: Vec<f64>,
    #[serde(default)]
    pub gamma_range: GammaRange,
    #[serde(default)]
    pub verify_fidelity: bool,
    #[serde(default)]
    pub wkb_overlay: bool,
    #[serde(default = "default_waveform")]
    pub waveform: Waveform,
    #[serde(default)]
    pub execution: Execution,
}

impl SweepPlan {
    pub fn new(omega_over_sigma: Vec<f64>, gamma_range: GammaRange) -> Result<Self> {
        let plan = Self {
            omega_over_sigma,
            gamma_range,
            verify_fidelity: false,
            wkb_overlay: false,
            waveform: Waveform::Sinusoidal,
            execution: Execution::default(),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega_over_sigma.is_empty() {
            return Err(Error::InvalidArgument("sweep needs at least one omega/sigma".into()));
        }
        if let Some(w) = self.omega_over_sigma.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(format!("omega/sigma must be positive, got {w}")));
        }
        if matches!(self.waveform, Waveform::Dc) {
            return Err(Error::NotPeriodic);
        }
        self.gamma_range.validate()
    }

    fn search_options(&self) -> SearchOptions {
        SearchOptions {
            execution: self.execution,
            verify: self.verify_fidelity.then(VerifyOptions::default),
            ..SearchOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WkbSample {
    pub gamma: f64,
    pub mu1: Complex64,
}

/// Sweep output at one ω/σ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub omega_over_sigma: f64,
    pub grid: Vec<f64>,
    pub samples: Vec<QuasiEnergySample>,
    pub dl_points: Vec<DLPoint>,
    /// Only Γ values without turning points carry a WKB sample.
    pub wkb: Option<Vec<WkbSample>>,
    /// Γ₀ of DL points whose verification failed or fell below
    /// [`FIDELITY_FLAG`].
    pub flagged: Vec<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub cause: Option<Error>,
}

impl OperatingPoint {
    fn failed(omega_over_sigma: f64, grid: Vec<f64>, error: Error) -> Self {
        Self {
            omega_over_sigma,
            grid,
            samples: Vec::new(),
            dl_points: Vec::new(),
            wkb: None,
            flagged: Vec::new(),
            error: Some(error.to_string()),
            cause: Some(error),
        }
    }

    /// Largest |Im μ_WKB − Im μ|/|Im μ| over the overlaid samples.
    pub fn wkb_max_relative_deviation(&self) -> Option<f64> {
        let wkb = self.wkb.as_ref()?;
        let mut worst: Option<f64> = None;
        for w in wkb {
            let exact = self.samples.iter().find(|s| s.gamma == w.gamma)?;
            let dev = (w.mu1.im - exact.mu1.im).abs() / exact.mu1.im.abs();
            worst = Some(worst.map_or(dev, |m| m.max(dev)));
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub plan: SweepPlan,
    pub points: Vec<OperatingPoint>,
}

impl SweepResult {
    pub fn errors(&self) -> impl Iterator<Item = (f64, &str)> {
        self.points
            .iter()
            .filter_map(|p| p.error.as_deref().map(|e| (p.omega_over_sigma, e)))
    }
}

fn sweep_point(plan: &SweepPlan, omega_over_sigma: f64, grid: &[f64]) -> Result<OperatingPoint> {
    let family = DriveFamily::new(plan.waveform.clone(), omega_over_sigma, 1.0)?;
    let options = plan.search_options();
    let scan = floquet::scan(&family, grid, &options.settings, plan.execution)?;
    let samples = scan
        .iter()
        .map(|s| QuasiEnergySample::from_scan(s, family.omega))
        .collect::<Result<Vec<_>>>()?;
    let dl_points = floquet::locate_dl_points(&family, &scan, &options)?;
    let wkb = if plan.wkb_overlay {
        let mut out = Vec::new();
        for &gamma in grid {
            match analytic::wkb_quasi_energy(&family.drive(gamma)?, family.sigma) {
                Ok((mu1, _)) => out.push(WkbSample { gamma, mu1 }),
                Err(Error::TurningPoint { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Some(out)
    } else {
        None
    };
    let flagged = if plan.verify_fidelity {
        dl_points
            .iter()
            .filter(|p| !p.fidelity.is_some_and(|f| f >= FIDELITY_FLAG))
            .map(|p| p.gamma0)
            .collect()
    } else {
        Vec::new()
    };
    Ok(OperatingPoint {
        omega_over_sigma,
        grid: grid.to_vec(),
        samples,
        dl_points,
        wkb,
        flagged,
        error: None,
        cause: None,
    })
}

/// Quasi-energies over the Γ grid and the DL points at every operating
/// point. A failing point is reported in place without aborting the rest.
pub fn run_quasi_energy_sweep(plan: &SweepPlan) -> Result<SweepResult> {
    plan.validate()?;
    let grid = plan.gamma_range.grid()?;
    let points = plan
        .omega_over_sigma
        .iter()
        .map(|&w| sweep_point(plan, w, &grid).unwrap_or_else(|e| OperatingPoint::failed(w, grid.clone(), e)))
        .collect();
    Ok(SweepResult { plan: plan.clone(), points })
}

/// First DL point at one ω/σ, or the bound below which none was found.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum AnomalyEntry {
    Found {
        omega_over_sigma: f64,
        gamma0: f64,
        /// F₀/σ = Γ₀ ω/σ.
        force: f64,
    },
    NotFound {
        omega_over_sigma: f64,
        gamma_max: f64,
    },
}

impl AnomalyEntry {
    pub fn omega_over_sigma(&self) -> f64 {
        match self {
            Self::Found { omega_over_sigma, .. } | Self::NotFound { omega_over_sigma, .. } => *omega_over_sigma,
        }
    }

    pub fn gamma0(&self) -> Option<f64> {
        match self {
            Self::Found { gamma0, .. } => Some(*gamma0),
            Self::NotFound { .. } => None,
        }
    }
}

/// Γ₀(ω/σ) for the sinusoidal drive, scanning Γ ∈ [0, gamma_max] with the
/// given step at each operating point.
pub fn anomaly_curve(
    omega_over_sigma: &[f64],
    gamma_max: f64,
    step: f64,
    execution: Execution,
) -> Result<Vec<AnomalyEntry>> {
    if omega_over_sigma.is_empty() {
        return Err(Error::InvalidArgument("anomaly curve needs at least one omega/sigma".into()));
    }
    let options = SearchOptions { execution, ..SearchOptions::default() };
    omega_over_sigma
        .iter()
        .map(|&w| {
            let family = DriveFamily::sinusoidal(w)?;
            let points = floquet::find_dl_points(&family, gamma_max, step, &options)?;
            Ok(match points.first() {
                Some(p) => AnomalyEntry::Found {
                    omega_over_sigma: w,
                    gamma0: p.gamma0,
                    force: p.gamma0 * w,
                },
                None => AnomalyEntry::NotFound { omega_over_sigma: w, gamma_max },
            })
        })
        .collect()
}

/// A return of the fidelity to this level after dropping below it counts
/// as a revival.
pub const REVIVAL_LEVEL: f64 = 0.9;

/// Where a revival-fidelity sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleSource {
    Lattice,
    /// |c₀|² = 1/|α|² of the pseudo-Glauber-Fock edge start, used once the
    /// wave packet outruns the largest lattice.
    ClosedForm,
}

/// Revival fidelity of a dc-driven lattice against the initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochStudy {
    pub f0: f64,
    pub sigma: f64,
    pub phase: PtPhase,
    pub analytic_period: Option<f64>,
    /// First revival peak after the fidelity has dropped below
    /// [`REVIVAL_LEVEL`], refined by a parabola through the three samples
    /// around it.
    pub measured_period: Option<f64>,
    /// Largest fidelity after the first drop below [`REVIVAL_LEVEL`].
    pub max_revival: Option<f64>,
    pub times: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub source: Vec<SampleSource>,
    pub truncation: usize,
    /// Largest |lattice − closed form| on the samples where both exist.
    pub closed_form_deviation: Option<f64>,
}

impl BlochStudy {
    pub fn relative_period_error(&self) -> Option<f64> {
        Some((self.measured_period? - self.analytic_period?).abs() / self.analytic_period?)
    }
}

fn parabola_vertex(t: [f64; 3], f: [f64; 3]) -> f64 {
    let h = t[1] - t[0];
    let denom = f[0] - 2.0 * f[1] + f[2];
    if denom == 0.0 {
        return t[1];
    }
    t[1] + 0.5 * h * (f[0] - f[2]) / denom
}

fn revival_peaks(times: &[f64], fidelity: &[f64]) -> (Option<f64>, Option<f64>) {
    let Some(start) = fidelity.iter().position(|&f| f < REVIVAL_LEVEL) else {
        return (None, None);
    };
    let max_revival = fidelity[start..].iter().copied().fold(0.0, f64::max);
    let peak = (start.max(1)..fidelity.len().saturating_sub(1))
        .find(|&k| fidelity[k] >= fidelity[k - 1] && fidelity[k] > fidelity[k + 1] && fidelity[k] >= REVIVAL_LEVEL)
        .map(|k| {
            parabola_vertex(
                [times[k - 1], times[k], times[k + 1]],
                [fidelity[k - 1], fidelity[k], fidelity[k + 1]],
            )
        });
    (peak, Some(max_revival))
}

/// Evolve a single-site excitation (edge for semi-infinite lattices, centre
/// otherwise) under the dc force `f0` and sample its revival fidelity at
/// `samples + 1` uniform times on [0, t_end].
///
/// For the pseudo-Glauber-Fock edge start the run continues with the
/// closed-form return probability once even the largest automatic
/// truncation is exceeded; other lattices report the truncation failure.
pub fn bloch_study(
    lattice: &LatticeSpec,
    f0: f64,
    t_end: f64,
    samples: usize,
    settings: &IntegratorSettings,
) -> Result<BlochStudy> {
    if !(t_end > 0.0) || samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "bloch study needs t_end > 0 and at least 2 samples, got {t_end}, {samples}"
        )));
    }
    let sigma = lattice.sigma();
    let drive = DriveSpec::dc(f0)?;
    let times: Vec<f64> = (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect();
    let site = if lattice.law().is_semi_infinite() { 0 } else { lattice.truncation() / 2 };
    let initial = InitialState::Site(site);
    let closed_form_ok = site == 0 && *lattice.law() == HoppingLaw::PseudoGlauberFock;
    let closed = |t: f64| 1.0 / analytic::dc_evolution_coefficients(f0, sigma, t).0.norm_sqr();

    let (used, traj) = match lattice::evolve_auto_at(lattice, &drive, &initial, &times, settings) {
        Ok(run) => run,
        Err(Error::TruncationInsufficient { truncation, time, .. }) if closed_form_ok => {
            let horizon: Vec<f64> = times.iter().copied().take_while(|&t| t < time).collect();
            let largest = lattice.with_truncation(truncation)?;
            let traj = lattice::evolve_at(&largest, &drive, &initial.amplitudes(truncation)?, &horizon, settings)?;
            (largest, traj)
        }
        Err(e) => return Err(e),
    };
    let reference = traj.probabilities(0);
    let mut fidelity: Vec<f64> = (0..traj.len())
        .map(|k| lattice::occupation_fidelity(&reference, &traj.probabilities(k)))
        .collect();
    let mut source = vec![SampleSource::Lattice; fidelity.len()];
    let closed_form_deviation = closed_form_ok.then(|| {
        traj.times
            .iter()
            .zip(&fidelity)
            .map(|(&t, f)| (f - closed(t)).abs())
            .fold(0.0, f64::max)
    });
    for &t in &times[fidelity.len()..] {
        fidelity.push(closed(t));
        source.push(SampleSource::ClosedForm);
    }
    let (measured_period, max_revival) = revival_peaks(&times, &fidelity);
    Ok(BlochStudy {
        f0,
        sigma,
        phase: analytic::pt_phase(f0, sigma),
        analytic_period: analytic::bloch_period(f0, sigma).ok(),
        measured_period,
        max_revival,
        times,
        fidelity,
        source,
        truncation: used.truncation(),
        closed_form_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_range_gives_one_sample() {
        let plan = SweepPlan::new(vec![1.0, 5.0], GammaRange::new(2.0, 2.0, 0.1).unwrap()).unwrap();
        let result = run_quasi_energy_sweep(&plan).unwrap();
        for p in &result.points {
            assert_eq!(p.samples.len(), 1);
            assert!(p.dl_points.is_empty());
        }
    }

    #[test]
    fn single_point_finds_reference_crossing() {
        let plan = SweepPlan::new(vec![1.0], GammaRange::new(0.0, 4.0, 0.01).unwrap()).unwrap();
        let result = run_quasi_energy_sweep(&plan).unwrap();
        let p = &result.points[0];
        assert_eq!(p.grid.len(), p.samples.len());
        assert!((p.dl_points[0].gamma0 - 3.353).abs() <= 0.005);
    }

    #[test]
    fn curves_start_imaginary() {
        let plan = SweepPlan::new(vec![5.0, 1.0, 0.4, 0.2], GammaRange::new(0.0, 8.0, 0.05).unwrap()).unwrap();
        let result = run_quasi_energy_sweep(&plan).unwrap();
        for p in &result.points {
            assert!(p.error.is_none());
            assert!(p.samples[0].mu1.im > 0.0);
            assert!(p.dl_points.windows(2).all(|w| w[0].gamma0 < w[1].gamma0));
        }
    }

    #[test]
    fn failures_are_reported_per_point() {
        let mut plan = SweepPlan::new(vec![1.0, 2.0], GammaRange::new(0.0, 1.0, 0.5).unwrap()).unwrap();
        plan.waveform = Waveform::CustomSamples { samples: vec![1.0, 1.0] };
        let result = run_quasi_energy_sweep(&plan).unwrap();
        assert_eq!(result.errors().count(), 2);
    }

    #[test]
    fn parallel_and_serial_agree_bitwise() {
        let mut plan = SweepPlan::new(vec![1.0, 0.4], GammaRange::new(0.0, 7.0, 0.05).unwrap()).unwrap();
        plan.wkb_overlay = true;
        let parallel = run_quasi_energy_sweep(&plan).unwrap();
        plan.execution = Execution::Serial;
        let serial = run_quasi_energy_sweep(&plan).unwrap();
        assert_eq!(parallel.points, serial.points);
        assert_eq!(run_quasi_energy_sweep(&plan).unwrap().points, serial.points);
    }

    #[test]
    fn wkb_overlay_tracks_exact_at_low_frequency() {
        let mut plan = SweepPlan::new(vec![0.2], GammaRange::new(0.0, 9.9, 0.1).unwrap()).unwrap();
        plan.wkb_overlay = true;
        let result = run_quasi_energy_sweep(&plan).unwrap();
        let dev = result.points[0].wkb_max_relative_deviation().unwrap();
        assert!(dev <= 0.05, "{dev}");
    }

    #[test]
    fn anomaly_reference_points() {
        let curve = anomaly_curve(&[5.0, 1.0], 8.0, 0.05, Execution::Parallel).unwrap();
        assert!((curve[0].gamma0().unwrap() - 2.405).abs() <= 0.1);
        assert!((curve[1].gamma0().unwrap() - 3.353).abs() <= 0.005);
        let none = anomaly_curve(&[0.2], 5.0, 0.05, Execution::Parallel).unwrap();
        assert_eq!(none[0], AnomalyEntry::NotFound { omega_over_sigma: 0.2, gamma_max: 5.0 });
    }

    #[test]
    fn plan_validation() {
        assert!(SweepPlan::new(vec![], GammaRange::default()).is_err());
        assert!(SweepPlan::new(vec![-1.0], GammaRange::default()).is_err());
        assert!(GammaRange::new(0.0, 1.0, 0.0).is_err());
        assert!(GammaRange::new(2.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn bloch_peak_matches_period() {
        let lat = LatticeSpec::pseudo_glauber_fock(1.0, 64).unwrap();
        for f0 in [3.0, 4.0, 6.0] {
            let tb = analytic::bloch_period(f0, 1.0).unwrap();
            let study = bloch_study(&lat, f0, 1.5 * tb, 300, &IntegratorSettings::default()).unwrap();
            assert!(study.relative_period_error().unwrap() < 1e-3, "{f0}: {:?}", study.measured_period);
            assert!(study.closed_form_deviation.unwrap() < 1e-7);
        }
    }

    #[test]
    fn broken_phase_continues_in_closed_form() {
        let lat = LatticeSpec::pseudo_glauber_fock(1.0, 128).unwrap();
        let study = bloch_study(&lat, 1.5, 20.0, 400, &IntegratorSettings::default()).unwrap();
        assert!(study.source.contains(&SampleSource::ClosedForm));
        assert!(study.closed_form_deviation.unwrap() < 1e-7);
        assert!(study.max_revival.unwrap() < 0.9);
        assert!(study.measured_period.is_none());
    }

    #[test]
    fn homogeneous_truncation_failure_propagates() {
        let lat = LatticeSpec::homogeneous(1.0, 8).unwrap();
        let err = bloch_study(&lat, 0.1, 200.0, 10, &IntegratorSettings::default()).unwrap_err();
        assert!(matches!(err, Error::TruncationInsufficient { .. }));
    }
}
