// SPDX-License-Identifier: Apache-2.0

//! The acceptance battery: each criterion runs at its stated tolerance and
//! wall-clock limit and reports what it measured.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::analytic::{self, bessel_j0, gf_heisenberg_coefficient, j0_roots};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::floquet::{self, DriveFamily, SearchOptions};
use crate::lattice::{self, InitialState, IntegratorSettings};
use crate::sweeps::{self, AnomalyEntry, GammaRange, SweepPlan};
use crate::types::{Degeneracy, DriveSpec, HoppingLaw, LatticeSpec};

/// Γ used for the lattice localization checks.
pub const LATTICE_GAMMA: f64 = 2.404826;
/// Γ of the pseudo-Glauber-Fock reference run.
pub const EDGE_GAMMA: f64 = 3.353;
const SEED: u64 = 0x5eed;

fn seconds<S: Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    /// Measured values within tolerance and runtime within its limit.
    pub passed: bool,
    pub within_tolerance: bool,
    pub detail: String,
    #[serde(serialize_with = "seconds")]
    pub elapsed: Duration,
    pub limit_seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {:<34} {:>7.2}s / {:>4.0}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.limit_seconds,
            self.detail
        )
    }
}

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub limit_seconds: f64,
    check: fn() -> Result<(bool, String)>,
}

pub const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, title: "homogeneous lattice localization", limit_seconds: 10.0, check: homogeneous_dl },
    Criterion { id: 2, title: "Glauber-Fock lattice localization", limit_seconds: 30.0, check: glauber_fock_dl },
    Criterion { id: 3, title: "pseudo-Glauber-Fock edge revivals", limit_seconds: 60.0, check: edge_revivals },
    Criterion { id: 4, title: "first crossings at omega/sigma 1, 5", limit_seconds: 60.0, check: reference_crossings },
    Criterion { id: 5, title: "low-frequency anomaly", limit_seconds: 300.0, check: anomaly },
    Criterion { id: 6, title: "WKB agreement at omega/sigma 0.2", limit_seconds: 60.0, check: wkb_agreement },
    Criterion { id: 7, title: "Floquet invariants", limit_seconds: 120.0, check: floquet_invariants },
    Criterion { id: 8, title: "dc Bloch period and broken phase", limit_seconds: 120.0, check: bloch },
    Criterion { id: 9, title: "static eigendecomposition oracle", limit_seconds: 60.0, check: static_oracle },
    Criterion { id: 10, title: "quadrature identity", limit_seconds: 5.0, check: quadrature_identity },
];

pub fn run(criterion: &Criterion) -> CriterionReport {
    let start = Instant::now();
    let outcome = (criterion.check)();
    let elapsed = start.elapsed();
    let (within_tolerance, detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionReport {
        id: criterion.id,
        title: criterion.title,
        passed: within_tolerance && elapsed.as_secs_f64() <= criterion.limit_seconds,
        within_tolerance,
        detail,
        elapsed,
        limit_seconds: criterion.limit_seconds,
    }
}

pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().map(run).collect()
}

pub fn run_one(id: u8) -> Option<CriterionReport> {
    CRITERIA.iter().find(|c| c.id == id).map(run)
}

fn one_period_fidelity(lattice: &LatticeSpec, site: usize, auto: bool) -> Result<(f64, usize)> {
    let drive = DriveSpec::from_gamma(crate::types::Waveform::Sinusoidal, LATTICE_GAMMA, 1.0)?;
    let period = TAU;
    let settings = IntegratorSettings::default();
    let (used, traj) = if auto {
        lattice::evolve_auto(lattice, &drive, &InitialState::Site(site), period, &settings)?
    } else {
        let init = lattice::single_site(site, lattice.truncation());
        (lattice.clone(), lattice::evolve(lattice, &drive, &init, period, &settings)?)
    };
    Ok((lattice::revival_fidelity(&traj, period, 1)?[0], used.truncation()))
}

fn homogeneous_dl() -> Result<(bool, String)> {
    let lat = LatticeSpec::homogeneous(1.0, 128)?;
    let (f, _) = one_period_fidelity(&lat, 64, false)?;
    Ok((f >= 0.999, format!("fidelity(T) = {f:.6} (>= 0.999)")))
}

fn glauber_fock_dl() -> Result<(bool, String)> {
    let lat = LatticeSpec::glauber_fock(1.0, lattice::DEFAULT_TRUNCATION)?;
    let (f, n) = one_period_fidelity(&lat, 0, true)?;
    // the displacement vanishes only at the exact root; the rounded Γ leaves J₀ ≈ 2e-7
    let root = j0_roots(1)?[0];
    let exact = DriveSpec::sinusoidal(root, 1.0)?;
    let (_, d) = gf_heisenberg_coefficient(&exact, 1.0, TAU)?;
    let rounded = DriveSpec::sinusoidal(LATTICE_GAMMA, 1.0)?;
    let (_, d_rounded) = gf_heisenberg_coefficient(&rounded, 1.0, TAU)?;
    let bound = 1e-8 * TAU;
    Ok((
        f >= 0.99 && d.norm() <= bound,
        format!(
            "fidelity(T) = {f:.6} (>= 0.99, N = {n}); |d(T)| = {:.2e} at the exact root (<= {bound:.2e}), {:.2e} at {LATTICE_GAMMA}",
            d.norm(),
            d_rounded.norm()
        ),
    ))
}

fn edge_revivals() -> Result<(bool, String)> {
    let lat = LatticeSpec::pseudo_glauber_fock(1.0, lattice::DEFAULT_TRUNCATION)?;
    let drive = DriveSpec::from_gamma(crate::types::Waveform::Sinusoidal, EDGE_GAMMA, 1.0)?;
    let settings = IntegratorSettings { snapshot_stride: 32, ..IntegratorSettings::default() };
    let (used, traj) = lattice::evolve_auto(&lat, &drive, &InitialState::Site(0), 3.0 * TAU, &settings)?;
    let per = settings.snapshot_stride;
    let edge: Vec<f64> = (1..=3).map(|l| traj.states[l * per][0].norm_sqr()).collect();
    // breathing: the packet leaves the edge within every period and returns
    let mean_site = |k: usize| -> f64 { traj.probabilities(k).iter().enumerate().map(|(n, p)| n as f64 * p).sum() };
    let breathing = (1..=3).all(|l| {
        let peak = ((l - 1) * per..l * per).map(mean_site).fold(0.0, f64::max);
        peak >= 1.0 && mean_site(l * per) <= 0.05 * peak
    });
    let ok = edge.iter().all(|&p| p >= 0.98) && breathing;
    Ok((
        ok,
        format!(
            "|c0(lT)|^2 = {:.5}, {:.5}, {:.5} (>= 0.98, N = {}); breathing with period T: {breathing}",
            edge[0],
            edge[1],
            edge[2],
            used.truncation()
        ),
    ))
}

fn first_crossing(omega_over_sigma: f64, gamma_max: f64) -> Result<(Option<f64>, Duration)> {
    let start = Instant::now();
    let family = DriveFamily::sinusoidal(omega_over_sigma)?;
    let points = floquet::find_dl_points(&family, gamma_max, 0.01, &SearchOptions::default())?;
    Ok((points.first().map(|p| p.gamma0), start.elapsed()))
}

fn reference_crossings() -> Result<(bool, String)> {
    let (g1, t1) = first_crossing(1.0, 6.0)?;
    let (g5, t5) = first_crossing(5.0, 6.0)?;
    let ok1 = g1.is_some_and(|g| (g - 3.353).abs() <= 0.005);
    let ok5 = g5.is_some_and(|g| (g - 2.405).abs() <= 0.1);
    let fast = t1.as_secs_f64() <= 30.0 && t5.as_secs_f64() <= 30.0;
    Ok((
        ok1 && ok5 && fast,
        format!(
            "Gamma0(1) = {g1:.5?} (3.353 +- 0.005, {:.1}s); Gamma0(5) = {g5:.5?} (2.405 +- 0.1, {:.1}s)",
            t1.as_secs_f64(),
            t5.as_secs_f64()
        ),
    ))
}

fn anomaly() -> Result<(bool, String)> {
    let points = [5.0, 1.0, 0.4, 0.2];
    let curve = sweeps::anomaly_curve(&points, 16.0, 0.01, Execution::Parallel)?;
    let gammas: Vec<Option<f64>> = curve.iter().map(AnomalyEntry::gamma0).collect();
    let all_found = gammas.iter().all(Option::is_some);
    let monotone = gammas.windows(2).all(|w| matches!(w, [Some(a), Some(b)] if a <= b));
    let forces_ok = curve.iter().filter(|e| e.omega_over_sigma() < 0.5).all(|e| match e {
        AnomalyEntry::Found { force, .. } => *force >= 1.9,
        AnomalyEntry::NotFound { .. } => true,
    });
    let listing: Vec<String> = curve
        .iter()
        .map(|e| match e {
            AnomalyEntry::Found { omega_over_sigma, gamma0, force } => {
                format!("{omega_over_sigma}: Gamma0 = {gamma0:.4}, F0 = {force:.3}")
            }
            AnomalyEntry::NotFound { omega_over_sigma, gamma_max } => {
                format!("{omega_over_sigma}: none below {gamma_max}")
            }
        })
        .collect();
    Ok((
        all_found && monotone && forces_ok,
        format!("{}; nonincreasing in omega: {monotone}; F0 >= 1.9 at low omega: {forces_ok}", listing.join(", ")),
    ))
}

fn wkb_agreement() -> Result<(bool, String)> {
    // F₀ < 2σ at ω/σ = 0.2 means Γ < 10
    let mut plan = SweepPlan::new(vec![0.2], GammaRange::new(0.0, 9.99, 0.01)?)?;
    plan.wkb_overlay = true;
    let result = sweeps::run_quasi_energy_sweep(&plan)?;
    let point = &result.points[0];
    if let Some(e) = &point.error {
        return Ok((false, format!("sweep failed: {e}")));
    }
    let count = point.wkb.as_ref().map_or(0, Vec::len);
    let dev = point.wkb_max_relative_deviation().unwrap_or(f64::INFINITY);
    Ok((dev <= 0.05, format!("max relative deviation {dev:.4} over {count} points (<= 0.05)")))
}

fn floquet_invariants() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let settings = floquet::monodromy_settings();
    let mut worst_det: f64 = 0.0;
    let mut worst_pair: f64 = 0.0;
    for _ in 0..500 {
        let w = 10f64.powf(rng.gen_range(0.2f64.log10()..20f64.log10()));
        let gamma = rng.gen_range(0.0..12.0);
        let family = DriveFamily::sinusoidal(w)?;
        let m = family.monodromy(gamma, &settings)?;
        worst_det = worst_det.max(m.det_residual);
        let q = floquet::quasi_energies(&m, family.omega)?;
        // μ₂ = −μ₁ holds modulo ω (on the branch edge Re μ = ω/2 maps to itself)
        let sum = q.mu1 + q.mu2;
        let k = (sum.re / family.omega).round();
        let pair = (sum - Complex64::new(k * family.omega, 0.0)).norm();
        if q.degeneracy == Degeneracy::None {
            worst_pair = worst_pair.max(pair);
        }
    }
    Ok((
        worst_det <= 1e-10 && worst_pair <= 1e-8,
        format!("max det residual {worst_det:.2e} (<= 1e-10); max |mu1 + mu2| mod omega {worst_pair:.2e} (<= 1e-8)"),
    ))
}

fn bloch() -> Result<(bool, String)> {
    let lat = LatticeSpec::pseudo_glauber_fock(1.0, lattice::DEFAULT_TRUNCATION)?;
    let settings = IntegratorSettings::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for f0 in [3.0, 4.0, 6.0] {
        let tb = analytic::bloch_period(f0, 1.0)?;
        let study = sweeps::bloch_study(&lat, f0, 1.5 * tb, 300, &settings)?;
        let err = study.relative_period_error().unwrap_or(f64::INFINITY);
        ok &= err <= 0.01;
        parts.push(format!("F0 = {f0}: peak error {:.1e}", err));
    }
    let broken = sweeps::bloch_study(&lat, 1.5, 20.0, 2000, &settings)?;
    let max_revival = broken.max_revival;
    let lattice_until = broken
        .source
        .iter()
        .rposition(|s| *s == sweeps::SampleSource::Lattice)
        .map_or(0.0, |k| broken.times[k]);
    ok &= max_revival.is_some_and(|f| f < 0.9);
    let sci = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.2e}"));
    parts.push(format!(
        "F0 = 1.5: max revival {} (< 0.9), lattice to t = {lattice_until:.2} (N = {}), closed form beyond, overlap deviation {}",
        sci(max_revival),
        broken.truncation,
        sci(broken.closed_form_deviation)
    ));
    Ok((ok, parts.join("; ")))
}

/// c(t) = V e^{−iEt} Vᵀ c(0) for the static Hamiltonian −κ (off-diagonal)
/// + nF (diagonal).
pub fn eigen_propagate(lattice: &LatticeSpec, force: f64, initial: &[Complex64], t: f64) -> Vec<Complex64> {
    let n = lattice.truncation();
    let hops = lattice.hops();
    let h = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            i as f64 * force
        } else if j == i + 1 {
            -hops[j]
        } else if i == j + 1 {
            -hops[i]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(h);
    let v = &eig.eigenvectors;
    let coeffs: Vec<Complex64> = (0..n)
        .map(|k| {
            let overlap: Complex64 = (0..n).map(|j| initial[j] * v[(j, k)]).sum();
            overlap * Complex64::from_polar(1.0, -eig.eigenvalues[k] * t)
        })
        .collect();
    (0..n).map(|i| (0..n).map(|k| coeffs[k] * v[(i, k)]).sum()).collect()
}

fn static_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let settings = IntegratorSettings::default();
    let mut worst: f64 = 0.0;
    let mut accepted = 0;
    let mut rejected = 0;
    while accepted < 20 {
        let law = match rng.gen_range(0..3) {
            0 => HoppingLaw::Homogeneous,
            1 => HoppingLaw::GlauberFock,
            _ => HoppingLaw::PseudoGlauberFock,
        };
        let n = rng.gen_range(24..=32);
        let sigma = rng.gen_range(0.2..0.7);
        let f0 = rng.gen_range(0.0..3.0);
        let t_end = rng.gen_range(0.5..2.0);
        let lat = LatticeSpec::new(law, sigma, n)?;
        let first = if lat.law().is_semi_infinite() { 0 } else { n / 2 - 1 };
        let mut init = vec![Complex64::new(0.0, 0.0); n];
        for c in &mut init[first..first + 3] {
            *c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let norm = init.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        init.iter_mut().for_each(|c| *c /= norm);
        let drive = DriveSpec::dc(f0)?;
        // draws that reach the far boundary violate evolve's precondition
        let traj = match lattice::evolve(&lat, &drive, &init, t_end, &settings) {
            Err(Error::TruncationInsufficient { .. }) => {
                rejected += 1;
                continue;
            }
            other => other?,
        };
        accepted += 1;
        for (t, state) in traj.times.iter().zip(&traj.states) {
            let exact = eigen_propagate(&lat, f0, &init, *t);
            for (a, b) in state.iter().zip(&exact) {
                worst = worst.max((a - b).norm());
            }
        }
    }
    Ok((worst <= 1e-8, format!("max amplitude deviation {worst:.2e} over 20 configurations (<= 1e-8); {rejected} draws redrawn for boundary contact")))
}

fn quadrature_identity() -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for gamma in [0.0, 1.0, 2.405, 5.52, 8.0] {
        let drive = DriveSpec::sinusoidal(gamma, 1.0)?;
        let value = lattice::dl_integral_condition(&drive)? / TAU;
        worst = worst.max((value - bessel_j0(gamma)).norm());
    }
    Ok((worst <= 1e-9, format!("max |(1/T) integral - J0| {worst:.2e} (<= 1e-9)")))
}
