// SPDX-License-Identifier: Apache-2.0

//! Closed-form references that do not go through the time integrators:
//! the Bessel function J₀ and its zeros, the adiabatic (WKB) quasi-energy,
//! the dc-force propagator of the 2×2 operator system, the Bloch period,
//! the PT-phase classification and the Glauber-Fock displacement.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;
use crate::roots;
use crate::types::{DriveSpec, Waveform};

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Bessel function of the first kind, order zero.
///
/// Power series for |x| ≤ 8, Miller backward recurrence on (8, 25] and the
/// Hankel asymptotic expansion beyond; absolute error below 1e-13 throughout.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= SERIES_LIMIT {
        j0_series(ax)
    } else if ax <= ASYMPTOTIC_LIMIT {
        j0_miller(ax)
    } else {
        j0_asymptotic(ax)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

/// Backward recurrence J_{k-1} = (2k/x) J_k - J_{k+1}, normalized with
/// 1 = J₀ + 2 Σ J_{2k}.
fn j0_miller(x: f64) -> f64 {
    let mut start = (x as usize) + 40;
    if start % 2 == 1 {
        start += 1;
    }
    let mut next = 0.0; // J_{k+1}
    let mut current = 1e-300; // J_k
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * current - next;
        next = current;
        current = prev;
        // current now holds J_{k-1}
        if (k - 1) % 2 == 0 && k > 1 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
        }
    }
    current / (norm + current)
}

fn j0_asymptotic(x: f64) -> f64 {
    // t_k = Π_{j≤k} (-(2j-1)²) / (k! (8x)^k)
    let z = 8.0 * x;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        let next = term * (-odd * odd) / (k as f64 * z);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// The first `count` positive zeros of J₀, each with |J₀| ≤ 1e-10.
pub fn j0_roots(count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("need at least one root".into()));
    }
    (1..=count)
        .map(|m| {
            // McMahon's leading term lies within 0.05 of the zero
            let guess = (m as f64 - 0.25) * PI;
            let root = roots::brent(|x| Ok(bessel_j0(x)), guess - 0.3, guess + 0.3, 1e-15, 200)?;
            if bessel_j0(root).abs() > 1e-10 {
                return Err(Error::Accuracy(format!("J0 root {m} not converged")));
            }
            Ok(root)
        })
        .collect()
}

/// Adiabatic quasi-energies μ₁,₂ = ±(1/T) ∫₀ᵀ √(F²/4 − σ²) dt, valid when
/// |F(t)| < 2σ over the whole cycle. μ₁ is the root with Im μ ≥ 0.
pub fn wkb_quasi_energy(drive: &DriveSpec, sigma: f64) -> Result<(Complex64, Complex64)> {
    let period = drive.period().ok_or(Error::NotPeriodic)?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if let Some(time) = first_turning_point(drive, sigma) {
        return Err(Error::TurningPoint {
            time,
            force: drive.value(time).abs(),
        });
    }
    let integral = quad::integrate_real(
        |t| {
            let f = 0.5 * drive.value(t);
            (sigma * sigma - f * f).max(0.0).sqrt()
        },
        0.0,
        period,
        &drive.breakpoints(),
        1e-12 * period * sigma,
    )?;
    let mu1 = Complex64::new(0.0, integral / period);
    Ok((mu1, -mu1))
}

/// Earliest t in [0, T) with |F(t)| ≥ 2σ, if any.
fn first_turning_point(drive: &DriveSpec, sigma: f64) -> Option<f64> {
    let threshold = 2.0 * sigma;
    let f0 = drive.f0();
    match drive.waveform() {
        Waveform::Dc => (f0 >= threshold).then_some(0.0),
        Waveform::SquareWave => (f0 >= threshold).then_some(0.0),
        Waveform::Sinusoidal => {
            (f0 >= threshold).then(|| (threshold / f0).clamp(-1.0, 1.0).acos() / drive.omega())
        }
        Waveform::CustomSamples { samples } => {
            let period = drive.period()?;
            let m = samples.len();
            // piecewise linear: extrema sit on the nodes
            samples
                .iter()
                .position(|s| (f0 * s).abs() >= threshold)
                .map(|i| period * i as f64 / m as f64)
        }
    }
}

/// PT phase of the constant-force 2×2 system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// F₀ < 2σ: complex-conjugate eigenvalues ±λ, λ imaginary.
    Broken,
    /// F₀ > 2σ: real eigenvalues.
    Unbroken,
    /// F₀ = 2σ: coalescing eigenvalues, λ = 0.
    Exceptional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PtPhase {
    pub phase: Phase,
    /// λ = √((F₀/2)² − σ²), with λ = i|λ| in the broken phase.
    pub lambda: Complex64,
}

/// λ² = (F₀/2)² − σ².
fn lambda_squared(f0: f64, sigma: f64) -> f64 {
    (0.5 * f0 - sigma) * (0.5 * f0 + sigma)
}

fn lambda_of(lambda_sq: f64) -> Complex64 {
    if lambda_sq >= 0.0 {
        Complex64::new(lambda_sq.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-lambda_sq).sqrt())
    }
}

/// Classify (F₀, σ) relative to the exceptional point F₀ = 2σ.
pub fn pt_phase(f0: f64, sigma: f64) -> PtPhase {
    let threshold = 2.0 * sigma;
    let phase = if (f0 - threshold).abs() <= 1e-12 * threshold {
        Phase::Exceptional
    } else if f0 < threshold {
        Phase::Broken
    } else {
        Phase::Unbroken
    };
    let lambda = match phase {
        Phase::Exceptional => Complex64::new(0.0, 0.0),
        _ => lambda_of(lambda_squared(f0, sigma)),
    };
    PtPhase { phase, lambda }
}

/// Heisenberg coefficients (α, β) of â_h(t) = α â + β b̂† for a constant
/// force on the pseudo-Glauber-Fock lattice:
/// α = cos λt − i (F₀/2λ) sin λt,  β = i (σ/λ) sin λt.
pub fn dc_evolution_coefficients(f0: f64, sigma: f64, t: f64) -> (Complex64, Complex64) {
    let lsq = lambda_squared(f0, sigma);
    let s = lsq * t * t;
    // cosine and sin(λt)/λ are entire in λ²; series near the exceptional point
    let (cos_part, sinc_part) = if s.abs() < 1e-2 {
        let mut c = 0.0;
        let mut sn = 0.0;
        let mut term = 1.0;
        for k in 0..10 {
            let c_den = (2 * k + 1) as f64;
            c += term;
            sn += term / c_den;
            term *= -s / (c_den * (2 * k + 2) as f64);
        }
        (c, sn * t)
    } else if lsq > 0.0 {
        let l = lsq.sqrt();
        ((l * t).cos(), (l * t).sin() / l)
    } else {
        let k = (-lsq).sqrt();
        ((k * t).cosh(), (k * t).sinh() / k)
    };
    let alpha = Complex64::new(cos_part, -0.5 * f0 * sinc_part);
    let beta = Complex64::new(0.0, sigma * sinc_part);
    (alpha, beta)
}

/// Bloch period T_B = π/√((F₀/2)² − σ²) of the pseudo-Glauber-Fock lattice.
pub fn bloch_period(f0: f64, sigma: f64) -> Result<f64> {
    match pt_phase(f0, sigma).phase {
        Phase::Unbroken => Ok(PI / lambda_squared(f0, sigma).sqrt()),
        _ => Err(Error::InvalidArgument(format!(
            "no Bloch period for F0 = {f0} <= 2 sigma = {}",
            2.0 * sigma
        ))),
    }
}

/// Glauber-Fock Heisenberg solution â_h(t) = e^{-iφ(t)} (â + d(t)):
/// returns the phase factor e^{-iφ(t)} and the displacement
/// d(t) = iσ ∫₀ᵗ e^{iφ(t')} dt'.
pub fn gf_heisenberg_coefficient(
    drive: &DriveSpec,
    sigma: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("t must be nonnegative, got {t}")));
    }
    let phase_factor = Complex64::new(0.0, -drive.phase(t)).exp();
    if sigma == 0.0 || t == 0.0 {
        return Ok((phase_factor, Complex64::new(0.0, 0.0)));
    }
    let breaks = breakpoints_up_to(drive, t);
    let integral = quad::integrate_with_breaks(
        |s| Complex64::new(0.0, drive.phase(s)).exp(),
        0.0,
        t,
        &breaks,
        1e-13 * t.max(1.0),
    )?;
    Ok((phase_factor, Complex64::new(0.0, sigma) * integral.value))
}

/// Non-smooth points of the drive in (0, t), across all periods.
pub(crate) fn breakpoints_up_to(drive: &DriveSpec, t: f64) -> Vec<f64> {
    let Some(period) = drive.period() else {
        return Vec::new();
    };
    let base = drive.breakpoints();
    let cycles = (t / period).ceil() as usize;
    let mut out = Vec::new();
    for l in 0..=cycles {
        let offset = l as f64 * period;
        if l > 0 && offset < t {
            out.push(offset);
        }
        out.extend(base.iter().map(|b| b + offset).filter(|&b| b < t));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // scipy.special.j0 (Cephes) reference values
    const J0_TABLE: [(f64, f64); 14] = [
        (0.5, 0.938469807240813),
        (1.0, 0.7651976865579665),
        (2.404825557695773, -9.586882554916807e-17),
        (5.0, -0.1775967713143383),
        (7.9, 0.1943618448412782),
        (8.1, 0.14751745404437763),
        (10.0, -0.24593576445134832),
        (12.0, 0.04768931079683335),
        (20.0, 0.16702466434058322),
        (24.9, 0.08324596835301536),
        (25.1, 0.10827567149994938),
        (30.0, -0.08636798358104031),
        (50.0, 0.055812327669252086),
        (100.0, 0.01998585030422333),
    ];

    #[test]
    fn j0_matches_reference_table() {
        assert_eq!(bessel_j0(0.0), 1.0);
        for (x, expected) in J0_TABLE {
            let got = bessel_j0(x);
            assert!((got - expected).abs() < 1e-13, "J0({x}) = {got}, expected {expected}");
            assert_eq!(bessel_j0(-x), got);
        }
        assert!(bessel_j0(2.404826).abs() <= 1e-6);
    }

    #[test]
    fn j0_methods_agree_at_switch_points() {
        for x in [6.0, 7.5, SERIES_LIMIT] {
            assert!((j0_series(x) - j0_miller(x)).abs() < 1e-13, "x={x}");
        }
        for x in [20.0, ASYMPTOTIC_LIMIT, 30.0] {
            assert!((j0_asymptotic(x) - j0_miller(x)).abs() < 1e-13, "x={x}");
        }
    }

    #[test]
    fn j0_roots_known() {
        let r = j0_roots(6).unwrap();
        let expected = [
            2.4048255576957724,
            5.520078110286311,
            8.653727912911013,
            11.791534439014281,
            14.930917708487787,
            18.071063967910924,
        ];
        for (got, want) in r.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            assert!(bessel_j0(*got).abs() <= 1e-10);
        }
        assert!((r[0] - 2.404826).abs() < 1e-6);
        assert!((r[1] - 5.5201).abs() < 1e-4);
        for w in r.windows(2) {
            assert!(w[1] > w[0]);
        }
        let far = j0_roots(40).unwrap();
        assert!((far[39] - far[38] - PI).abs() < 1e-3);
        assert!(j0_roots(0).is_err());
    }

    #[test]
    fn wkb_static_limit() {
        let d = DriveSpec::sinusoidal(0.0, 0.7).unwrap();
        let (m1, m2) = wkb_quasi_energy(&d, 1.3).unwrap();
        assert!((m1 - Complex64::new(0.0, 1.3)).norm() < 1e-12);
        assert_eq!(m2, -m1);
    }

    #[test]
    fn wkb_below_threshold_is_imaginary_and_reduced() {
        let d = DriveSpec::sinusoidal(2.0 - 1e-3, 0.2).unwrap();
        let (m1, _) = wkb_quasi_energy(&d, 1.0).unwrap();
        assert_eq!(m1.re, 0.0);
        assert!(m1.im > 0.0 && m1.im < 1.0);
    }

    #[test]
    fn wkb_rejects_turning_points() {
        let d = DriveSpec::sinusoidal(3.0, 1.0).unwrap();
        match wkb_quasi_energy(&d, 1.0) {
            Err(Error::TurningPoint { time, force }) => {
                assert!((force - 2.0).abs() < 1e-12);
                assert!((time - (2.0f64 / 3.0).acos()).abs() < 1e-12);
            }
            other => panic!("expected turning point, got {other:?}"),
        }
        let sq = DriveSpec::square_wave(2.0, 1.0).unwrap();
        assert!(matches!(wkb_quasi_energy(&sq, 1.0), Err(Error::TurningPoint { .. })));
        assert!(matches!(wkb_quasi_energy(&DriveSpec::dc(0.1).unwrap(), 1.0), Err(Error::NotPeriodic)));
    }

    #[test]
    fn wkb_square_wave_closed_form() {
        let sq = DriveSpec::square_wave(1.2, 0.5).unwrap();
        let (m1, _) = wkb_quasi_energy(&sq, 1.0).unwrap();
        assert!((m1.im - (1.0f64 - 0.36).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn pt_phase_examples() {
        let b = pt_phase(1.0, 1.0);
        assert_eq!(b.phase, Phase::Broken);
        assert!((b.lambda - Complex64::new(0.0, 0.75f64.sqrt())).norm() < 1e-15);
        let e = pt_phase(2.0, 1.0);
        assert_eq!(e.phase, Phase::Exceptional);
        assert_eq!(e.lambda, Complex64::new(0.0, 0.0));
        let u = pt_phase(3.0, 1.0);
        assert_eq!(u.phase, Phase::Unbroken);
        assert!((u.lambda.re - 1.25f64.sqrt()).abs() < 1e-15);
        assert!((u.lambda.re - 1.1180).abs() < 1e-4);
    }

    #[test]
    fn bloch_period_examples() {
        assert!((bloch_period(4.0, 1.0).unwrap() - PI / 3f64.sqrt()).abs() < 1e-14);
        assert!((bloch_period(4.0, 1.0).unwrap() - 1.8138).abs() < 1e-4);
        assert!(bloch_period(2.0, 1.0).is_err());
        assert!(bloch_period(1.5, 1.0).is_err());
        // σ → 0 recovers the homogeneous period 2π/F₀
        let f0 = 1.7;
        assert!((bloch_period(f0, 1e-9).unwrap() - 2.0 * PI / f0).abs() < 1e-12);
        // square-root divergence at the exceptional point
        let eps = [1e-4, 1e-6];
        let tb: Vec<f64> = eps.iter().map(|e| bloch_period(2.0 * (1.0 + e), 1.0).unwrap()).collect();
        assert!((tb[1] / tb[0] - 10.0).abs() < 1e-3);
    }

    #[test]
    fn dc_coefficients_initial_and_revival() {
        let (a, b) = dc_evolution_coefficients(3.0, 1.0, 0.0);
        assert_eq!((a, b), (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)));
        let tb = bloch_period(3.0, 1.0).unwrap();
        let (a, b) = dc_evolution_coefficients(3.0, 1.0, tb);
        assert!((a + 1.0).norm() < 1e-12);
        assert!(b.norm() < 1e-12);
    }

    #[test]
    fn dc_coefficients_exceptional_series() {
        let (a, b) = dc_evolution_coefficients(2.0, 1.0, 1.0);
        assert!((a - Complex64::new(1.0, -1.0)).norm() < 1e-15);
        assert!((b - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        // series and closed form agree on either side of the switch
        for f0 in [2.0 + 1e-3, 2.0 - 1e-3] {
            let lsq = lambda_squared(f0, 1.0);
            let t = (0.0101 / lsq.abs()).sqrt();
            let (a1, b1) = dc_evolution_coefficients(f0, 1.0, t);
            let (a0, b0) = dc_evolution_coefficients(f0, 1.0, t * 0.999_999);
            assert!((a1 - a0).norm() < 1e-5 && (b1 - b0).norm() < 1e-5);
        }
    }

    #[test]
    fn gf_coefficient_examples() {
        let d = DriveSpec::sinusoidal(2.0, 1.0).unwrap();
        let (p, disp) = gf_heisenberg_coefficient(&d, 1.0, 0.0).unwrap();
        assert_eq!(p, Complex64::new(1.0, 0.0));
        assert_eq!(disp, Complex64::new(0.0, 0.0));
        let (_, disp) = gf_heisenberg_coefficient(&d, 0.0, 3.0).unwrap();
        assert_eq!(disp, Complex64::new(0.0, 0.0));

        let root = j0_roots(1).unwrap()[0];
        let d = DriveSpec::from_gamma(Waveform::Sinusoidal, root, 1.0).unwrap();
        let period = d.period().unwrap();
        let (p, disp) = gf_heisenberg_coefficient(&d, 1.0, period).unwrap();
        assert!((p - 1.0).norm() < 1e-12);
        assert!(disp.norm() <= 1e-8 * period);
    }

    #[test]
    fn gf_displacement_static_drive() {
        // F = 0: d(t) = iσt
        let d = DriveSpec::sinusoidal(0.0, 1.0).unwrap();
        let (_, disp) = gf_heisenberg_coefficient(&d, 0.5, 2.0).unwrap();
        assert!((disp - Complex64::new(0.0, 1.0)).norm() < 1e-13);
    }

    #[test]
    fn breakpoints_span_cycles() {
        let sq = DriveSpec::square_wave(1.0, 1.0).unwrap();
        let b = breakpoints_up_to(&sq, 2.5 * 2.0 * PI);
        assert_eq!(b.len(), 4);
    }

    proptest! {
        #[test]
        fn pt_phase_scale_invariant(f0 in 0.0f64..10.0, sigma in 0.01f64..5.0, c in 0.01f64..100.0) {
            prop_assert_eq!(pt_phase(f0, sigma).phase, pt_phase(c * f0, c * sigma).phase);
        }

        #[test]
        fn dc_coefficients_preserve_su11_norm(f0 in 2.05f64..10.0, sigma in 0.1f64..1.0, t in 0.0f64..20.0) {
            let (a, b) = dc_evolution_coefficients(f0.max(2.05 * sigma), sigma, t);
            prop_assert!((a.norm_sqr() - b.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dc_coefficients_solve_constant_system() {
        // finite-difference check of i dU/dt = M U with U = [[α, β], [β̄, ᾱ]]
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let i = Complex64::new(0.0, 1.0);
        for _ in 0..50 {
            let f0 = rng.gen_range(0.0..6.0);
            let sigma = rng.gen_range(0.2..2.0);
            let t = rng.gen_range(0.0..4.0);
            let h = 1e-5;
            let (ap, bp) = dc_evolution_coefficients(f0, sigma, t + h);
            let (am, bm) = dc_evolution_coefficients(f0, sigma, t - h);
            let (a, b) = dc_evolution_coefficients(f0, sigma, t);
            let da = (ap - am) / (2.0 * h);
            let db = (bp - bm) / (2.0 * h);
            let half = 0.5 * f0;
            let ra = i * da - (a * half - b.conj() * sigma);
            let rb = i * db - (b * half - a.conj() * sigma);
            let scale = 1.0 + a.norm();
            assert!(ra.norm() < 1e-6 * scale && rb.norm() < 1e-6 * scale, "f0={f0} s={sigma} t={t}");
        }
    }
}
