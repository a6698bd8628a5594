// SPDX-License-Identifier: Apache-2.0

//! Adaptive Dormand–Prince 5(4) integrator for complex linear and
//! nonlinear systems y' = f(t, y).
//!
//! Step ends are constrained to land exactly on every requested output
//! time, so no dense-output interpolation is needed downstream.

use num_complex::Complex64;

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;

/// Right-hand side of a complex ODE system.
pub trait ComplexSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step size (absolute time).
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

struct Workspace {
    k: [Vec<Complex64>; 7],
    stage: Vec<Complex64>,
    y_new: Vec<Complex64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); n];
        Self {
            k: std::array::from_fn(|_| zero.clone()),
            stage: zero.clone(),
            y_new: zero,
        }
    }
}

fn combine(out: &mut [Complex64], y: &[Complex64], h: f64, terms: &[(f64, &[Complex64])]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, k) in terms {
            acc += k[i] * *c;
        }
        *o = y[i] + acc * h;
    }
}

/// Integrate from `t0` through each of the increasing times `targets`,
/// calling `on_target(t, y)` with the state exactly at each target.
pub fn integrate<S, F>(
    system: &S,
    y: &mut Vec<Complex64>,
    t0: f64,
    targets: &[f64],
    settings: &OdeSettings,
    mut on_target: F,
) -> Result<OdeStats>
where
    S: ComplexSystem,
    F: FnMut(f64, &[Complex64]) -> Result<()>,
{
    let n = system.dim();
    assert_eq!(y.len(), n, "state dimension mismatch");
    let mut ws = Workspace::new(n);
    let mut stats = OdeStats::default();
    let mut t = t0;

    system.rhs(t, y, &mut ws.k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(y, &ws.k[0], settings);

    for &target in targets {
        if target < t {
            return Err(Error::InvalidArgument(format!(
                "output times must be nondecreasing ({target} < {t})"
            )));
        }
        while t < target {
            let remaining = target - t;
            // avoid leaving a sliver step in front of the target
            let landing = h >= remaining || remaining - h < 1e-3 * h;
            let step = if landing { remaining } else { h };
            let err = try_step(system, y, t, step, &mut ws, settings);
            stats.evaluations += 6;
            if err <= 1.0 {
                t = if landing { target } else { t + step };
                std::mem::swap(y, &mut ws.y_new);
                ws.k.swap(0, 6); // FSAL
                stats.accepted += 1;
                if stats.accepted > settings.max_steps {
                    return Err(Error::Accuracy(format!(
                        "exceeded {} integrator steps before t = {target}",
                        settings.max_steps
                    )));
                }
                let factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                // a clipped landing step says nothing about the natural size
                if !landing || step >= h {
                    h = (step * factor).min(settings.max_step);
                }
            } else {
                stats.rejected += 1;
                h = step * (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
                if h < 1e-14 * t.abs().max(1.0) {
                    return Err(Error::StepUnderflow { time: t, step: h });
                }
            }
        }
        on_target(t, y)?;
    }
    Ok(stats)
}

fn initial_step(y: &[Complex64], f0: &[Complex64], s: &OdeSettings) -> f64 {
    let scale = |v: &[Complex64]| {
        let sum: f64 = v
            .iter()
            .zip(y)
            .map(|(x, yi)| (x.norm() / (s.abs_tol + s.rel_tol * yi.norm())).powi(2))
            .sum();
        (sum / v.len().max(1) as f64).sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(f0);
    let h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h.min(s.max_step)
}

/// One trial step; leaves the candidate in `ws.y_new` and its derivative in
/// `ws.k[6]`. Returns the scaled RMS error.
fn try_step<S: ComplexSystem>(
    system: &S,
    y: &[Complex64],
    t: f64,
    h: f64,
    ws: &mut Workspace,
    s: &OdeSettings,
) -> f64 {
    let [k1, k2, k3, k4, k5, k6, k7] = &mut ws.k;
    combine(&mut ws.stage, y, h, &[(A21, k1)]);
    system.rhs(t + C2 * h, &ws.stage, k2);
    combine(&mut ws.stage, y, h, &[(A31, k1), (A32, k2)]);
    system.rhs(t + C3 * h, &ws.stage, k3);
    combine(&mut ws.stage, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
    system.rhs(t + C4 * h, &ws.stage, k4);
    combine(
        &mut ws.stage,
        y,
        h,
        &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)],
    );
    system.rhs(t + C5 * h, &ws.stage, k5);
    combine(
        &mut ws.stage,
        y,
        h,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
    );
    system.rhs(t + h, &ws.stage, k6);
    combine(
        &mut ws.y_new,
        y,
        h,
        &[(B1, k1), (B3, k3), (B4, k4), (B5, k5), (B6, k6)],
    );
    system.rhs(t + h, &ws.y_new, k7);

    let mut sum = 0.0;
    for i in 0..y.len() {
        let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
        let sc = s.abs_tol + s.rel_tol * y[i].norm().max(ws.y_new[i].norm());
        sum += (e.norm() / sc).powi(2);
    }
    (sum / y.len() as f64).sqrt()
}
