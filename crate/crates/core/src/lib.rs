// SPDX-License-Identifier: Apache-2.0

//! Dynamic localization on ac-driven tight-binding lattices.
//!
//! * [`types`]: lattice and drive specifications and shared result types.
//! * [`lattice`]: integration of the driven lattice, revival fidelity and
//!   the occupation spectrum.
//! * [`floquet`]: the 2×2 non-Hermitian operator system, its monodromy
//!   matrix, quasi-energies and localization points.
//! * [`analytic`]: closed-form references (J₀, WKB, dc propagator, Bloch
//!   period, PT phase).
//! * [`sweeps`]: quasi-energy sweeps and the Γ₀(ω/σ) curve.
//! * [`config`], [`output`]: run configuration and result files for the CLI.

pub mod acceptance;
pub mod analytic;
pub mod app;
pub mod config;
pub mod error;
pub mod exec;
pub mod floquet;
pub mod lattice;
pub mod ode;
pub mod output;
pub mod quad;
pub mod roots;
pub mod sweeps;
pub mod types;

pub use error::{Error, Result};
pub use exec::Execution;
pub use types::{
    drive_phase, drive_value, hopping_rate, CrossingKind, DLPoint, Degeneracy, DriveSpec,
    HoppingLaw, LatticeSpec, QuasiEnergyPair, Trajectory, Waveform,
};
