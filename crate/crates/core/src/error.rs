// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the simulation and analysis routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid drive: {0}")]
    InvalidDrive(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("site index {index} out of range for truncation {truncation}")]
    SiteOutOfRange { index: usize, truncation: usize },

    #[error("truncation of {truncation} sites insufficient: edge occupation {occupation:.3e} at t = {time:.6}")]
    TruncationInsufficient {
        truncation: usize,
        time: f64,
        occupation: f64,
    },

    #[error("accuracy failure: {0}")]
    Accuracy(String),

    #[error("integrator step size underflow at t = {time:.6} (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("WKB formula invalid: turning point at t = {time:.6} (|F| = {force:.6} >= 2 sigma)")]
    TurningPoint { time: f64, force: f64 },

    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("requested cycle {cycle} beyond trajectory end t = {t_end:.6}")]
    CycleOutOfRange { cycle: usize, t_end: f64 },

    #[error("operation requires a periodic drive")]
    NotPeriodic,
}

pub type Result<T> = std::result::Result<T, Error>;
