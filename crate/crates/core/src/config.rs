// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a TOML file and/or command-line flags, merged with
//! flags taking precedence, then validated into a [`RunConfig`].
//!
//! Schema (σ is the unit of rate and force; times are in units of 1/σ when
//! `lattice.sigma = 1`):
//!
//! ```toml
//! command = "simulate"          # simulate | quasienergy | find-dl | anomaly
//!                               # | wkb-compare | bloch | verify-suite
//! output_dir = "out"            # default "."
//! formats = ["csv", "json", "plot-data"]   # default: all three
//! cycles = 3                    # drive periods (Bloch periods for `bloch`)
//! initial_site = 0              # default: edge, or the centre for homogeneous
//!
//! [lattice]
//! law = "pseudo-glauber-fock"   # homogeneous | glauber-fock | pseudo-glauber-fock | custom
//! sigma = 1.0                   # coupling σ [rate]
//! truncation = 128              # retained sites N
//! hops = [...]                  # κ_n [rate], custom law only, length N
//!
//! [drive]
//! waveform = "sinusoidal"       # sinusoidal | square-wave | dc | custom-samples
//! omega = 1.0                   # angular frequency ω [rate]; not for dc
//! gamma = 3.353                 # Γ = F₀/ω [dimensionless]; canonical strength
//! f0 = 3.353                    # F₀ [rate]; alternative to gamma
//! samples = [...]               # zero-mean shape, custom-samples only
//!
//! [sweep]
//! omega_over_sigma = [5.0, 1.0] # ω/σ operating points [dimensionless]
//! gamma_range = { min = 0.0, max = 8.0, step = 0.01 }   # Γ grid
//! verify_fidelity = false
//! wkb_overlay = false
//! execution = "parallel"        # parallel | serial
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::exec::Execution;
use crate::lattice::DEFAULT_TRUNCATION;
use crate::sweeps::{GammaRange, SweepPlan};
use crate::types::{DriveSpec, HoppingLaw, LatticeSpec, Waveform};

/// Relative tolerance for agreement of `drive.gamma` and `drive.f0`.
pub const GAMMA_F0_TOL: f64 = 1e-9;
pub const DEFAULT_CYCLES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Quasienergy,
    FindDl,
    Anomaly,
    WkbCompare,
    Bloch,
    VerifySuite,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Simulate,
        Command::Quasienergy,
        Command::FindDl,
        Command::Anomaly,
        Command::WkbCompare,
        Command::Bloch,
        Command::VerifySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Quasienergy => "quasienergy",
            Command::FindDl => "find-dl",
            Command::Anomaly => "anomaly",
            Command::WkbCompare => "wkb-compare",
            Command::Bloch => "bloch",
            Command::VerifySuite => "verify-suite",
        }
    }

    /// Keys that must be present (after merging flags) for this command.
    pub fn required_keys(self) -> &'static [&'static str] {
        match self {
            Command::Simulate => &["lattice.law", "lattice.sigma", "drive.waveform", "drive.omega", "drive.gamma | drive.f0"],
            Command::Quasienergy | Command::FindDl | Command::WkbCompare | Command::Anomaly => {
                &["sweep.omega_over_sigma | drive.omega with lattice.sigma"]
            }
            Command::Bloch => &["lattice.sigma", "drive.f0"],
            Command::VerifySuite => &[],
        }
    }

    fn is_sweep(self) -> bool {
        matches!(self, Command::Quasienergy | Command::FindDl | Command::WkbCompare | Command::Anomaly)
    }

    fn default_gamma_range(self) -> GammaRange {
        match self {
            Command::Anomaly => GammaRange { min: 0.0, max: 16.0, step: 0.01 },
            _ => GammaRange::default(),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
    PlotData,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Json, Format::PlotData];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "plot-data" => Some(Format::PlotData),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LawName {
    Homogeneous,
    GlauberFock,
    PseudoGlauberFock,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformName {
    Sinusoidal,
    SquareWave,
    Dc,
    CustomSamples,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLattice {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<LawName>,
    /// σ [rate].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    /// κ_n [rate].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hops: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDrive {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waveform: Option<WaveformName>,
    /// ω [rate].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    /// Γ = F₀/ω [dimensionless].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// F₀ [rate].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    /// ω/σ [dimensionless].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_over_sigma: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_range: Option<GammaRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verify_fidelity: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wkb_overlay: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub execution: Option<Execution>,
}

/// Unvalidated configuration as read from a file or assembled from flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formats: Option<Vec<Format>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_site: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<RawLattice>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive: Option<RawDrive>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
}

fn pick<T>(base: Option<T>, over: Option<T>) -> Option<T> {
    over.or(base)
}

fn merge_nested<T: Default>(base: Option<T>, over: Option<T>, f: impl FnOnce(T, T) -> T) -> Option<T> {
    match (base, over) {
        (None, None) => None,
        (b, o) => Some(f(b.unwrap_or_default(), o.unwrap_or_default())),
    }
}

impl RawConfig {
    /// Field-wise merge; values in `over` win.
    pub fn merge(self, over: RawConfig) -> RawConfig {
        RawConfig {
            command: pick(self.command, over.command),
            output_dir: pick(self.output_dir, over.output_dir),
            formats: pick(self.formats, over.formats),
            cycles: pick(self.cycles, over.cycles),
            initial_site: pick(self.initial_site, over.initial_site),
            lattice: merge_nested(self.lattice, over.lattice, |b, o| RawLattice {
                law: pick(b.law, o.law),
                sigma: pick(b.sigma, o.sigma),
                truncation: pick(b.truncation, o.truncation),
                hops: pick(b.hops, o.hops),
            }),
            drive: merge_nested(self.drive, over.drive, |b, o| RawDrive {
                waveform: pick(b.waveform, o.waveform),
                omega: pick(b.omega, o.omega),
                gamma: pick(b.gamma, o.gamma),
                f0: pick(b.f0, o.f0),
                samples: pick(b.samples, o.samples),
            }),
            sweep: merge_nested(self.sweep, over.sweep, |b, o| RawSweep {
                omega_over_sigma: pick(b.omega_over_sigma, o.omega_over_sigma),
                gamma_range: pick(b.gamma_range, o.gamma_range),
                verify_fidelity: pick(b.verify_fidelity, o.verify_fidelity),
                wkb_overlay: pick(b.wkb_overlay, o.wkb_overlay),
                execution: pick(b.execution, o.execution),
            }),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("raw config is always representable in TOML")
    }
}

/// A configuration problem, located by key path and, for file input, line.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io { path: PathBuf, message: String },
    Parse { key: String, line: Option<usize>, message: String },
    Missing { command: Option<Command>, keys: Vec<String> },
    Invalid { key: String, line: Option<usize>, message: String },
}

fn at_line(line: &Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, message } => write!(f, "cannot read config {}: {message}", path.display()),
            ConfigError::Parse { key, line, message } => {
                write!(f, "config error at `{key}`{}: {message}", at_line(line))
            }
            ConfigError::Missing { command: Some(c), keys } => {
                write!(f, "missing required keys for `{c}`: {}", keys.join(", "))
            }
            ConfigError::Missing { command: None, keys } => {
                write!(f, "missing required keys: {}", keys.join(", "))?;
                for c in Command::ALL {
                    if !c.required_keys().is_empty() {
                        write!(f, "\n  {c}: {}", c.required_keys().join(", "))?;
                    }
                }
                Ok(())
            }
            ConfigError::Invalid { key, line, message } => {
                write!(f, "invalid value for `{key}`{}: {message}", at_line(line))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// 1-based line of byte `offset` in `source`.
fn line_of_offset(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// Best-effort line of a dotted key such as `drive.gamma` in a TOML source.
pub fn locate_key(source: &str, key: &str) -> Option<usize> {
    let (table, leaf) = match key.rsplit_once('.') {
        Some((t, l)) => (t, l),
        None => ("", key),
    };
    let mut current = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = header.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else { continue };
        let lhs = lhs.trim();
        let full = if current.is_empty() { lhs.to_string() } else { format!("{current}.{lhs}") };
        if full == key || (current == table && lhs == leaf) {
            return Some(i + 1);
        }
    }
    None
}

/// Parse TOML text into a [`RawConfig`], reporting the key path and line of
/// the first problem.
pub fn parse_toml(source: &str) -> Result<RawConfig, ConfigError> {
    let de = toml::Deserializer::new(source);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        let line = inner.span().map(|s| line_of_offset(source, s.start));
        ConfigError::Parse { key, line, message: inner.message().to_string() }
    })
}

pub fn read_file(path: &Path) -> Result<(RawConfig, String), ConfigError> {
    let source = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((parse_toml(&source)?, source))
}

/// A fully validated run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub lattice: Option<LatticeSpec>,
    pub drive: Option<DriveSpec>,
    pub sweep: Option<SweepPlan>,
    pub cycles: usize,
    pub initial_site: Option<usize>,
    pub output_dir: PathBuf,
    pub formats: BTreeSet<Format>,
}

impl RunConfig {
    /// Inverse of validation: a raw config that validates back to `self`.
    pub fn to_raw(&self) -> RawConfig {
        let lattice = self.lattice.as_ref().map(|l| RawLattice {
            law: Some(match l.law() {
                HoppingLaw::Homogeneous => LawName::Homogeneous,
                HoppingLaw::GlauberFock => LawName::GlauberFock,
                HoppingLaw::PseudoGlauberFock => LawName::PseudoGlauberFock,
                HoppingLaw::Custom { .. } => LawName::Custom,
            }),
            sigma: Some(l.sigma()),
            truncation: Some(l.truncation()),
            hops: match l.law() {
                HoppingLaw::Custom { hops } => Some(hops.clone()),
                _ => None,
            },
        });
        let drive = self.drive.as_ref().map(|d| {
            let (waveform, samples) = match d.waveform() {
                Waveform::Sinusoidal => (WaveformName::Sinusoidal, None),
                Waveform::SquareWave => (WaveformName::SquareWave, None),
                Waveform::Dc => (WaveformName::Dc, None),
                Waveform::CustomSamples { samples } => (WaveformName::CustomSamples, Some(samples.clone())),
            };
            RawDrive {
                waveform: Some(waveform),
                omega: d.is_periodic().then(|| d.omega()),
                gamma: d.gamma(),
                f0: Some(d.f0()),
                samples,
            }
        });
        let sweep = self.sweep.as_ref().map(|s| RawSweep {
            omega_over_sigma: Some(s.omega_over_sigma.clone()),
            gamma_range: Some(s.gamma_range),
            verify_fidelity: Some(s.verify_fidelity),
            wkb_overlay: Some(s.wkb_overlay),
            execution: Some(s.execution),
        });
        // a sweep over a non-default waveform is carried by the drive table
        let drive = match (&drive, &self.sweep) {
            (None, Some(s)) if s.waveform != Waveform::Sinusoidal => Some(RawDrive {
                waveform: Some(match &s.waveform {
                    Waveform::SquareWave => WaveformName::SquareWave,
                    Waveform::CustomSamples { .. } => WaveformName::CustomSamples,
                    _ => WaveformName::Sinusoidal,
                }),
                samples: match &s.waveform {
                    Waveform::CustomSamples { samples } => Some(samples.clone()),
                    _ => None,
                },
                ..RawDrive::default()
            }),
            _ => drive,
        };
        RawConfig {
            command: Some(self.command),
            output_dir: Some(self.output_dir.clone()),
            formats: Some(self.formats.iter().copied().collect()),
            cycles: Some(self.cycles),
            initial_site: self.initial_site,
            lattice,
            drive,
            sweep,
        }
    }

    /// Canonical TOML form, also the input of the provenance hash.
    pub fn to_toml(&self) -> String {
        self.to_raw().to_toml()
    }
}

struct Validator<'a> {
    source: Option<&'a str>,
}

impl Validator<'_> {
    fn invalid(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::Invalid {
            key: key.to_string(),
            line: self.source.and_then(|s| locate_key(s, key)),
            message: message.into(),
        }
    }

    fn model_error(&self, key: &str, e: Error) -> ConfigError {
        self.invalid(key, e.to_string())
    }

    fn waveform(&self, drive: &RawDrive) -> Result<Waveform, ConfigError> {
        Ok(match drive.waveform {
            Some(WaveformName::Sinusoidal) | None => Waveform::Sinusoidal,
            Some(WaveformName::SquareWave) => Waveform::SquareWave,
            Some(WaveformName::Dc) => Waveform::Dc,
            Some(WaveformName::CustomSamples) => Waveform::CustomSamples {
                samples: drive
                    .samples
                    .clone()
                    .ok_or_else(|| self.invalid("drive.samples", "required for the custom-samples waveform"))?,
            },
        })
    }

    fn lattice(&self, raw: &RawLattice, default_law: Option<LawName>) -> Result<LatticeSpec, ConfigError> {
        let law = match raw.law.or(default_law) {
            Some(LawName::Homogeneous) => HoppingLaw::Homogeneous,
            Some(LawName::GlauberFock) => HoppingLaw::GlauberFock,
            Some(LawName::PseudoGlauberFock) => HoppingLaw::PseudoGlauberFock,
            Some(LawName::Custom) => HoppingLaw::Custom {
                hops: raw
                    .hops
                    .clone()
                    .ok_or_else(|| self.invalid("lattice.hops", "required for the custom law"))?,
            },
            None => unreachable!("checked by required keys"),
        };
        if raw.hops.is_some() && !matches!(law, HoppingLaw::Custom { .. }) {
            return Err(self.invalid("lattice.hops", "only valid with law = \"custom\""));
        }
        let truncation = match (&law, raw.truncation) {
            (_, Some(n)) => n,
            (HoppingLaw::Custom { hops }, None) => hops.len(),
            (_, None) => DEFAULT_TRUNCATION,
        };
        let sigma = raw.sigma.expect("checked by required keys");
        LatticeSpec::new(law, sigma, truncation).map_err(|e| {
            let key = if !(sigma > 0.0 && sigma.is_finite()) {
                "lattice.sigma"
            } else if matches!(raw.law, Some(LawName::Custom)) {
                "lattice.hops"
            } else {
                "lattice.truncation"
            };
            self.model_error(key, e)
        })
    }

    fn drive(&self, raw: &RawDrive) -> Result<DriveSpec, ConfigError> {
        let waveform = self.waveform(raw)?;
        if raw.samples.is_some() && !matches!(waveform, Waveform::CustomSamples { .. }) {
            return Err(self.invalid("drive.samples", "only valid with waveform = \"custom-samples\""));
        }
        if matches!(waveform, Waveform::Dc) {
            if raw.omega.is_some() || raw.gamma.is_some() {
                let key = if raw.omega.is_some() { "drive.omega" } else { "drive.gamma" };
                return Err(self.invalid(key, "a dc drive takes only f0"));
            }
            let f0 = raw.f0.expect("checked by required keys");
            return DriveSpec::dc(f0).map_err(|e| self.model_error("drive.f0", e));
        }
        let omega = raw.omega.expect("checked by required keys");
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(self.invalid("drive.omega", format!("must be positive, got {omega}")));
        }
        let f0 = match (raw.gamma, raw.f0) {
            (Some(gamma), Some(f0)) => {
                if (gamma * omega - f0).abs() > GAMMA_F0_TOL * f0.abs().max(1.0) {
                    return Err(self.invalid(
                        "drive.f0",
                        format!("f0 = {f0} disagrees with gamma * omega = {}", gamma * omega),
                    ));
                }
                f0
            }
            (Some(gamma), None) => gamma * omega,
            (None, Some(f0)) => f0,
            (None, None) => unreachable!("checked by required keys"),
        };
        DriveSpec::new(waveform, f0, omega).map_err(|e| {
            let key = if raw.samples.is_some() && f0 >= 0.0 { "drive.samples" } else if raw.gamma.is_some() { "drive.gamma" } else { "drive.f0" };
            self.model_error(key, e)
        })
    }

    fn missing(&self, command: Command, raw: &RawConfig) -> Vec<String> {
        let lattice = raw.lattice.clone().unwrap_or_default();
        let drive = raw.drive.clone().unwrap_or_default();
        let sweep = raw.sweep.clone().unwrap_or_default();
        let mut out = Vec::new();
        let mut need = |present: bool, key: &str| {
            if !present {
                out.push(key.to_string());
            }
        };
        match command {
            Command::Simulate => {
                let dc = drive.waveform == Some(WaveformName::Dc);
                need(lattice.law.is_some(), "lattice.law");
                need(lattice.sigma.is_some(), "lattice.sigma");
                need(drive.waveform.is_some(), "drive.waveform");
                if dc {
                    need(drive.f0.is_some(), "drive.f0");
                } else {
                    need(drive.omega.is_some(), "drive.omega");
                    need(drive.gamma.is_some() || drive.f0.is_some(), "drive.gamma | drive.f0");
                }
            }
            Command::Quasienergy | Command::FindDl | Command::WkbCompare | Command::Anomaly => need(
                sweep.omega_over_sigma.is_some() || (drive.omega.is_some() && lattice.sigma.is_some()),
                "sweep.omega_over_sigma | drive.omega with lattice.sigma",
            ),
            Command::Bloch => {
                need(lattice.sigma.is_some(), "lattice.sigma");
                need(drive.f0.is_some(), "drive.f0");
            }
            Command::VerifySuite => {}
        }
        out
    }

    fn sweep(&self, command: Command, raw: &RawConfig) -> Result<SweepPlan, ConfigError> {
        let lattice = raw.lattice.clone().unwrap_or_default();
        let drive = raw.drive.clone().unwrap_or_default();
        let sweep = raw.sweep.clone().unwrap_or_default();
        let omega_over_sigma = match sweep.omega_over_sigma {
            Some(list) => list,
            None => vec![drive.omega.unwrap() / lattice.sigma.unwrap()],
        };
        let waveform = self.waveform(&drive)?;
        if matches!(waveform, Waveform::Dc) {
            return Err(self.invalid("drive.waveform", format!("`{command}` needs a periodic waveform")));
        }
        let plan = SweepPlan {
            omega_over_sigma,
            gamma_range: sweep.gamma_range.unwrap_or_else(|| command.default_gamma_range()),
            verify_fidelity: sweep.verify_fidelity.unwrap_or(false),
            wkb_overlay: sweep.wkb_overlay.unwrap_or(command == Command::WkbCompare),
            waveform,
            execution: sweep.execution.unwrap_or_default(),
        };
        plan.validate().map_err(|e| {
            let key = if plan.gamma_range.validate().is_err() { "sweep.gamma_range" } else { "sweep.omega_over_sigma" };
            self.model_error(key, e)
        })?;
        Ok(plan)
    }

    fn run(&self, raw: RawConfig) -> Result<RunConfig, ConfigError> {
        let Some(command) = raw.command else {
            let mut keys = vec!["command".to_string()];
            if raw == RawConfig::default() {
                keys.push("plus the per-command keys below".to_string());
            }
            return Err(ConfigError::Missing { command: None, keys });
        };
        let keys = self.missing(command, &raw);
        if !keys.is_empty() {
            return Err(ConfigError::Missing { command: Some(command), keys });
        }
        let cycles = raw.cycles.unwrap_or(DEFAULT_CYCLES);
        if cycles == 0 {
            return Err(self.invalid("cycles", "must be at least 1"));
        }
        let (lattice, drive, sweep) = match command {
            Command::Simulate => {
                let lattice = self.lattice(raw.lattice.as_ref().unwrap(), None)?;
                let drive = self.drive(raw.drive.as_ref().unwrap())?;
                (Some(lattice), Some(drive), None)
            }
            Command::Bloch => {
                let raw_drive = raw.drive.clone().unwrap();
                if raw_drive.waveform.is_some_and(|w| w != WaveformName::Dc) {
                    return Err(self.invalid("drive.waveform", "`bloch` uses a dc drive"));
                }
                let drive = self.drive(&RawDrive { waveform: Some(WaveformName::Dc), ..raw_drive })?;
                let lattice = self.lattice(raw.lattice.as_ref().unwrap(), Some(LawName::PseudoGlauberFock))?;
                (Some(lattice), Some(drive), None)
            }
            c if c.is_sweep() => (None, None, Some(self.sweep(c, &raw)?)),
            _ => (None, None, None),
        };
        if let (Some(site), Some(lattice)) = (raw.initial_site, &lattice) {
            if site >= lattice.truncation() {
                return Err(self.invalid(
                    "initial_site",
                    format!("site {site} is outside the lattice of {} sites", lattice.truncation()),
                ));
            }
        }
        let formats = match raw.formats {
            Some(list) => list.into_iter().collect(),
            None => Format::ALL.into_iter().collect(),
        };
        Ok(RunConfig {
            command,
            lattice,
            drive,
            sweep,
            cycles,
            initial_site: raw.initial_site,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(".")),
            formats,
        })
    }
}

/// Validate a merged raw config. `source` is the file text, used to attach
/// line numbers to diagnostics.
pub fn validate(raw: RawConfig, source: Option<&str>) -> Result<RunConfig, ConfigError> {
    Validator { source }.run(raw)
}

/// Read the optional config file, apply flag overrides and validate.
pub fn parse_config(file: Option<&Path>, flags: RawConfig) -> Result<RunConfig, ConfigError> {
    let (base, source) = match file {
        Some(path) => {
            let (raw, source) = read_file(path)?;
            (raw, Some(source))
        }
        None => (RawConfig::default(), None),
    };
    validate(base.merge(flags), source.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EDGE_RUN: &str = r#"
command = "simulate"

[lattice]
law = "pseudo-glauber-fock"
sigma = 1.0

[drive]
waveform = "sinusoidal"
omega = 1.0
gamma = 3.353
"#;

    #[test]
    fn minimal_simulate_config() {
        let cfg = validate(parse_toml(EDGE_RUN).unwrap(), Some(EDGE_RUN)).unwrap();
        assert_eq!(cfg.command, Command::Simulate);
        let drive = cfg.drive.unwrap();
        assert_eq!(drive.gamma(), Some(3.353));
        assert_eq!(cfg.lattice.unwrap().truncation(), DEFAULT_TRUNCATION);
        assert_eq!(cfg.cycles, 3);
        assert_eq!(cfg.formats.len(), 3);
    }

    #[test]
    fn inconsistent_gamma_and_f0_rejected_with_line() {
        let src = format!("{EDGE_RUN}f0 = 3.0\n");
        let err = validate(parse_toml(&src).unwrap(), Some(&src)).unwrap_err();
        match err {
            ConfigError::Invalid { key, line, .. } => {
                assert_eq!(key, "drive.f0");
                assert_eq!(line, Some(12));
            }
            other => panic!("{other:?}"),
        }
        let ok = format!("{EDGE_RUN}f0 = 3.353\n");
        assert!(validate(parse_toml(&ok).unwrap(), Some(&ok)).is_ok());
    }

    #[test]
    fn empty_config_lists_required_keys() {
        let err = validate(parse_toml("").unwrap(), Some("")).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("command"));
        for c in Command::ALL {
            for k in c.required_keys() {
                assert!(text.contains(k), "{k} missing from {text}");
            }
        }
    }

    #[test]
    fn missing_keys_for_command() {
        let err = validate(parse_toml("command = \"simulate\"").unwrap(), None).unwrap_err();
        match err {
            ConfigError::Missing { command, keys } => {
                assert_eq!(command, Some(Command::Simulate));
                assert_eq!(keys.len(), 5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_path_and_line() {
        let src = "command = \"simulate\"\n[lattice]\nlaw = \"homogeneous\"\nsigmma = 1.0\n";
        match parse_toml(src).unwrap_err() {
            ConfigError::Parse { key, line, message } => {
                assert!(key.starts_with("lattice"), "{key}");
                assert_eq!(line, Some(4));
                assert!(message.contains("sigmma"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_path() {
        match parse_toml("[drive]\nomega = \"fast\"\n").unwrap_err() {
            ConfigError::Parse { key, line, .. } => {
                assert_eq!(key, "drive.omega");
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flags_override_file() {
        let base = parse_toml(EDGE_RUN).unwrap();
        let flags = RawConfig {
            drive: Some(RawDrive { gamma: Some(2.0), ..RawDrive::default() }),
            cycles: Some(5),
            ..RawConfig::default()
        };
        let cfg = validate(base.merge(flags), None).unwrap();
        assert_eq!(cfg.drive.unwrap().gamma(), Some(2.0));
        assert_eq!(cfg.cycles, 5);
    }

    #[test]
    fn unit_inconsistent_values_rejected() {
        let src = EDGE_RUN.replace("sigma = 1.0", "sigma = -1.0");
        let err = validate(parse_toml(&src).unwrap(), Some(&src)).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { ref key, line: Some(6), .. } if key == "lattice.sigma"), "{err:?}");
        let dc = "command = \"simulate\"\n[lattice]\nlaw = \"homogeneous\"\nsigma = 1.0\n[drive]\nwaveform = \"dc\"\nf0 = 1.0\ngamma = 2.0\n";
        assert!(matches!(validate(parse_toml(dc).unwrap(), Some(dc)), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn sweep_defaults_and_derived_operating_point() {
        let src = "command = \"find-dl\"\n[lattice]\nsigma = 2.0\n[drive]\nomega = 2.0\n";
        let cfg = validate(parse_toml(src).unwrap(), Some(src)).unwrap();
        let plan = cfg.sweep.unwrap();
        assert_eq!(plan.omega_over_sigma, vec![1.0]);
        assert_eq!(plan.gamma_range, GammaRange::default());
        let src = "command = \"wkb-compare\"\n[sweep]\nomega_over_sigma = [0.2]\n";
        assert!(validate(parse_toml(src).unwrap(), None).unwrap().sweep.unwrap().wkb_overlay);
    }

    #[test]
    fn bloch_defaults_to_pseudo_glauber_fock() {
        let src = "command = \"bloch\"\n[lattice]\nsigma = 1.0\n[drive]\nf0 = 4.0\n";
        let cfg = validate(parse_toml(src).unwrap(), None).unwrap();
        assert_eq!(cfg.lattice.unwrap().law(), &HoppingLaw::PseudoGlauberFock);
        assert_eq!(cfg.drive.unwrap().waveform(), &Waveform::Dc);
    }

    fn law() -> impl Strategy<Value = HoppingLaw> {
        prop_oneof![
            Just(HoppingLaw::Homogeneous),
            Just(HoppingLaw::GlauberFock),
            Just(HoppingLaw::PseudoGlauberFock),
        ]
    }

    fn run_config() -> impl Strategy<Value = RunConfig> {
        let simulate = (law(), 0.01f64..10.0, 2usize..300, 0.01f64..10.0, 0.0f64..20.0, 1usize..10, prop::bool::ANY)
            .prop_map(|(law, sigma, n, omega, gamma, cycles, square)| {
                let waveform = if square { Waveform::SquareWave } else { Waveform::Sinusoidal };
                RunConfig {
                    command: Command::Simulate,
                    lattice: Some(LatticeSpec::new(law, sigma, n).unwrap()),
                    drive: Some(DriveSpec::from_gamma(waveform, gamma, omega).unwrap()),
                    sweep: None,
                    cycles,
                    initial_site: Some(0),
                    output_dir: PathBuf::from("out/run"),
                    formats: [Format::Csv, Format::PlotData].into_iter().collect(),
                }
            });
        let sweep = (prop::collection::vec(0.05f64..20.0, 1..5), 0.0f64..5.0, 0.0f64..10.0, 0.001f64..1.0, prop::bool::ANY)
            .prop_map(|(ws, min, span, step, verify)| {
                let mut plan = SweepPlan::new(ws, GammaRange::new(min, min + span, step).unwrap()).unwrap();
                plan.verify_fidelity = verify;
                RunConfig {
                    command: Command::FindDl,
                    lattice: None,
                    drive: None,
                    sweep: Some(plan),
                    cycles: 3,
                    initial_site: None,
                    output_dir: PathBuf::from("."),
                    formats: Format::ALL.into_iter().collect(),
                }
            });
        prop_oneof![simulate, sweep]
    }

    proptest! {
        #[test]
        fn emitted_config_round_trips(cfg in run_config()) {
            let text = cfg.to_toml();
            let back = validate(parse_toml(&text).unwrap(), Some(&text)).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
