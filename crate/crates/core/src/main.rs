// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::{value::StrDeserializer, IntoDeserializer};
use serde::Deserialize;

use dynloc::app::{self, exit};
use dynloc::config::{self, Command, Format, LawName, RawConfig, RawDrive, RawLattice, RawSweep, WaveformName};
use dynloc::sweeps::GammaRange;

/// Dynamic localization on ac-driven tight-binding lattices.
///
/// Exit codes: 0 success, 1 other failure, 2 configuration error,
/// 3 truncation failure, 4 accuracy failure, 5 write failure,
/// 6 acceptance criteria failed (verify-suite).
#[derive(Parser)]
#[command(version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Evolve a single-site excitation and record revivals.
    Simulate(Flags),
    /// Quasi-energies over a Γ grid.
    Quasienergy(Flags),
    /// Localization points Γ₀ on a Γ grid.
    FindDl(Flags),
    /// First localization point as a function of ω/σ.
    Anomaly(Flags),
    /// Exact quasi-energies against the WKB approximation.
    WkbCompare(Flags),
    /// Revival of a dc-driven lattice and the Bloch period.
    Bloch(Flags),
    /// Run the acceptance battery and print a pass/fail table.
    VerifySuite(Flags),
}

#[derive(Args, Default)]
struct Flags {
    /// TOML configuration file; flags override its values.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Hopping law: homogeneous, glauber-fock, pseudo-glauber-fock.
    #[arg(long, value_name = "LAW", value_parser = parse_name::<LawName>)]
    lattice: Option<LawName>,
    /// Hopping scale σ [rate].
    #[arg(long)]
    sigma: Option<f64>,
    /// Drive waveform: sinusoidal, square-wave, dc.
    #[arg(long, value_parser = parse_name::<WaveformName>)]
    waveform: Option<WaveformName>,
    /// Drive frequency ω [rate].
    #[arg(long)]
    omega: Option<f64>,
    /// Drive strength Γ = F₀/ω [dimensionless].
    #[arg(long)]
    gamma: Option<f64>,
    /// Force amplitude F₀ [rate].
    #[arg(long)]
    f0: Option<f64>,
    /// Number of drive periods (or Bloch periods) to run.
    #[arg(long)]
    cycles: Option<usize>,
    /// Γ grid as MIN:MAX:STEP.
    #[arg(long, value_name = "MIN:MAX:STEP", value_parser = parse_gamma_range)]
    gamma_range: Option<GammaRange>,
    /// Comma-separated ω/σ operating points.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    omega_over_sigma: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated subset of csv, json, plot-data; `none` writes nothing.
    #[arg(long, value_name = "LIST", value_parser = parse_formats)]
    format: Option<FormatList>,
    /// Check every localization point on the lattice (sweep commands).
    #[arg(long)]
    verify: bool,
}

#[derive(Clone)]
struct FormatList(Vec<Format>);

fn parse_name<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    let de: StrDeserializer<serde::de::value::Error> = s.into_deserializer();
    T::deserialize(de).map_err(|e| e.to_string())
}

fn parse_gamma_range(s: &str) -> Result<GammaRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, step] = parts.as_slice() else {
        return Err(format!("expected MIN:MAX:STEP, got `{s}`"));
    };
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"));
    GammaRange::new(num(min)?, num(max)?, num(step)?).map_err(|e| e.to_string())
}

fn parse_formats(s: &str) -> Result<FormatList, String> {
    if s.trim() == "none" {
        return Ok(FormatList(Vec::new()));
    }
    s.split(',')
        .map(|f| Format::parse(f.trim()).ok_or_else(|| format!("unknown format `{f}` (csv, json, plot-data, none)")))
        .collect::<Result<_, _>>()
        .map(FormatList)
}

fn nested<T: Default + PartialEq>(value: T) -> Option<T> {
    (value != T::default()).then_some(value)
}

impl Flags {
    fn into_raw(self, command: Command) -> (Option<PathBuf>, RawConfig) {
        let lattice = RawLattice { law: self.lattice, sigma: self.sigma, ..RawLattice::default() };
        let drive = RawDrive {
            waveform: self.waveform,
            omega: self.omega,
            gamma: self.gamma,
            f0: self.f0,
            ..RawDrive::default()
        };
        let sweep = RawSweep {
            omega_over_sigma: self.omega_over_sigma,
            gamma_range: self.gamma_range,
            verify_fidelity: self.verify.then_some(true),
            ..RawSweep::default()
        };
        let raw = RawConfig {
            command: Some(command),
            output_dir: self.out,
            formats: self.format.map(|f| f.0),
            cycles: self.cycles,
            initial_site: None,
            lattice: nested(lattice),
            drive: nested(drive),
            sweep: nested(sweep),
        };
        (self.config, raw)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Quasienergy(f) => (Command::Quasienergy, f),
        Sub::FindDl(f) => (Command::FindDl, f),
        Sub::Anomaly(f) => (Command::Anomaly, f),
        Sub::WkbCompare(f) => (Command::WkbCompare, f),
        Sub::Bloch(f) => (Command::Bloch, f),
        Sub::VerifySuite(f) => (Command::VerifySuite, f),
    };
    let (file, raw) = flags.into_raw(command);
    let config = match config::parse_config(file.as_deref(), raw) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(exit::CONFIG as u8);
        }
    };
    let report = app::execute(&config);
    for line in &report.summary.lines {
        println!("{line}");
    }
    for path in &report.summary.written {
        println!("wrote {}", path.display());
    }
    if report.summary.written.is_empty() && report.error.is_none() {
        println!("no output files (empty format set)");
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
    }
    ExitCode::from(report.exit_code() as u8)
}
