// SPDX-License-Identifier: Apache-2.0

//! Command execution: runs a validated [`RunConfig`], writes its outputs
//! and maps failures onto stable exit codes.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;

use crate::acceptance::{self, CriterionReport};
use crate::analytic::{self, PtPhase};
use crate::config::{Command, ConfigError, RunConfig};
use crate::error::Error;
use crate::lattice::{self, InitialState, IntegratorSettings};
use crate::output::{Sink, WriteError};
use crate::sweeps::{self, AnomalyEntry, BlochStudy, SampleSource, SweepResult};
use crate::types::{DLPoint, DriveSpec, LatticeSpec};

/// Process exit codes. Stable across releases.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// Any failure not covered below.
    pub const FAILURE: i32 = 1;
    /// Unreadable, malformed or inconsistent configuration.
    pub const CONFIG: i32 = 2;
    /// Edge occupation exceeded the threshold at the largest truncation.
    pub const TRUNCATION: i32 = 3;
    /// Integrator, determinant or pairing checks failed.
    pub const ACCURACY: i32 = 4;
    /// An output file could not be written.
    pub const WRITE: i32 = 5;
    /// verify-suite ran and at least one criterion failed.
    pub const VERIFY: i32 = 6;
}

/// Bloch-study samples per reference period.
const BLOCH_SAMPLES_PER_PERIOD: usize = 200;

#[derive(Debug)]
pub enum AppError {
    Config(ConfigError),
    Compute(Error),
    /// Some sweep operating points failed; the rest were written.
    PartialSweep { failures: Vec<(f64, Error)> },
    Write(WriteError),
    Verify { failed: Vec<u8> },
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::TruncationInsufficient { .. } => exit::TRUNCATION,
        Error::Accuracy(_) | Error::StepUnderflow { .. } => exit::ACCURACY,
        _ => exit::FAILURE,
    }
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => exit::CONFIG,
            AppError::Compute(e) => error_code(e),
            AppError::PartialSweep { failures } => {
                let codes: Vec<i32> = failures.iter().map(|(_, e)| error_code(e)).collect();
                if codes.contains(&exit::TRUNCATION) {
                    exit::TRUNCATION
                } else if codes.contains(&exit::ACCURACY) {
                    exit::ACCURACY
                } else {
                    exit::FAILURE
                }
            }
            AppError::Write(_) => exit::WRITE,
            AppError::Verify { .. } => exit::VERIFY,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Config(e) => write!(f, "config error: {e}"),
            AppError::Compute(e) => write!(f, "{e}"),
            AppError::PartialSweep { failures } => {
                write!(f, "{} operating point(s) failed:", failures.len())?;
                for (w, e) in failures {
                    write!(f, "\n  omega/sigma = {w}: {e}")?;
                }
                Ok(())
            }
            AppError::Write(e) => write!(f, "{e}"),
            AppError::Verify { failed } => write!(f, "acceptance criteria failed: {failed:?}"),
        }
    }
}

impl std::error::Error for AppError {}

impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        AppError::Config(e)
    }
}

impl From<Error> for AppError {
    fn from(e: Error) -> Self {
        AppError::Compute(e)
    }
}

impl From<WriteError> for AppError {
    fn from(e: WriteError) -> Self {
        AppError::Write(e)
    }
}

/// What a run printed and wrote.
#[derive(Debug, Default)]
pub struct Summary {
    pub lines: Vec<String>,
    pub written: Vec<PathBuf>,
}

/// Outcome of [`execute`]: the summary is returned in both cases so partial
/// results are still reported.
pub struct Report {
    pub summary: Summary,
    pub error: Option<AppError>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(exit::SUCCESS, AppError::exit_code)
    }
}

pub fn execute(config: &RunConfig) -> Report {
    let mut sink = Sink::new(config);
    let mut lines = Vec::new();
    let result = match config.command {
        Command::Simulate => simulate(config, &mut sink, &mut lines),
        Command::Quasienergy => quasienergy(config, &mut sink, &mut lines),
        Command::FindDl => find_dl(config, &mut sink, &mut lines),
        Command::WkbCompare => wkb_compare(config, &mut sink, &mut lines),
        Command::Anomaly => anomaly(config, &mut sink, &mut lines),
        Command::Bloch => bloch(config, &mut sink, &mut lines),
        Command::VerifySuite => verify_suite(&mut sink, &mut lines),
    };
    Report {
        summary: Summary { lines, written: sink.written().to_vec() },
        error: result.err(),
    }
}

fn lattice_and_drive(config: &RunConfig) -> (&LatticeSpec, &DriveSpec) {
    let lattice = config.lattice.as_ref().expect("validated: lattice present");
    let drive = config.drive.as_ref().expect("validated: drive present");
    (lattice, drive)
}

fn default_site(lattice: &LatticeSpec) -> usize {
    if lattice.law().is_semi_infinite() {
        0
    } else {
        lattice.truncation() / 2
    }
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    t_over_period: f64,
    site: usize,
    re: f64,
    im: f64,
    probability: f64,
}

#[derive(Serialize)]
struct RevivalRow {
    cycle: usize,
    t: f64,
    fidelity: f64,
    initial_site_probability: f64,
}

#[derive(Serialize)]
struct SimulateSummary<'a> {
    lattice: &'a LatticeSpec,
    drive: &'a DriveSpec,
    initial_site: usize,
    truncation_used: usize,
    period: f64,
    t_end: f64,
    revival_fidelity: &'a [f64],
    revival_site_deltas: Vec<Vec<f64>>,
    max_norm_drift: f64,
    max_edge_occupation: f64,
}

fn simulate(config: &RunConfig, sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let (lattice, drive) = lattice_and_drive(config);
    let site = config.initial_site.unwrap_or_else(|| default_site(lattice));
    let period = lattice::reference_period(drive, lattice.sigma());
    let t_end = config.cycles as f64 * period;
    let settings = IntegratorSettings::default();
    let (used, traj) = lattice::evolve_auto(lattice, drive, &InitialState::Site(site), t_end, &settings)?;
    let fidelity = lattice::revival_fidelity(&traj, period, config.cycles)?;
    let deltas = (1..=config.cycles)
        .map(|l| lattice::revival_site_deltas(&traj, period, l))
        .collect::<Result<Vec<_>, _>>()?;

    lines.push(format!(
        "simulate: {} lattice, sigma = {}, N = {} (requested {}), site {site}, {} cycle(s) of T = {period:.6}",
        lattice.law().name(),
        lattice.sigma(),
        used.truncation(),
        lattice.truncation(),
        config.cycles
    ));
    for (l, f) in fidelity.iter().enumerate() {
        lines.push(format!("  revival fidelity at t = {}T: {f:.6}", l + 1));
    }
    lines.push(format!("  max norm drift {:.2e}", traj.max_norm_drift()));

    let rows = traj.times.iter().zip(&traj.states).flat_map(|(&t, state)| {
        state.iter().enumerate().map(move |(n, c)| TrajectoryRow {
            t,
            t_over_period: t / period,
            site: n,
            re: c.re,
            im: c.im,
            probability: c.norm_sqr(),
        })
    });
    sink.csv("trajectory", rows)?;

    let revivals: Vec<RevivalRow> = fidelity
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let t = (k + 1) as f64 * period;
            let p = lattice::probabilities_at(&traj, t).map_or(f64::NAN, |p| p[site]);
            RevivalRow { cycle: k + 1, t, fidelity: f, initial_site_probability: p }
        })
        .collect();
    sink.csv("revivals", &revivals)?;

    sink.json(
        "simulate",
        &SimulateSummary {
            lattice: &used,
            drive,
            initial_site: site,
            truncation_used: used.truncation(),
            period,
            t_end,
            revival_fidelity: &fidelity,
            revival_site_deltas: deltas,
            max_norm_drift: traj.max_norm_drift(),
            max_edge_occupation: traj.edge_occupation.iter().copied().fold(0.0, f64::max),
        },
    )?;

    let heat = traj.times.iter().zip(&traj.states).flat_map(|(&t, state)| {
        state
            .iter()
            .enumerate()
            .map(move |(n, c)| vec![t / period, n as f64, c.norm()])
            .chain(std::iter::once(Vec::new()))
    });
    sink.plot_data("heatmap", &["t/T", "n", "|c_n|"], heat)?;
    let revival_curve = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, state)| vec![t / period, state[site].norm_sqr()]);
    sink.plot_data("revival", &["t/T", "|c_site|^2"], revival_curve)?;
    Ok(())
}

fn run_sweep(config: &RunConfig, lines: &mut Vec<String>) -> Result<SweepResult, AppError> {
    let plan = config.sweep.as_ref().expect("validated: sweep present");
    let result = sweeps::run_quasi_energy_sweep(plan)?;
    let range = &plan.gamma_range;
    lines.push(format!(
        "{}: {} operating point(s), gamma {}..{} step {}",
        config.command,
        plan.omega_over_sigma.len(),
        range.min,
        range.max,
        range.step
    ));
    for p in &result.points {
        match &p.error {
            Some(e) => lines.push(format!("  omega/sigma = {}: FAILED: {e}", p.omega_over_sigma)),
            None => {
                let gammas: Vec<String> = p.dl_points.iter().map(|d| format!("{:.6}", d.gamma0)).collect();
                lines.push(format!("  omega/sigma = {}: DL points at gamma = [{}]", p.omega_over_sigma, gammas.join(", ")));
                if !p.flagged.is_empty() {
                    lines.push(format!("    flagged (fidelity < {}): {:?}", sweeps::FIDELITY_FLAG, p.flagged));
                }
            }
        }
    }
    Ok(result)
}

fn sweep_failures(result: &SweepResult) -> Result<(), AppError> {
    let failures: Vec<(f64, Error)> = result
        .points
        .iter()
        .filter_map(|p| p.cause.clone().map(|e| (p.omega_over_sigma, e)))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(AppError::PartialSweep { failures })
    }
}

#[derive(Serialize)]
struct QuasiEnergyRow {
    omega_over_sigma: f64,
    gamma: f64,
    re_mu1: f64,
    im_mu1: f64,
    re_mu2: f64,
    im_mu2: f64,
    abs_trace: f64,
}

#[derive(Serialize)]
struct DlRow {
    omega_over_sigma: f64,
    gamma0: f64,
    f0_over_sigma: f64,
    kind: &'static str,
    residual: f64,
    fidelity: Option<f64>,
}

fn dl_rows(result: &SweepResult) -> Vec<DlRow> {
    let row = |p: &DLPoint| DlRow {
        omega_over_sigma: p.omega_over_sigma,
        gamma0: p.gamma0,
        f0_over_sigma: p.gamma0 * p.omega_over_sigma,
        kind: match p.kind {
            crate::types::CrossingKind::SignChange => "sign-change",
            crate::types::CrossingKind::Touch => "touch",
        },
        residual: p.residual,
        fidelity: p.fidelity,
    };
    result.points.iter().flat_map(|p| p.dl_points.iter().map(row)).collect()
}

fn quasienergy(config: &RunConfig, sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let result = run_sweep(config, lines)?;
    let rows: Vec<QuasiEnergyRow> = result
        .points
        .iter()
        .flat_map(|p| {
            p.samples.iter().map(|s| QuasiEnergyRow {
                omega_over_sigma: p.omega_over_sigma,
                gamma: s.gamma,
                re_mu1: s.mu1.re,
                im_mu1: s.mu1.im,
                re_mu2: s.mu2.re,
                im_mu2: s.mu2.im,
                abs_trace: s.abs_trace,
            })
        })
        .collect();
    sink.csv("quasienergy", &rows)?;
    sink.csv("dl_points", dl_rows(&result))?;
    sink.json("quasienergy", &result)?;
    let curves = result.points.iter().flat_map(|p| {
        p.samples
            .iter()
            .map(|s| vec![s.gamma, s.mu1.re, s.mu1.im, s.mu2.re, s.mu2.im])
            .chain(std::iter::once(Vec::new()))
    });
    sink.plot_data("quasienergy", &["gamma", "re_mu1", "im_mu1", "re_mu2", "im_mu2"], curves)?;
    sweep_failures(&result)
}

fn find_dl(config: &RunConfig, sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let result = run_sweep(config, lines)?;
    let rows = dl_rows(&result);
    sink.csv("dl_points", &rows)?;
    sink.json("dl_points", &rows)?;
    sink.plot_data(
        "dl_points",
        &["omega_over_sigma", "gamma0"],
        rows.iter().map(|r| vec![r.omega_over_sigma, r.gamma0]),
    )?;
    sweep_failures(&result)
}

#[derive(Serialize)]
struct WkbRow {
    omega_over_sigma: f64,
    gamma: f64,
    im_mu1: f64,
    im_mu1_wkb: f64,
    relative_deviation: f64,
}

#[derive(Serialize)]
struct WkbSummary {
    omega_over_sigma: f64,
    max_relative_deviation: Option<f64>,
    samples: usize,
}

fn wkb_compare(config: &RunConfig, sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let result = run_sweep(config, lines)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for p in &result.points {
        let wkb = p.wkb.as_deref().unwrap_or_default();
        for w in wkb {
            if let Some(s) = p.samples.iter().find(|s| s.gamma == w.gamma) {
                rows.push(WkbRow {
                    omega_over_sigma: p.omega_over_sigma,
                    gamma: w.gamma,
                    im_mu1: s.mu1.im,
                    im_mu1_wkb: w.mu1.im,
                    relative_deviation: (w.mu1.im - s.mu1.im).abs() / s.mu1.im.abs(),
                });
            }
        }
        let dev = p.wkb_max_relative_deviation();
        if p.error.is_none() {
            lines.push(format!(
                "  omega/sigma = {}: max relative WKB deviation {} over {} point(s)",
                p.omega_over_sigma,
                dev.map_or("n/a".to_string(), |d| format!("{d:.4}")),
                wkb.len()
            ));
        }
        summary.push(WkbSummary { omega_over_sigma: p.omega_over_sigma, max_relative_deviation: dev, samples: wkb.len() });
    }
    sink.csv("wkb_compare", &rows)?;
    sink.json("wkb_compare", &summary)?;
    let mut curves = Vec::new();
    let mut last = None;
    for r in &rows {
        if last.is_some_and(|w| w != r.omega_over_sigma) {
            curves.push(Vec::new());
        }
        last = Some(r.omega_over_sigma);
        curves.push(vec![r.gamma, r.im_mu1, r.im_mu1_wkb]);
    }
    sink.plot_data("wkb_compare", &["gamma", "im_mu1", "im_mu1_wkb"], curves)?;
    sweep_failures(&result)
}

#[derive(Serialize)]
struct AnomalyRow {
    omega_over_sigma: f64,
    status: &'static str,
    gamma0: Option<f64>,
    f0_over_sigma: Option<f64>,
    gamma_max: Option<f64>,
}

fn anomaly(config: &RunConfig, sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let plan = config.sweep.as_ref().expect("validated: sweep present");
    let range = &plan.gamma_range;
    let entries = sweeps::anomaly_curve(&plan.omega_over_sigma, range.max, range.step, plan.execution)?;
    lines.push(format!("anomaly: first DL point for gamma in [0, {}], step {}", range.max, range.step));
    let rows: Vec<AnomalyRow> = entries
        .iter()
        .map(|e| match *e {
            AnomalyEntry::Found { omega_over_sigma, gamma0, force } => {
                lines.push(format!("  omega/sigma = {omega_over_sigma}: Gamma0 = {gamma0:.6}, F0/sigma = {force:.6}"));
                AnomalyRow { omega_over_sigma, status: "found", gamma0: Some(gamma0), f0_over_sigma: Some(force), gamma_max: None }
            }
            AnomalyEntry::NotFound { omega_over_sigma, gamma_max } => {
                lines.push(format!("  omega/sigma = {omega_over_sigma}: none below gamma = {gamma_max}"));
                AnomalyRow { omega_over_sigma, status: "not-found", gamma0: None, f0_over_sigma: None, gamma_max: Some(gamma_max) }
            }
        })
        .collect();
    sink.csv("anomaly", &rows)?;
    sink.json("anomaly", &entries)?;
    let found = entries.iter().filter_map(|e| match *e {
        AnomalyEntry::Found { omega_over_sigma, gamma0, force } => Some(vec![omega_over_sigma, gamma0, force]),
        AnomalyEntry::NotFound { .. } => None,
    });
    sink.plot_data("anomaly", &["omega_over_sigma", "gamma0", "f0_over_sigma"], found)?;
    Ok(())
}

#[derive(Serialize)]
struct BlochRow {
    t: f64,
    fidelity: f64,
    source: SampleSource,
}

fn bloch(config: &RunConfig, sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let (lattice, drive) = lattice_and_drive(config);
    let f0 = drive.f0();
    let sigma = lattice.sigma();
    let period = analytic::bloch_period(f0, sigma).unwrap_or_else(|_| lattice::reference_period(drive, sigma));
    let t_end = config.cycles as f64 * period;
    let samples = config.cycles * BLOCH_SAMPLES_PER_PERIOD;
    let study: BlochStudy = sweeps::bloch_study(lattice, f0, t_end, samples, &IntegratorSettings::default())?;
    let PtPhase { phase, .. } = study.phase;
    lines.push(format!(
        "bloch: {} lattice, sigma = {sigma}, F0 = {f0}, phase {phase:?}, t_end = {t_end:.6}, N = {}",
        lattice.law().name(),
        study.truncation
    ));
    let show = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.6}"));
    lines.push(format!(
        "  analytic period {}, measured revival {}, max revival {}",
        show(study.analytic_period),
        show(study.measured_period),
        show(study.max_revival)
    ));
    if let Some(err) = study.relative_period_error() {
        lines.push(format!("  relative period error {err:.2e}"));
    }
    if study.source.contains(&SampleSource::ClosedForm) {
        lines.push("  continued with the closed-form edge return probability past the largest truncation".to_string());
    }
    let rows = study
        .times
        .iter()
        .zip(&study.fidelity)
        .zip(&study.source)
        .map(|((&t, &fidelity), &source)| BlochRow { t, fidelity, source });
    sink.csv("bloch", rows)?;
    sink.json("bloch", &study)?;
    sink.plot_data(
        "bloch",
        &["t", "fidelity"],
        study.times.iter().zip(&study.fidelity).map(|(&t, &f)| vec![t, f]),
    )?;
    Ok(())
}

#[derive(Serialize)]
struct AcceptanceRow<'a> {
    criterion: u8,
    title: &'a str,
    status: &'static str,
    seconds: f64,
    limit_seconds: f64,
    detail: &'a str,
}

fn verify_suite(sink: &mut Sink, lines: &mut Vec<String>) -> Result<(), AppError> {
    let reports: Vec<CriterionReport> = acceptance::run_all();
    lines.extend(reports.iter().map(CriterionReport::line));
    let passed = reports.iter().filter(|r| r.passed).count();
    lines.push(format!("{passed}/{} criteria passed", reports.len()));
    let rows = reports.iter().map(|r| AcceptanceRow {
        criterion: r.id,
        title: r.title,
        status: if r.passed { "pass" } else { "fail" },
        seconds: r.elapsed.as_secs_f64(),
        limit_seconds: r.limit_seconds,
        detail: &r.detail,
    });
    sink.csv("acceptance", rows)?;
    sink.json("acceptance", &reports)?;
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(AppError::Verify { failed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_toml, validate};
    use std::fs;

    fn run(toml: &str) -> (Report, tempfile::TempDir) {
        let dir = tempfile::tempdir().unwrap();
        let src = format!("output_dir = {:?}\n{toml}", dir.path().display().to_string());
        let cfg = validate(parse_toml(&src).unwrap(), None).unwrap();
        (execute(&cfg), dir)
    }

    #[test]
    fn simulate_writes_heat_map_with_revivals() {
        let (report, dir) = run(
            "command = \"simulate\"\nformats = [\"plot-data\", \"json\"]\n[lattice]\nlaw = \"pseudo-glauber-fock\"\nsigma = 1.0\n[drive]\nwaveform = \"sinusoidal\"\nomega = 1.0\ngamma = 3.353\n",
        );
        assert_eq!(report.exit_code(), exit::SUCCESS, "{:?}", report.error);
        let heat = fs::read_to_string(dir.path().join("heatmap.dat")).unwrap();
        assert!(heat.starts_with("# dynloc"));
        // |c_0| at t/T = 1, 2, 3
        let mut revivals = 0;
        for line in heat.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
            let v: Vec<f64> = line.split(' ').map(|x| x.parse().unwrap()).collect();
            let cycle = v[0].round();
            if v[1] == 0.0 && cycle >= 1.0 && (v[0] - cycle).abs() < 1e-12 {
                assert!(v[2] > 0.99, "|c0| = {} at t/T = {}", v[2], v[0]);
                revivals += 1;
            }
        }
        assert_eq!(revivals, 3);
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("simulate.json")).unwrap()).unwrap();
        assert_eq!(doc["result"]["revival_fidelity"].as_array().unwrap().len(), 3);
        assert!(!dir.path().join("trajectory.csv").exists());
    }

    #[test]
    fn quasienergy_curve_crosses_at_reference_point() {
        let (report, dir) = run(
            "command = \"quasienergy\"\nformats = [\"csv\"]\n[sweep]\nomega_over_sigma = [1.0]\ngamma_range = { min = 3.0, max = 3.6, step = 0.01 }\n",
        );
        assert_eq!(report.exit_code(), exit::SUCCESS);
        let text = fs::read_to_string(dir.path().join("quasienergy.csv")).unwrap();
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let rows: Vec<(f64, f64)> = rdr
            .records()
            .map(|r| {
                let r = r.unwrap();
                (r[1].parse().unwrap(), r[3].parse().unwrap())
            })
            .collect();
        // Im μ₁ dips to zero at Γ ≈ 3.353
        let (g_min, im_min) = rows.iter().copied().fold((0.0, f64::INFINITY), |a, r| if r.1 < a.1 { r } else { a });
        assert!((g_min - 3.353).abs() <= 0.01 && im_min < 5e-3, "{g_min} {im_min}");
        let dl = fs::read_to_string(dir.path().join("dl_points.csv")).unwrap();
        assert!(dl.contains("3.352"));
    }

    #[test]
    fn empty_formats_write_nothing() {
        let (report, dir) = run(
            "command = \"anomaly\"\nformats = []\n[sweep]\nomega_over_sigma = [5.0]\ngamma_range = { min = 0.0, max = 3.0, step = 0.02 }\n",
        );
        assert_eq!(report.exit_code(), exit::SUCCESS);
        assert!(report.summary.written.is_empty());
        assert!(report.summary.lines.iter().any(|l| l.contains("Gamma0 = 2.45")));
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn truncation_failure_maps_to_exit_code() {
        let (report, _dir) = run(
            "command = \"simulate\"\nformats = []\ncycles = 10\n[lattice]\nlaw = \"homogeneous\"\nsigma = 1.0\ntruncation = 8\n[drive]\nwaveform = \"sinusoidal\"\nomega = 1.0\ngamma = 0.5\n",
        );
        assert!(matches!(report.error, Some(AppError::Compute(Error::TruncationInsufficient { .. }))));
        assert_eq!(report.exit_code(), exit::TRUNCATION);
    }

    #[test]
    fn bloch_reports_period() {
        let (report, dir) = run(
            "command = \"bloch\"\nformats = [\"csv\"]\ncycles = 1\n[lattice]\nsigma = 1.0\n[drive]\nf0 = 4.0\n",
        );
        assert_eq!(report.exit_code(), exit::SUCCESS, "{:?}", report.error);
        assert!(report.summary.lines.iter().any(|l| l.contains("analytic period 1.813799")));
        assert!(dir.path().join("bloch.csv").exists());
    }

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [exit::SUCCESS, exit::FAILURE, exit::CONFIG, exit::TRUNCATION, exit::ACCURACY, exit::WRITE, exit::VERIFY];
        let mut sorted = codes.to_vec();
        sorted.dedup();
        assert_eq!(sorted.len(), codes.len());
        let partial = AppError::PartialSweep { failures: vec![(1.0, Error::Accuracy("x".into())), (2.0, Error::NotPeriodic)] };
        assert_eq!(partial.exit_code(), exit::ACCURACY);
    }
}
