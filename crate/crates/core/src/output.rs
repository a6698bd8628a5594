// SPDX-License-Identifier: Apache-2.0

//! Result files. Every file opens with a provenance block: `#`-prefixed
//! lines for CSV and plot data, a `provenance` object for JSON.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{Format, RunConfig};
use crate::floquet::{self, SearchOptions};
use crate::lattice::{self, IntegratorSettings};

/// Bumped whenever a column layout or JSON field changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema_version: u32,
    pub command: String,
    /// SHA-256 of the canonical TOML form of the validated configuration.
    pub config_sha256: String,
    pub tolerances: BTreeMap<&'static str, f64>,
}

pub fn config_hash(config: &RunConfig) -> String {
    hex::encode(Sha256::digest(config.to_toml().as_bytes()))
}

pub fn tolerances() -> BTreeMap<&'static str, f64> {
    let lat = IntegratorSettings::default();
    let mono = floquet::monodromy_settings();
    let search = SearchOptions::default();
    BTreeMap::from([
        ("lattice_rel_tol", lat.rel_tol),
        ("lattice_abs_tol", lat.abs_tol),
        ("lattice_max_step_per_period", lat.max_step),
        ("edge_threshold", lattice::EDGE_THRESHOLD),
        ("norm_tolerance", lattice::NORM_TOLERANCE),
        ("monodromy_rel_tol", mono.rel_tol),
        ("monodromy_abs_tol", mono.abs_tol),
        ("monodromy_max_step_per_period", floquet::MONODROMY_MAX_STEP),
        ("det_failure", floquet::DET_FAILURE),
        ("touch_tol", search.touch_tol),
        ("gamma_xtol", search.xtol),
    ])
}

impl Provenance {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            schema_version: SCHEMA_VERSION,
            command: config.command.name().to_string(),
            config_sha256: config_hash(config),
            tolerances: tolerances(),
        }
    }

    pub fn header_lines(&self) -> Vec<String> {
        let mut lines = vec![
            format!("# {} {} (schema {})", self.tool, self.version, self.schema_version),
            format!("# command: {}", self.command),
            format!("# config_sha256: {}", self.config_sha256),
        ];
        lines.extend(self.tolerances.iter().map(|(k, v)| format!("# tolerance {k}: {v:e}")));
        lines
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriteError {
    pub path: PathBuf,
    pub message: String,
}

impl fmt::Display for WriteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot write {}: {}", self.path.display(), self.message)
    }
}

impl std::error::Error for WriteError {}

/// Writes the selected formats into the output directory and records
/// every file produced.
pub struct Sink {
    dir: PathBuf,
    formats: Vec<Format>,
    provenance: Provenance,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(config: &RunConfig) -> Self {
        Self {
            dir: config.output_dir.clone(),
            formats: config.formats.iter().copied().collect(),
            provenance: Provenance::new(config),
            written: Vec::new(),
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>), WriteError> {
        let path = self.dir.join(name);
        let fail = |e: std::io::Error| WriteError { path: path.clone(), message: e.to_string() };
        fs::create_dir_all(&self.dir).map_err(|e| WriteError { path: self.dir.clone(), message: e.to_string() })?;
        let file = File::create(&path).map_err(fail)?;
        Ok((path, BufWriter::new(file)))
    }

    fn finish(&mut self, path: PathBuf, mut out: BufWriter<File>) -> Result<(), WriteError> {
        out.flush().map_err(|e| WriteError { path: path.clone(), message: e.to_string() })?;
        self.written.push(path);
        Ok(())
    }

    fn header(&self, out: &mut impl Write, path: &Path) -> Result<(), WriteError> {
        for line in self.provenance.header_lines() {
            writeln!(out, "{line}").map_err(|e| WriteError { path: path.to_path_buf(), message: e.to_string() })?;
        }
        Ok(())
    }

    /// `name.csv` with one record per row and a header from the field names.
    pub fn csv<R: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = R>) -> Result<(), WriteError> {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let (path, mut out) = self.create(&format!("{name}.csv"))?;
        self.header(&mut out, &path)?;
        let fail = |e: csv::Error| WriteError { path: path.clone(), message: e.to_string() };
        let mut writer = csv::Writer::from_writer(out);
        for row in rows {
            writer.serialize(row).map_err(fail)?;
        }
        let out = writer.into_inner().map_err(|e| WriteError { path: path.clone(), message: e.to_string() })?;
        self.finish(path, out)
    }

    /// `name.json` holding `{ "provenance": …, "result": … }`.
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> Result<(), WriteError> {
        if !self.wants(Format::Json) {
            return Ok(());
        }
        #[derive(Serialize)]
        struct Document<'a, T> {
            provenance: &'a Provenance,
            result: &'a T,
        }
        let (path, mut out) = self.create(&format!("{name}.json"))?;
        let doc = Document { provenance: &self.provenance, result };
        serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| WriteError { path: path.clone(), message: e.to_string() })?;
        writeln!(out).map_err(|e| WriteError { path: path.clone(), message: e.to_string() })?;
        self.finish(path, out)
    }

    /// `name.dat`: whitespace-separated columns; an empty row starts a new
    /// block (gnuplot's convention for heat maps).
    pub fn plot_data(&mut self, name: &str, columns: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), WriteError> {
        if !self.wants(Format::PlotData) {
            return Ok(());
        }
        let (path, mut out) = self.create(&format!("{name}.dat"))?;
        self.header(&mut out, &path)?;
        let fail = |e: std::io::Error| WriteError { path: path.clone(), message: e.to_string() };
        writeln!(out, "# {}", columns.join(" ")).map_err(fail)?;
        for row in rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(out, "{}", line.join(" ")).map_err(fail)?;
        }
        self.finish(path, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_toml, validate};

    fn config(dir: &Path, formats: &str) -> RunConfig {
        let src = format!(
            "command = \"verify-suite\"\noutput_dir = {:?}\nformats = {formats}\n",
            dir.display().to_string()
        );
        validate(parse_toml(&src).unwrap(), None).unwrap()
    }

    #[derive(Serialize)]
    struct Row {
        label: String,
        value: f64,
    }

    #[test]
    fn csv_has_provenance_and_quoting() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path(), "[\"csv\"]");
        let mut sink = Sink::new(&cfg);
        sink.csv("rows", [Row { label: "a,b".into(), value: 1.5 }]).unwrap();
        let text = fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert!(text.starts_with("# dynloc"));
        assert!(text.contains(&format!("# config_sha256: {}", config_hash(&cfg))));
        assert!(text.contains("label,value\n\"a,b\",1.5\n"));
        sink.json("rows", &1).unwrap();
        assert_eq!(sink.written().len(), 1);
    }

    #[test]
    fn json_wraps_result() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = Sink::new(&config(dir.path(), "[\"json\", \"plot-data\"]"));
        sink.json("r", &vec![1, 2]).unwrap();
        sink.plot_data("p", &["x", "y"], [vec![0.0, 1.0], vec![], vec![1.0, 2.0]]).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
        assert_eq!(doc["result"], serde_json::json!([1, 2]));
        assert_eq!(doc["provenance"]["schema_version"], 1);
        let dat = fs::read_to_string(dir.path().join("p.dat")).unwrap();
        let data: Vec<&str> = dat.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 3);
        assert_eq!(data[1], "");
    }

    #[test]
    fn empty_format_set_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut sink = Sink::new(&config(&dir.path().join("never"), "[]"));
        sink.csv("x", [1.0]).unwrap();
        sink.json("x", &1.0).unwrap();
        sink.plot_data("x", &["a"], [vec![1.0]]).unwrap();
        assert!(sink.written().is_empty());
        assert!(!dir.path().join("never").exists());
    }

    #[test]
    fn unwritable_directory_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let mut sink = Sink::new(&config(&blocker.join("sub"), "[\"csv\"]"));
        let err = sink.csv("x", [1.0]).unwrap_err();
        assert!(err.path.starts_with(&blocker));
    }

    #[test]
    fn hash_tracks_config_content() {
        let dir = tempfile::tempdir().unwrap();
        let a = config(dir.path(), "[\"csv\"]");
        let b = config(dir.path(), "[\"json\"]");
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
