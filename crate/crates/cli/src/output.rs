//! Output directory writer. Every file gets a `<file>.meta.json` sidecar
//! holding the resolved configuration and the artifact version. Nothing
//! time-dependent is written, so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Fixed float rendering used in every CSV.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutputDir {
    path: PathBuf,
    command: String,
    config: serde_json::Value,
    written: Vec<PathBuf>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl OutputDir {
    pub fn create(path: &Path, command: &str, config: &impl Serialize) -> Result<Self, CliError> {
        fs::create_dir_all(path).map_err(|e| io_err(path, e))?;
        let config = serde_json::to_value(config).map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self { path: path.to_path_buf(), command: command.into(), config, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn sidecar(&mut self, file: &Path, kind: &str) -> Result<(), CliError> {
        let meta = json!({
            "artifact": "riesz",
            "version": VERSION,
            "command": self.command,
            "file": file.file_name().map(|f| f.to_string_lossy().into_owned()),
            "format": kind,
            "rng": riesz_core::sampler::RNG_ALGORITHM,
            "quadrature": riesz_core::oracle::SCHEME,
            "config": self.config,
        });
        let mut name = file.as_os_str().to_owned();
        name.push(".meta.json");
        let side = PathBuf::from(name);
        let text = serde_json::to_string_pretty(&meta).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        fs::write(&side, text).map_err(|e| io_err(&side, e))
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let file = self.path.join(name);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(&file).map_err(|e| io_err(&file, e))?;
        w.write_record(header).map_err(|e| io_err(&file, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io_err(&file, e))?;
        }
        w.flush().map_err(|e| io_err(&file, e))?;
        self.sidecar(&file, "csv")?;
        self.written.push(file.clone());
        Ok(file)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf, CliError> {
        let file = self.path.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))? + "\n";
        fs::write(&file, text).map_err(|e| io_err(&file, e))?;
        self.sidecar(&file, "json")?;
        self.written.push(file.clone());
        Ok(file)
    }

    pub fn write_lines(&mut self, name: &str, lines: &[String]) -> Result<PathBuf, CliError> {
        let file = self.path.join(name);
        let mut text = lines.join("\n");
        if !lines.is_empty() {
            text.push('\n');
        }
        fs::write(&file, text).map_err(|e| io_err(&file, e))?;
        self.sidecar(&file, "ndjson")?;
        self.written.push(file.clone());
        Ok(file)
    }
}

/// Rows of a report table in long format.
pub const REPORT_HEADER: [&str; 11] = ["name", "value", "stderr", "n_samples", "d", "s", "n", "beta", "seed", "schedule", "inconclusive"];

pub fn report_row(r: &riesz_core::estimators::EstimateReport) -> Vec<String> {
    let m = &r.metadata;
    vec![
        r.name.clone(),
        fmt_f64(r.value),
        fmt_f64(r.stderr),
        r.n_samples.to_string(),
        m.d.to_string(),
        fmt_f64(m.s),
        m.n.to_string(),
        fmt_f64(m.beta),
        m.seed.to_string(),
        m.schedule.clone(),
        r.inconclusive.to_string(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 6.02e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }
}
