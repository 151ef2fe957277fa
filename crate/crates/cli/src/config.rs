//! Experiment configuration: strict TOML with sections [model], [sampler],
//! [windows], [outputs] and [oracle]. Unknown keys and duplicate keys are
//! errors; command-line flags override file values.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable that overrides the output directory.
pub const OUTPUT_DIR_ENV: &str = "RIESZ_OUTPUT_DIR";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelFile,
    #[serde(default)]
    pub sampler: SamplerFile,
    #[serde(default)]
    pub windows: WindowsFile,
    #[serde(default)]
    pub outputs: OutputsFile,
    #[serde(default)]
    pub oracle: OracleFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub d: Option<usize>,
    pub s: Option<f64>,
    pub n: Option<usize>,
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerFile {
    pub steps: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub seed: Option<u64>,
    pub schedule: Option<String>,
    pub step_size: Option<f64>,
    pub sweeps: Option<usize>,
    pub every: Option<usize>,
    pub chains: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowsFile {
    pub volumes: Option<Vec<f64>>,
    pub boxes: Option<Vec<BoxSpec>>,
    pub shifts: Option<Vec<Vec<f64>>>,
    pub fluctuation_sizes: Option<Vec<f64>>,
    pub compensator_p: Option<Vec<f64>>,
    pub compensator_x: Option<Vec<f64>>,
    pub swap_k: Option<usize>,
    pub swap_l: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsFile {
    pub directory: Option<PathBuf>,
    pub formats: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleFile {
    pub points_per_axis: Option<usize>,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: Model,
    pub sampler: Sampler,
    pub windows: Windows,
    pub outputs: Outputs,
    pub oracle: Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Model {
    pub d: usize,
    pub s: f64,
    pub n: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sampler {
    pub steps: u64,
    pub burn_in: u64,
    pub thin: u64,
    pub seed: u64,
    pub schedule: String,
    pub step_size: Option<f64>,
    pub sweeps: usize,
    pub every: usize,
    pub chains: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Windows {
    /// Centred window volumes; empty means each command picks its default.
    pub volumes: Vec<f64>,
    pub boxes: Vec<BoxSpec>,
    pub shifts: Vec<Vec<f64>>,
    pub fluctuation_sizes: Vec<f64>,
    pub compensator_p: Vec<f64>,
    pub compensator_x: Vec<f64>,
    pub swap_k: usize,
    pub swap_l: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outputs {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Oracle {
    pub points_per_axis: usize,
}

pub const SCHEDULES: [&str; 3] = ["plain", "dlr", "swap"];
pub const FORMATS: [&str; 3] = ["csv", "json", "snapshots"];

/// Values given on the command line; each one overrides the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub d: Option<usize>,
    pub s: Option<f64>,
    pub n: Option<usize>,
    pub beta: Option<f64>,
    pub steps: Option<u64>,
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    pub seed: Option<u64>,
    pub schedule: Option<String>,
    pub step_size: Option<f64>,
    pub chains: Option<usize>,
    pub window_volume: Option<f64>,
    pub shifts: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub points_per_axis: Option<usize>,
}

/// Reports the first key defined twice in the same table, with both lines.
pub fn find_duplicate_key(text: &str) -> Option<(String, usize, usize)> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut table = String::new();
    let mut array_index: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(inner) = line.strip_prefix("[[") {
            let name = inner.split("]]").next().unwrap_or("").trim().to_string();
            let k = array_index.entry(name.clone()).or_insert(0);
            *k += 1;
            table = format!("{name}#{k}");
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner.split(']').next().unwrap_or("").trim().to_string();
            let key = format!("[{name}]");
            if let Some(&first) = seen.get(&key) {
                return Some((name, first, line_no));
            }
            seen.insert(key, line_no);
            table = name;
            continue;
        }
        let starts_key = line.chars().next().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '"');
        let Some((key, _)) = line.split_once('=') else { continue };
        if !starts_key {
            continue;
        }
        let key = key.trim().trim_matches('"');
        let full = if table.is_empty() { key.to_string() } else { format!("{table}.{key}") };
        if let Some(&first) = seen.get(&full) {
            let shown = full.split('#').next().unwrap_or(&full).to_string();
            let shown = if full.contains('#') { format!("{shown}.{key}") } else { shown };
            return Some((shown, first, line_no));
        }
        seen.insert(full, line_no);
    }
    None
}

fn key_line(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut table = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(inner) = line.strip_prefix('[') {
            table = inner.trim_start_matches('[').split(']').next().unwrap_or("").trim();
            continue;
        }
        if table == section && line.split_once('=').is_some_and(|(k, _)| k.trim() == key) {
            return Some(i + 1);
        }
    }
    None
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    if let Some((key, a, b)) = find_duplicate_key(text) {
        return Err(CliError::Config(format!("duplicate key `{key}` at lines {a} and {b}")));
    }
    toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
}

pub fn read_config_file(path: &Path) -> Result<(ConfigFile, String), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok((parse_config(&text)?, text))
}

/// Parses and validates a configuration file with no overrides.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    let (file, text) = read_config_file(path)?;
    resolve(&file, &Overrides::default(), Some(&text), true)
}

fn required<T>(value: Option<T>, field: &str, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("missing required field `{field}` (set it in the config or pass {flag})")))
}

/// Merges file and flags, fills defaults and validates the result. The seed
/// is required only for commands that draw random numbers.
pub fn resolve(file: &ConfigFile, o: &Overrides, text: Option<&str>, need_seed: bool) -> Result<ExperimentConfig, CliError> {
    let at = |section: &str, key: &str| {
        text.and_then(|t| key_line(t, section, key)).map(|l| format!(" (line {l})")).unwrap_or_default()
    };
    let d = o.d.or(file.model.d).unwrap_or(1);
    let s = required(o.s.or(file.model.s), "model.s", "--s")?;
    let n = required(o.n.or(file.model.n), "model.n", "--n")?;
    let beta = required(o.beta.or(file.model.beta), "model.beta", "--beta")?;
    if d == 0 {
        return Err(CliError::Config(format!("model.d{}: d must be at least 1", at("model", "d"))));
    }
    if !(s > d as f64 - 1.0 && s < d as f64) {
        return Err(CliError::Config(format!(
            "model.s = {s}{}: s must lie in (d−1, d) = ({}, {d})",
            at("model", "s"),
            d as f64 - 1.0
        )));
    }
    if n < 1 {
        return Err(CliError::Config(format!("model.n{}: n must be at least 1", at("model", "n"))));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(CliError::Config(format!("model.beta = {beta}{}: β must be a positive real", at("model", "beta"))));
    }
    let seed = match o.seed.or(file.sampler.seed) {
        Some(v) => v,
        None if need_seed => return Err(CliError::Config("missing required field `sampler.seed` (set it in the config or pass --seed)".into())),
        None => 0,
    };
    let schedule = o.schedule.clone().or(file.sampler.schedule.clone()).unwrap_or_else(|| "plain".into());
    if !SCHEDULES.contains(&schedule.as_str()) {
        return Err(CliError::Config(format!("sampler.schedule = {schedule:?}{}: expected one of plain, dlr, swap", at("sampler", "schedule"))));
    }
    let steps = o.steps.or(file.sampler.steps).unwrap_or(100_000);
    let burn_in = o.burn_in.or(file.sampler.burn_in).unwrap_or(steps / 10);
    let thin = o.thin.or(file.sampler.thin).unwrap_or(10);
    if burn_in > steps {
        return Err(CliError::Config(format!("sampler.burn_in = {burn_in} exceeds sampler.steps = {steps}")));
    }
    if thin == 0 {
        return Err(CliError::Config("sampler.thin must be at least 1".into()));
    }
    let step_size = o.step_size.or(file.sampler.step_size);
    if step_size.is_some_and(|v| !(v > 0.0)) {
        return Err(CliError::Config("sampler.step_size must be positive".into()));
    }
    let chains = o.chains.or(file.sampler.chains).unwrap_or(1);
    if chains == 0 {
        return Err(CliError::Config("sampler.chains must be at least 1".into()));
    }
    let w = &file.windows;
    let volumes = o.window_volume.map(|v| vec![v]).or(w.volumes.clone()).unwrap_or_default();
    if volumes.iter().any(|&v| !(v > 0.0) || v > n as f64) {
        return Err(CliError::Config("windows.volumes must lie in (0, n]".into()));
    }
    let boxes = w.boxes.clone().unwrap_or_default();
    if boxes.iter().any(|b| b.lower.len() != d || b.upper.len() != d) {
        return Err(CliError::Config("windows.boxes corners must have d coordinates".into()));
    }
    let shifts = o.shifts.clone().map(|v| v.into_iter().map(|u| std::iter::once(u).chain(std::iter::repeat_n(0.0, d - 1)).collect()).collect());
    let shifts: Vec<Vec<f64>> = shifts.or(w.shifts.clone()).unwrap_or_else(|| {
        let l = (n as f64).powf(1.0 / d as f64);
        [0.25, 0.375, 0.5].iter().map(|f| std::iter::once(f * l).chain(std::iter::repeat_n(0.0, d - 1)).collect()).collect()
    });
    if shifts.iter().any(|u| u.len() != d) {
        return Err(CliError::Config("windows.shifts entries must have d coordinates".into()));
    }
    let quarter = n as f64 / 4.0;
    let fluctuation_sizes = w.fluctuation_sizes.clone().unwrap_or_else(|| [1.0, 2.0, 4.0, 8.0].into_iter().filter(|&k| k <= quarter).collect());
    let compensator_p = w.compensator_p.clone().unwrap_or_else(|| [1.0, 2.0, 4.0, 8.0, 16.0].into_iter().filter(|&k| k <= quarter).collect());
    let compensator_x = w.compensator_x.clone().unwrap_or_else(|| vec![0.0; d]);
    if compensator_x.len() != d {
        return Err(CliError::Config("windows.compensator_x must have d coordinates".into()));
    }
    let directory = o
        .output
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or(file.outputs.directory.clone())
        .unwrap_or_else(|| PathBuf::from("riesz-out"));
    let formats = file.outputs.formats.clone().unwrap_or_else(|| FORMATS.iter().map(|f| f.to_string()).collect());
    if let Some(bad) = formats.iter().find(|f| !FORMATS.contains(&f.as_str())) {
        return Err(CliError::Config(format!("outputs.formats: unknown format {bad:?}; expected csv, json or snapshots")));
    }
    let points_per_axis = o.points_per_axis.or(file.oracle.points_per_axis).unwrap_or(24);
    if points_per_axis == 0 || !points_per_axis.is_multiple_of(6) {
        return Err(CliError::Config(format!("oracle.points_per_axis = {points_per_axis}: must be a positive multiple of 6")));
    }
    Ok(ExperimentConfig {
        model: Model { d, s, n, beta },
        sampler: Sampler {
            steps,
            burn_in,
            thin,
            seed,
            schedule,
            step_size,
            sweeps: file.sampler.sweeps.unwrap_or(riesz_core::sampler::DEFAULT_DLR_SWEEPS),
            every: file.sampler.every.unwrap_or(10).max(1),
            chains,
        },
        windows: Windows {
            volumes,
            boxes,
            shifts,
            fluctuation_sizes,
            compensator_p,
            compensator_x,
            swap_k: w.swap_k.unwrap_or(1),
            swap_l: w.swap_l.unwrap_or(2),
        },
        outputs: Outputs { directory, formats },
        oracle: Oracle { points_per_axis },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_keys_name_both_lines() {
        let text = "[model]\nd = 1\ns = 0.5\n\n[sampler]\nseed = 1\n[model2]\nx=1\n";
        assert_eq!(find_duplicate_key(text), None);
        let text = "[model]\nd = 1\ns = 0.5\nn = 8\ns = 0.6\n";
        assert_eq!(find_duplicate_key(text), Some(("model.s".into(), 3, 5)));
        let text = "[model]\nd = 1\n[sampler]\nseed = 2\n[model]\nn = 3\n";
        assert_eq!(find_duplicate_key(text), Some(("model".into(), 1, 5)));
        // same key in different tables is fine
        assert_eq!(find_duplicate_key("[a]\nx = 1\n[b]\nx = 2\n"), None);
    }

    #[test]
    fn key_lines() {
        let text = "[model]\nd = 1\ns = 1.5\n";
        assert_eq!(key_line(text, "model", "s"), Some(3));
        assert_eq!(key_line(text, "sampler", "s"), None);
    }
}
