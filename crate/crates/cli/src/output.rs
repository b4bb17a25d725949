//! Report files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

pub const SCHEMA: &str = "1";

#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub schema: &'static str,
    pub command: &'static str,
    pub version: &'static str,
    pub config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<nlslope_core::Calibration>,
    pub inputs: BTreeMap<&'static str, String>,
    pub output: String,
    /// `explicit` when the seed came from the command line or a config file.
    pub seed_source: &'static str,
    pub files: Vec<&'static str>,
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Writes a CSV with `header` and one row per entry of `rows`.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(header).map_err(|e| io_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Formats an optional value; missing values become an empty field.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| v.to_string())
}

/// Command-line seed, else the configured one, else a fresh random seed.
pub fn resolve_seed(flag: Option<u64>, configured: Option<u64>) -> (u64, &'static str) {
    match flag.or(configured) {
        Some(s) => (s, "explicit"),
        None => (rand::random(), "generated"),
    }
}

pub fn path_string(p: &Path) -> String {
    p.display().to_string()
}
