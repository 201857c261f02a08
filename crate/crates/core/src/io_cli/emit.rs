//! Atomic report output.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{Error, Result};
use crate::io_cli::report::{
    emissions_csv, margins_csv, screening_csv, sha256_hex, spectrum_csv, summary_text, RunReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OutputFormat {
    Summary,
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "summary" => Ok(OutputFormat::Summary),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown output format `{other}` (expected summary, csv, json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn rendered(r: &RunReport, formats: &[OutputFormat]) -> Result<Vec<(&'static str, String)>> {
    let mut formats = formats.to_vec();
    formats.sort();
    formats.dedup();
    let mut files = Vec::new();
    for f in formats {
        match f {
            OutputFormat::Summary => files.push(("summary.txt", summary_text(r))),
            OutputFormat::Json => files.push(("report.json", r.body_json()?)),
            OutputFormat::Csv => {
                files.push(("emissions.csv", emissions_csv(&r.log)));
                files.push(("margins.csv", margins_csv(&r.margins)));
                files.push(("screening.csv", screening_csv(&r.screening)));
                files.push(("spectrum.csv", spectrum_csv(&r.spectrum)));
            }
        }
    }
    Ok(files)
}

/// Writes `files` into `out_dir`. Every file is staged to a temporary in the
/// same directory first; nothing is renamed into place unless all staged writes succeed.
pub fn write_atomically(out_dir: &Path, files: &[(&str, String)]) -> Result<Manifest> {
    if files.is_empty() {
        return Ok(Manifest::default());
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut staged = Vec::with_capacity(files.len());
    for (name, body) in files {
        let mut tmp = NamedTempFile::new_in(out_dir).map_err(|e| Error::io(out_dir, e))?;
        tmp.write_all(body.as_bytes())
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| Error::io(out_dir.join(name), e))?;
        staged.push((tmp, out_dir.join(name), sha256_hex(body.as_bytes())));
    }
    let mut manifest = Manifest::default();
    for (tmp, path, sha256) in staged {
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        manifest.files.push(ManifestEntry { path, sha256 });
    }
    Ok(manifest)
}

pub fn emit_report(r: &RunReport, out_dir: &Path, formats: &[OutputFormat]) -> Result<Manifest> {
    write_atomically(out_dir, &rendered(r, formats)?)
}
