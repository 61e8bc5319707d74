//! CSV and TOML emission of a [`ResultBundle`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{parse_config, RunConfig};
use crate::error::{Error, Result};
use crate::runner::{Analysis, Predictions, Provenance, ResultBundle};
use crate::spectra::{FailedPoint, Spectrum};

pub const CSV_HEADER: &str = "coordinate,transmission,im_rho21";
pub const SUMMARY_FILE: &str = "summary.toml";

/// One row per sample, 12 significant digits.
pub fn spectrum_csv(spectrum: Option<&Spectrum>) -> String {
    let mut out = String::with_capacity(64 * (1 + spectrum.map_or(0, |s| s.samples.len())));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in spectrum.map(|s| s.samples.as_slice()).unwrap_or(&[]) {
        let _ = writeln!(out, "{:.11e},{:.11e},{:.11e}", s.coordinate, s.transmission, s.im_rho21);
    }
    out
}

#[derive(Serialize)]
struct SpectrumInfo<'a> {
    name: &'a str,
    file: String,
    points: usize,
    #[serde(skip_serializing_if = "<[FailedPoint]>::is_empty")]
    failures: &'a [FailedPoint],
}

#[derive(Serialize)]
struct Summary<'a> {
    provenance: &'a Provenance,
    predictions: &'a Predictions,
    analysis: &'a Analysis,
    spectra: Vec<SpectrumInfo<'a>>,
}

fn csv_name(name: &str) -> String {
    format!("{name}.csv")
}

pub fn summary_toml(bundle: &ResultBundle) -> Result<String> {
    let summary = Summary {
        provenance: &bundle.provenance,
        predictions: &bundle.predictions,
        analysis: &bundle.analysis,
        spectra: bundle
            .spectra
            .iter()
            .map(|s| SpectrumInfo { name: &s.name, file: csv_name(&s.name), points: s.spectrum.samples.len(), failures: &s.spectrum.failures })
            .collect(),
    };
    toml::to_string(&summary).map_err(|e| Error::config("summary", e.to_string()))
}

/// The run configuration echoed in a summary document.
pub fn config_from_summary(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<summary>", e.message()))?;
    let config = table
        .get("provenance")
        .and_then(|p| p.get("config"))
        .and_then(|c| c.as_table())
        .ok_or_else(|| Error::config("provenance.config", "missing"))?;
    parse_config(&toml::to_string(config).map_err(|e| Error::config("provenance.config", e.to_string()))?)
}

fn write(path: PathBuf, contents: &str) -> Result<PathBuf> {
    fs::write(&path, contents).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes one CSV per spectrum (a header-only `spectrum.csv` when there is
/// none) and `summary.toml` into `dir`.
pub fn emit(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    if bundle.spectra.is_empty() {
        written.push(write(dir.join(csv_name("spectrum")), &spectrum_csv(None))?);
    }
    for s in &bundle.spectra {
        written.push(write(dir.join(csv_name(&s.name)), &spectrum_csv(Some(&s.spectrum)))?);
    }
    written.push(write(dir.join(SUMMARY_FILE), &summary_toml(bundle)?)?);
    Ok(written)
}

/// Short human-readable digest for the terminal.
pub fn render_text(bundle: &ResultBundle) -> String {
    let mut out = String::new();
    let p = &bundle.predictions;
    if let Some(m) = &p.mixing {
        let _ = writeln!(out, "omega_M = {}\nfreq_M = {}\ndelta_M = {}", m.omega_m, m.freq_m, m.delta_m);
    }
    if let Some(v) = p.qfm_valid {
        let _ = writeln!(out, "qfm_valid = {v}");
    }
    if let Some(i) = &p.indices {
        let _ = writeln!(out, "indices (n, m, l, k, j) = ({}, {}, {}, {}, {})", i.n, i.m, i.l, i.k, i.j);
    }
    if let Some(r) = p.reliable {
        let _ = writeln!(out, "sideband reduction reliable = {r}");
    }
    if !p.table.is_empty() {
        let _ = writeln!(out, "phi,loop_phase,splitting,left_hwhm,right_hwhm");
        for r in &p.table {
            let _ = writeln!(out, "{:.6},{:.6},{:.6},{:.6},{:.6}", r.phi, r.loop_phase, r.splitting, r.left_hwhm, r.right_hwhm);
        }
    }
    let a = &bundle.analysis;
    if let Some(d) = &a.double_ats {
        let _ = writeln!(out, "double ATS: splitting = {:.6}, asymmetry = {:.6}", d.splitting, d.asymmetry);
    }
    if let Some(e) = &a.double_ats_error {
        let _ = writeln!(out, "double ATS extraction failed: {e}");
    }
    if let Some(c) = &a.comparison {
        let _ = writeln!(out, "max |ΔT| = {:.6}, rms |ΔT| = {:.6}", c.max_abs_dev, c.rms_dev);
    }
    if !a.sensing_features.is_empty() {
        let _ = writeln!(out, "sensing features at {:?}", a.sensing_features);
    }
    for r in &a.phase_sweep {
        match &r.measured {
            Some(m) => {
                let _ = writeln!(
                    out,
                    "phi = {:.4}: splitting {:.4} (predicted {:.4}), asymmetry {:.4}",
                    r.phi, m.splitting, r.predicted_splitting, m.asymmetry
                );
            }
            None => {
                let _ = writeln!(out, "phi = {:.4}: {}", r.phi, r.error.as_deref().unwrap_or("no result"));
            }
        }
    }
    for s in &bundle.spectra {
        let _ = writeln!(out, "spectrum {}: {} points, {} failed", s.name, s.spectrum.samples.len(), s.spectrum.failures.len());
    }
    out
}
