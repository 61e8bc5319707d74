//! Run configuration documents (TOML).
//!
//! ```toml
//! scenario = "spectrum"
//! [params]
//! omega_p = 2.0
//! omega_c = 2.0
//! gamma = 5.0
//! omega_L = 80.0
//! omega_M = 0.52
//! freq_M = 80.0
//! delta_M = 2.725
//! [scan]
//! axis = "control_detuning"
//! start = -60.0
//! stop = 60.0
//! points = 801
//! model = "dressed_effective"
//! ```
//!
//! Every frequency is a linear-unit `X/(2π)` value.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::resolve_indices;
use crate::operator::Freq;
use crate::params::ModelParams;
use crate::qfm::mixing_parameters;
use crate::spectra::{build_model, point_params, Model, ScanSpec, SensingSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    QfmParams,
    Spectrum,
    Sense,
    DualFloquet,
    PhaseSweep,
    Predict,
    Compare,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::QfmParams => "qfm-params",
            Scenario::Spectrum => "spectrum",
            Scenario::Sense => "sense",
            Scenario::DualFloquet => "dual-floquet",
            Scenario::PhaseSweep => "phase-sweep",
            Scenario::Predict => "predict",
            Scenario::Compare => "compare",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The far-detuned field pair alone; enough for `qfm-params`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldPair {
    pub omega_1: Freq,
    pub delta_1: Freq,
    pub omega_2: Freq,
    pub delta_2: Freq,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ParamSet {
    Model(Box<ModelParams>),
    FieldPair(FieldPair),
}

impl ParamSet {
    pub fn model(&self) -> Option<&ModelParams> {
        match self {
            ParamSet::Model(p) => Some(p),
            ParamSet::FieldPair(_) => None,
        }
    }
}

/// φ grid and per-scan settings of `phase-sweep` and `predict`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub phi_start: f64,
    #[serde(default = "default_phi_stop")]
    pub phi_stop: f64,
    /// Number of φ values; the grid excludes `phi_stop`.
    #[serde(default = "default_phi_points")]
    pub phi_points: usize,
    /// Points of each control-detuning scan.
    #[serde(default = "default_sweep_points")]
    pub points: usize,
    /// Sideband center Δ_c; defaults to `params.delta_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Freq>,
    #[serde(default = "default_sweep_model")]
    pub model: Model,
    #[serde(default = "default_window_factor")]
    pub window_factor: f64,
}

fn default_phi_stop() -> f64 {
    TAU
}
fn default_phi_points() -> usize {
    16
}
fn default_sweep_points() -> usize {
    201
}
fn default_sweep_model() -> Model {
    Model::DualFloquet
}
fn default_window_factor() -> f64 {
    3.0
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            phi_start: 0.0,
            phi_stop: default_phi_stop(),
            phi_points: default_phi_points(),
            points: default_sweep_points(),
            center: None,
            model: default_sweep_model(),
            window_factor: default_window_factor(),
        }
    }
}

impl SweepSpec {
    pub fn phis(&self) -> Vec<f64> {
        let n = self.phi_points as f64;
        (0..self.phi_points).map(|i| self.phi_start + (self.phi_stop - self.phi_start) * i as f64 / n).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.phi_start.is_finite() && self.phi_stop.is_finite()) {
            return Err(Error::config("sweep.phi_start", "must be finite"));
        }
        if self.phi_points == 0 {
            return Err(Error::config("sweep.phi_points", "must be at least 1"));
        }
        if self.points < 3 {
            return Err(Error::config("sweep.points", "need at least 3 points"));
        }
        if !(self.window_factor > 0.0 && self.window_factor.is_finite()) {
            return Err(Error::config("sweep.window_factor", "must be positive"));
        }
        if !matches!(self.model, Model::DualFloquet | Model::ChainEffective) {
            return Err(Error::config("sweep.model", "must be dual_floquet or chain_effective"));
        }
        Ok(())
    }
}

/// The two models of a `compare` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default = "default_reference")]
    pub reference: Model,
    #[serde(default = "default_candidate")]
    pub candidate: Model,
}

fn default_reference() -> Model {
    Model::Full
}
fn default_candidate() -> Model {
    Model::DressedEffective
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec { reference: default_reference(), candidate: default_candidate() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    /// One CSV per spectrum plus a TOML summary.
    #[default]
    Csv,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub params: ParamSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sense: Option<SensingSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    pub output: OutputSpec,
}

/// Command-line overrides applied before validation.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<Scenario>,
    pub points: Option<usize>,
    pub out_dir: Option<String>,
}

const SECTIONS: [&str; 7] = ["scenario", "params", "scan", "sense", "sweep", "compare", "output"];

/// Picks the field name out of serde's "unknown field `x`" and
/// "missing field `x`" messages.
fn key_path(section: &str, message: &str) -> String {
    let mut parts = message.split('`');
    match (parts.next(), parts.next()) {
        (Some(_), Some(key)) if message.contains("field") => format!("{section}.{key}"),
        _ => section.to_string(),
    }
}

fn section<T: DeserializeOwned>(table: &toml::Table, name: &str) -> Result<Option<T>> {
    match table.get(name) {
        None => Ok(None),
        Some(v) => v.clone().try_into().map(Some).map_err(|e: toml::de::Error| {
            let msg = e.message().to_string();
            Error::config(key_path(name, &msg), msg)
        }),
    }
}

/// Re-labels parameter errors with their key path.
fn in_section(section: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidParameter { name, reason } => {
            let path = if name.contains('.') { name } else { format!("{section}.{name}") };
            Error::Config { path, reason }
        }
        Error::Config { .. } => e,
        other => Error::config(section, other.to_string()),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_config_with(&text, overrides)
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::config("<document>", e.message()))?;
    for key in table.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            return Err(Error::config(key.clone(), "unknown key"));
        }
    }
    let scenario = match overrides.scenario {
        Some(s) => s,
        None => section::<Scenario>(&table, "scenario")?.ok_or_else(|| Error::config("scenario", "missing key"))?,
    };

    let raw_params = table.get("params").and_then(|v| v.as_table()).ok_or_else(|| Error::config("params", "missing table"))?;
    let params = if scenario == Scenario::QfmParams && !raw_params.contains_key("omega_p") {
        ParamSet::FieldPair(section(&table, "params")?.expect("present"))
    } else {
        ParamSet::Model(Box::new(section(&table, "params")?.expect("present")))
    };

    let mut cfg = RunConfig {
        scenario,
        params,
        scan: section(&table, "scan")?,
        sense: section(&table, "sense")?,
        sweep: section(&table, "sweep")?,
        compare: section(&table, "compare")?,
        output: section(&table, "output")?.unwrap_or_default(),
    };
    if let Some(n) = overrides.points {
        cfg.set_points(n);
    }
    if let Some(dir) = &overrides.out_dir {
        cfg.output.dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Scan resolution of whichever section the scenario uses.
    pub fn set_points(&mut self, n: usize) {
        match self.scenario {
            Scenario::Sense => {
                if let Some(s) = &mut self.sense {
                    s.points = n;
                }
            }
            Scenario::PhaseSweep => self.sweep.get_or_insert_with(SweepSpec::default).points = n,
            _ => {
                if let Some(s) = &mut self.scan {
                    s.points = n;
                }
            }
        }
    }

    pub fn model_params(&self) -> Result<&ModelParams> {
        self.params.model().ok_or_else(|| Error::config("params", format!("scenario {} needs the full parameter set", self.scenario)))
    }

    pub fn sweep_or_default(&self) -> SweepSpec {
        self.sweep.clone().unwrap_or_default()
    }

    fn scan_required(&self) -> Result<&ScanSpec> {
        self.scan.as_ref().ok_or_else(|| Error::config("scan", format!("required by scenario {}", self.scenario)))
    }

    /// Checks that everything the scenario touches is present and sane.
    pub fn validate(&self) -> Result<()> {
        if self.scenario == Scenario::QfmParams {
            let (o1, d1, o2, d2) = match &self.params {
                ParamSet::FieldPair(f) => (Some(f.omega_1), Some(f.delta_1), Some(f.omega_2), Some(f.delta_2)),
                ParamSet::Model(p) => (p.omega_1, p.delta_1, p.omega_2, p.delta_2),
            };
            let need = |v: Option<Freq>, key: &str| v.ok_or_else(|| Error::config(format!("params.{key}"), "required by scenario qfm-params"));
            mixing_parameters(need(o1, "omega_1")?, need(d1, "delta_1")?, need(o2, "omega_2")?, need(d2, "delta_2")?)
                .map_err(in_section("params"))?;
            return Ok(());
        }
        let p = self.model_params()?;
        p.validate().map_err(in_section("params"))?;
        let dry_build = |spec: &ScanSpec, model: Model| {
            build_model(&point_params(p, spec, spec.start), model, spec.center).map(|_| ()).map_err(in_section("params"))
        };
        match self.scenario {
            Scenario::QfmParams => unreachable!(),
            Scenario::Spectrum => {
                let scan = self.scan_required()?;
                scan.validate().map_err(in_section("scan"))?;
                dry_build(scan, scan.model)?;
            }
            Scenario::DualFloquet => {
                let scan = self.scan_required()?;
                scan.validate().map_err(in_section("scan"))?;
                if !matches!(scan.model, Model::DualFloquet | Model::ChainEffective) {
                    return Err(Error::config("scan.model", "must be dual_floquet or chain_effective"));
                }
                let center = scan.center.ok_or_else(|| Error::config("scan.center", "required by scenario dual-floquet"))?;
                dry_build(scan, scan.model)?;
                self.check_sideband(p, center)?;
            }
            Scenario::Sense => {
                let sense = self.sense.as_ref().ok_or_else(|| Error::config("sense", "required by scenario sense"))?;
                let spec = sense.scan_spec();
                spec.validate().map_err(in_section("sense"))?;
                if !(sense.ratio > 0.0 && sense.ratio.is_finite()) {
                    return Err(Error::config("sense.ratio", "must be positive"));
                }
                let omega_l = p.omega_l("full").map_err(in_section("params"))?;
                if (p.delta_c.value().abs() - 0.5 * omega_l.value()).abs() > 1e-9 * omega_l.value().max(1.0) {
                    return Err(Error::config("params.delta_c", "the sensing protocol needs Δ_c = ±Ω_L/2"));
                }
                let mut q = p.clone();
                q.omega_2 = Some(sense.omega_s);
                q.delta_2 = Some(sense.delta_s);
                build_model(&point_params(&q, &spec, spec.start), Model::Full, None).map_err(in_section("params"))?;
            }
            Scenario::PhaseSweep | Scenario::Predict => {
                let sweep = self.sweep_or_default();
                sweep.validate()?;
                self.check_sideband(p, sweep.center.unwrap_or(p.delta_c))?;
            }
            Scenario::Compare => {
                let scan = self.scan_required()?;
                scan.validate().map_err(in_section("scan"))?;
                let cmp = self.compare.clone().unwrap_or_default();
                dry_build(scan, cmp.reference)?;
                dry_build(scan, cmp.candidate)?;
            }
        }
        Ok(())
    }

    fn check_sideband(&self, p: &ModelParams, center: Freq) -> Result<()> {
        let name = "dual_floquet";
        let omega_l = p.omega_l(name).map_err(in_section("params"))?;
        let mixing = p.mixing(name).map_err(in_section("params"))?;
        let drive = p.drive(name).map_err(in_section("params"))?;
        resolve_indices(omega_l, drive.omega, mixing.freq_m, center).map_err(in_section("params"))?;
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("<document>", e.to_string()))
    }
}
