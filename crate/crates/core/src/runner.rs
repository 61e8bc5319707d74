//! Scenario dispatch.

use log::info;
use serde::Serialize;

use crate::config::{ParamSet, RunConfig, Scenario};
use crate::error::{Error, Result};
use crate::floquet::{
    predicted_linewidths, predicted_splitting, resolve_indices, sideband_couplings, sideband_validity_ratio,
    EffectiveCouplings, FloquetIndices, DEFAULT_VALIDITY_RATIO,
};
use crate::hamiltonian::{MixingParams, DEFAULT_QFM_RATIO};
use crate::operator::Freq;
use crate::params::ModelParams;
use crate::qfm::mixing_parameters;
use crate::spectra::{
    compare_models, extract_double_ats, phase_sweep_analysis, scan_with, sensing_features, sensing_scan,
    DoubleAtsResult, Model, ModelComparison, PhaseRow, PhaseSweepOptions, ScanOptions, ScanSpec, Spectrum,
};

#[derive(Clone, Debug, PartialEq)]
pub struct NamedSpectrum {
    pub name: String,
    pub spectrum: Spectrum,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Analysis {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub double_ats: Option<DoubleAtsResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub double_ats_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ModelComparison>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sensing_features: Vec<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub phase_sweep: Vec<PhaseRow>,
}

/// Closed-form shape of one sideband at one φ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PredictionRow {
    pub phi: f64,
    pub loop_phase: f64,
    pub splitting: f64,
    pub left_hwhm: f64,
    pub right_hwhm: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Predictions {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixing: Option<MixingParams>,
    /// Far detunings dominate every other scale by the default ratio.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qfm_valid: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<FloquetIndices>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub couplings: Option<EffectiveCouplings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity_ratio: Option<f64>,
    /// Whether the sideband reduction is trusted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reliable: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub table: Vec<PredictionRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle {
    pub spectra: Vec<NamedSpectrum>,
    pub analysis: Analysis,
    pub predictions: Predictions,
    pub provenance: Provenance,
}

impl ResultBundle {
    pub fn empty(config: RunConfig) -> Self {
        ResultBundle {
            spectra: Vec::new(),
            analysis: Analysis::default(),
            predictions: Predictions::default(),
            provenance: Provenance { tool: env!("CARGO_PKG_NAME").to_string(), version: env!("CARGO_PKG_VERSION").to_string(), config },
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
}

fn model_name(m: Model) -> &'static str {
    match m {
        Model::Full => "full",
        Model::DressedEffective => "dressed_effective",
        Model::DualFloquet => "dual_floquet",
        Model::ChainEffective => "chain_effective",
    }
}

/// Sideband indices, couplings and the closed-form shape at `phis`.
pub fn sideband_predictions(p: &ModelParams, center: Freq, phis: &[f64]) -> Result<Predictions> {
    let name = "dual_floquet";
    let omega_l = p.omega_l(name)?;
    let mixing = p.mixing(name)?;
    let mut out = Predictions { mixing: Some(mixing), center: Some(center.value()), ..Default::default() };
    for &phi in phis {
        let mut q = p.clone();
        q.phi = phi;
        let drive = q.drive(name)?;
        let idx = resolve_indices(omega_l, drive.omega, mixing.freq_m, center)?;
        let c = sideband_couplings(q.omega_c, omega_l, &mixing, &drive, &idx);
        let (l, r) = predicted_linewidths(c.omega_c_n, c.omega_c_m, q.gamma, c.loop_phase)?;
        out.table.push(PredictionRow {
            phi,
            loop_phase: c.loop_phase,
            splitting: predicted_splitting(&c, mixing.phi_m, phi, &idx)?.value(),
            left_hwhm: l.value(),
            right_hwhm: r.value(),
        });
        if phi == p.phi || out.indices.is_none() {
            let ratio = sideband_validity_ratio(q.omega_c, omega_l, &mixing, &drive, &idx);
            out.indices = Some(idx);
            out.couplings = Some(c);
            out.validity_ratio = Some(ratio);
            out.reliable = Some(ratio >= DEFAULT_VALIDITY_RATIO);
        }
    }
    Ok(out)
}

fn scan_opts(opts: &RunOptions) -> ScanOptions {
    ScanOptions { workers: opts.workers, ..Default::default() }
}

/// Runs the scenario of `config`.
pub fn run(config: &RunConfig, opts: &RunOptions) -> Result<ResultBundle> {
    config.validate()?;
    let mut bundle = ResultBundle::empty(config.clone());
    info!("running scenario {}", config.scenario);
    match config.scenario {
        Scenario::QfmParams => {
            let (mixing, valid) = match &config.params {
                ParamSet::FieldPair(f) => (mixing_parameters(f.omega_1, f.delta_1, f.omega_2, f.delta_2)?, None),
                ParamSet::Model(p) => {
                    let need = |v: Option<Freq>, k: &str| v.ok_or_else(|| Error::config(format!("params.{k}"), "missing"));
                    let m = mixing_parameters(need(p.omega_1, "omega_1")?, need(p.delta_1, "delta_1")?, need(p.omega_2, "omega_2")?, need(p.delta_2, "delta_2")?)?;
                    (MixingParams { phi_m: p.phi_m, ..m }, p.bare_drive().ok().map(|b| b.qfm_valid(DEFAULT_QFM_RATIO)))
                }
            };
            bundle.predictions.mixing = Some(mixing);
            bundle.predictions.qfm_valid = valid;
        }
        Scenario::Spectrum => {
            let p = config.model_params()?;
            let scan = config.scan.as_ref().expect("validated");
            if scan.model == Model::ChainEffective {
                if let Some(c) = scan.center {
                    bundle.predictions = sideband_predictions(p, c, &[p.phi])?;
                }
            }
            let s = scan_with(p, scan, &scan_opts(opts))?;
            bundle.spectra.push(NamedSpectrum { name: "spectrum".into(), spectrum: s });
        }
        Scenario::DualFloquet => {
            let p = config.model_params()?;
            let scan = config.scan.as_ref().expect("validated");
            let center = scan.center.expect("validated");
            bundle.predictions = sideband_predictions(p, center, &[p.phi])?;
            let s = scan_with(p, scan, &scan_opts(opts))?;
            let hw = (center.value() - scan.start).min(scan.stop - center.value());
            match extract_double_ats(&s, center.value(), hw) {
                Ok(r) => bundle.analysis.double_ats = Some(r),
                Err(e) => bundle.analysis.double_ats_error = Some(e.to_string()),
            }
            bundle.spectra.push(NamedSpectrum { name: "dual_floquet".into(), spectrum: s });
        }
        Scenario::Sense => {
            let p = config.model_params()?;
            let sense = config.sense.as_ref().expect("validated");
            let s = sensing_scan(p, sense, &scan_opts(opts))?;
            bundle.analysis.sensing_features = sensing_features(&s, 2);
            bundle.spectra.push(NamedSpectrum { name: "sensing".into(), spectrum: s });
        }
        Scenario::PhaseSweep => {
            let p = config.model_params()?;
            let sweep = config.sweep_or_default();
            let phis = sweep.phis();
            let center = sweep.center.unwrap_or(p.delta_c);
            bundle.predictions = sideband_predictions(p, center, &phis)?;
            let sweep_opts = PhaseSweepOptions {
                center: Some(center),
                points: sweep.points,
                model: sweep.model,
                window_factor: sweep.window_factor,
                scan: scan_opts(opts),
            };
            bundle.analysis.phase_sweep = phase_sweep_analysis(p, &phis, &sweep_opts)?;
        }
        Scenario::Predict => {
            let p = config.model_params()?;
            let sweep = config.sweep_or_default();
            bundle.predictions = sideband_predictions(p, sweep.center.unwrap_or(p.delta_c), &sweep.phis())?;
        }
        Scenario::Compare => {
            let p = config.model_params()?;
            let cmp = config.compare.clone().unwrap_or_default();
            let base = config.scan.as_ref().expect("validated");
            let run_model = |m: Model| scan_with(p, &ScanSpec { model: m, ..base.clone() }, &scan_opts(opts));
            let a = run_model(cmp.reference)?;
            let b = run_model(cmp.candidate)?;
            bundle.analysis.comparison = Some(compare_models(&a, &b)?);
            let (na, nb) = (model_name(cmp.reference), model_name(cmp.candidate));
            let nb = if na == nb { format!("{nb}_candidate") } else { nb.to_string() };
            bundle.spectra.push(NamedSpectrum { name: na.into(), spectrum: a });
            bundle.spectra.push(NamedSpectrum { name: nb, spectrum: b });
        }
    }
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn qfm_params_scenario() {
        let cfg = parse_config(
            "scenario = \"qfm-params\"\n[params]\nomega_1 = 108.0\ndelta_1 = 1080.0\nomega_2 = 10.0\ndelta_2 = 1000.0\n",
        )
        .unwrap();
        let b = run(&cfg, &RunOptions::default()).unwrap();
        let m = b.predictions.mixing.unwrap();
        assert!((m.omega_m.value() - 0.52).abs() < 1e-12);
        assert!((m.delta_m.value() - 2.725).abs() < 1e-12);
        assert_eq!(m.freq_m.value(), 80.0);
        assert!(b.spectra.is_empty());
    }

    #[test]
    fn predict_scenario_tables_the_phase_grid() {
        let cfg = parse_config(
            r#"
scenario = "predict"
[params]
omega_p = 0.1
omega_c = 5.0
gamma = 5.0
delta_c = -20.0
omega_L = 40.0
omega_M = 4.0
freq_M = 80.0
delta_M = 4.0
g = 4.81
omega = 40.0
[sweep]
phi_points = 8
"#,
        )
        .unwrap();
        let b = run(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(b.predictions.table.len(), 8);
        assert_eq!(b.predictions.indices, Some(FloquetIndices::new(-1, 0, -3, 1, -1)));
        for row in &b.predictions.table {
            assert!((row.left_hwhm - row.right_hwhm).abs() < 1e-3 * row.left_hwhm.abs().max(1e-3));
        }
    }
}
