//! Parameter scans and the analysis of the resulting spectra.

mod analysis;
mod fit;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{resolve_indices, sideband_couplings};
use crate::hamiltonian::{build_chain_effective, build_dressed_effective, build_dual_floquet, build_full, TimeDependentHamiltonian};
use crate::lindblad::{probe_response, transmission, ResponseMethod, SteadyStateOptions};
use crate::operator::Freq;
use crate::params::ModelParams;

pub use analysis::{
    extract_double_ats, phase_sweep_analysis, sensing_features, DoubleAtsResult, PhaseRow, PhaseSweepOptions,
};
pub use fit::{find_peaks, find_peaks_in, fit_lorentzian, fit_lorentzian_with, FitTarget, PeakFit};

/// Fraction of failed points above which a whole scan is rejected.
pub const MAX_FAILED_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanAxis {
    ControlDetuning,
    BiasDetuning,
    DrivePhase,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// Lab-frame ladder with LO and the far-detuned field pair.
    Full,
    /// Dressed-state model with the mixed field.
    DressedEffective,
    /// Dressed model with a periodically modulated LO.
    DualFloquet,
    /// Time-independent chain for one Floquet sideband.
    ChainEffective,
}

/// One sweep. `start`/`stop` are linear-unit frequencies, or radians on
/// the phase axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub axis: ScanAxis,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub model: Model,
    /// Sideband center Δ_c of the chain model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Freq>,
    /// Ω₁/Δ₁ held fixed on the bias axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias_ratio: Option<f64>,
}

impl ScanSpec {
    pub fn new(axis: ScanAxis, start: f64, stop: f64, points: usize, model: Model) -> Self {
        ScanSpec { axis, start, stop, points, model, center: None, bias_ratio: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Error::param("scan.start", "scan bounds must be finite"));
        }
        if !(self.start < self.stop) {
            return Err(Error::param("scan.stop", "start must be below stop"));
        }
        if self.points < 3 {
            return Err(Error::param("scan.points", "need at least 3 points"));
        }
        if let Some(r) = self.bias_ratio {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::param("scan.bias_ratio", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn coordinates(&self) -> Vec<f64> {
        let n = self.points - 1;
        (0..self.points)
            .map(|i| if i == n { self.stop } else { self.start + (self.stop - self.start) * i as f64 / n as f64 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub coordinate: f64,
    pub transmission: f64,
    pub im_rho21: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedPoint {
    pub coordinate: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub samples: Vec<Sample>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailedPoint>,
    pub params: ModelParams,
    pub spec: ScanSpec,
}

impl Spectrum {
    pub fn coordinates(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.coordinate).collect()
    }

    pub fn transmissions(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.transmission).collect()
    }

    pub fn im_rho21(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.im_rho21).collect()
    }

    /// Samples with coordinate in `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Vec<Sample> {
        self.samples.iter().copied().filter(|s| s.coordinate >= lo && s.coordinate <= hi).collect()
    }
}

/// Worker count and solver settings of a scan.
#[derive(Clone, Debug, Default)]
pub struct ScanOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub steady: SteadyStateOptions,
}

/// Parameters at one scan coordinate.
pub fn point_params(params: &ModelParams, spec: &ScanSpec, x: f64) -> ModelParams {
    let mut p = params.clone();
    match spec.axis {
        ScanAxis::ControlDetuning => p.delta_c = Freq(x),
        ScanAxis::BiasDetuning => {
            p.delta_1 = Some(Freq(x));
            if let Some(r) = spec.bias_ratio {
                p.omega_1 = Some(Freq(r * x));
            }
        }
        ScanAxis::DrivePhase => p.phi = x,
    }
    p
}

/// The Hamiltonian of `model` for one parameter set.
pub fn build_model(p: &ModelParams, model: Model, center: Option<Freq>) -> Result<TimeDependentHamiltonian> {
    match model {
        Model::Full => build_full(&p.bare_drive()?),
        Model::DressedEffective => {
            let name = "dressed_effective";
            build_dressed_effective(p.omega_p, p.omega_c, p.delta_c, p.omega_l(name)?, &p.mixing(name)?)
        }
        Model::DualFloquet => {
            let name = "dual_floquet";
            build_dual_floquet(p.omega_p, p.omega_c, p.delta_c, p.omega_l(name)?, &p.mixing(name)?, &p.drive(name)?)
        }
        Model::ChainEffective => {
            let name = "chain_effective";
            let center = center.ok_or_else(|| Error::param("center", "required by the chain_effective model"))?;
            let omega_l = p.omega_l(name)?;
            let mixing = p.mixing(name)?;
            let drive = p.drive(name)?;
            let idx = resolve_indices(omega_l, drive.omega, mixing.freq_m, center)?;
            let couplings = sideband_couplings(p.omega_c, omega_l, &mixing, &drive, &idx);
            let h = build_chain_effective(p.omega_p, &couplings, Freq(p.delta_c.value() - center.value()));
            Ok(TimeDependentHamiltonian::constant(h))
        }
    }
}

fn run_point(params: &ModelParams, spec: &ScanSpec, x: f64, steady: &SteadyStateOptions) -> Result<(Sample, ResponseMethod)> {
    let p = point_params(params, spec, x);
    let h = build_model(&p, spec.model, spec.center)?;
    let r = probe_response(&h, &p.scheme()?, steady)?;
    let im = r.im_rho21();
    if !im.is_finite() {
        return Err(Error::NonFinite(format!("Im ρ21 at {x}")));
    }
    Ok((Sample { coordinate: x, transmission: transmission(im, p.transmission_config()), im_rho21: im }, r.method))
}

pub(crate) fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::param("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs `spec` over the given parameters with the default options.
pub fn scan(params: &ModelParams, spec: &ScanSpec) -> Result<Spectrum> {
    scan_with(params, spec, &ScanOptions::default())
}

pub fn scan_with(params: &ModelParams, spec: &ScanSpec, opts: &ScanOptions) -> Result<Spectrum> {
    params.validate()?;
    spec.validate()?;
    let coords = spec.coordinates();
    // surface configuration errors before any work is spawned
    build_model(&point_params(params, spec, coords[0]), spec.model, spec.center)?;

    let results: Vec<Result<(Sample, ResponseMethod)>> = with_pool(opts.workers, || {
        coords.par_iter().map(|&x| run_point(params, spec, x, &opts.steady)).collect()
    })?;

    let mut samples = Vec::with_capacity(coords.len());
    let mut failures = Vec::new();
    let mut methods = [0usize; 4];
    for (x, r) in coords.iter().zip(results) {
        match r {
            Ok((s, m)) => {
                methods[m as usize] += 1;
                samples.push(s);
            }
            Err(e) if e.is_validation() => return Err(e),
            Err(e) => {
                warn!("scan point {x} failed: {e}");
                failures.push(FailedPoint { coordinate: *x, error: e.to_string() });
            }
        }
    }
    debug!("scan methods (direct, periodic, ground-limit, time-average): {methods:?}");
    if failures.len() as f64 > MAX_FAILED_FRACTION * coords.len() as f64 {
        return Err(Error::ScanFailed { failed: failures.len(), total: coords.len() });
    }
    Ok(Spectrum { samples, failures, params: params.clone(), spec: spec.clone() })
}

/// Bias-field sweep with `Ω_b = ratio·Δ_b` and a fixed signal field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensingSpec {
    pub delta_s: Freq,
    pub omega_s: Freq,
    pub ratio: f64,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SensingSpec {
    pub fn scan_spec(&self) -> ScanSpec {
        ScanSpec { bias_ratio: Some(self.ratio), ..ScanSpec::new(ScanAxis::BiasDetuning, self.start, self.stop, self.points, Model::Full) }
    }
}

/// Full-model bias scan; the bias field is field 1 and the signal field 2.
pub fn sensing_scan(params: &ModelParams, sense: &SensingSpec, opts: &ScanOptions) -> Result<Spectrum> {
    if !(sense.ratio > 0.0 && sense.ratio.is_finite()) {
        return Err(Error::param("sense.ratio", "must be positive"));
    }
    let omega_l = params.omega_l("full")?;
    if (params.delta_c.value().abs() - 0.5 * omega_l.value()).abs() > 1e-9 * omega_l.value().max(1.0) {
        return Err(Error::param("delta_c", "the sensing protocol needs Δ_c = ±Ω_L/2"));
    }
    let mut p = params.clone();
    p.omega_2 = Some(sense.omega_s);
    p.delta_2 = Some(sense.delta_s);
    p.omega_1.get_or_insert(Freq(sense.ratio * sense.start));
    p.delta_1.get_or_insert(Freq(sense.start));
    scan_with(&p, &sense.scan_spec(), opts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub max_abs_dev: f64,
    pub rms_dev: f64,
}

/// Pointwise transmission deviation of two spectra on the same grid.
pub fn compare_models(a: &Spectrum, b: &Spectrum) -> Result<ModelComparison> {
    if a.samples.len() != b.samples.len()
        || a.samples.iter().zip(&b.samples).any(|(x, y)| x.coordinate != y.coordinate)
    {
        return Err(Error::CoordinateMismatch);
    }
    if a.samples.is_empty() {
        return Ok(ModelComparison { max_abs_dev: 0.0, rms_dev: 0.0 });
    }
    let devs: Vec<f64> = a.samples.iter().zip(&b.samples).map(|(x, y)| (x.transmission - y.transmission).abs()).collect();
    let max_abs_dev = devs.iter().copied().fold(0.0, f64::max);
    let rms_dev = (devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64).sqrt();
    Ok(ModelComparison { max_abs_dev, rms_dev })
}
