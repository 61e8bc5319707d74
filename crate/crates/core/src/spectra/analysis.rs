//! Double-ATS extraction, loop-phase sweeps and sensing features.

use log::info;
use serde::{Deserialize, Serialize};

use super::fit::{find_peaks_in, fit_single_sloped, half_width_guess, levenberg_marquardt, median, FitTarget, PeakFit};
use super::{scan_with, Model, ScanAxis, ScanOptions, ScanSpec, Spectrum};
use crate::error::{Error, Result};
use crate::floquet::{predicted_linewidths, predicted_splitting, resolve_indices, sideband_couplings};
use crate::operator::Freq;
use crate::params::ModelParams;

/// Minimum peak prominence, as a fraction of the transmission range in
/// the window.
pub const PEAK_PROMINENCE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleAtsResult {
    pub left: PeakFit,
    pub right: PeakFit,
    /// right − left center
    pub splitting: f64,
    /// right HWHM / left HWHM
    pub asymmetry: f64,
}

/// Finds the two transmission peaks near `center` and fits both with a
/// shared baseline on Im ρ₂₁.
pub fn extract_double_ats(spectrum: &Spectrum, center: f64, halfwidth: f64) -> Result<DoubleAtsResult> {
    let w = spectrum.window(center - halfwidth, center + halfwidth);
    let x: Vec<f64> = w.iter().map(|s| s.coordinate).collect();
    let t: Vec<f64> = w.iter().map(|s| s.transmission).collect();
    let range = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - t.iter().cloned().fold(f64::INFINITY, f64::min);
    let peaks = find_peaks_in(&t, PEAK_PROMINENCE_FRACTION * range);
    if peaks.len() != 2 {
        return Err(Error::PeakCount { found: peaks.len() });
    }
    let y = FitTarget::ImRho21.values(&w);
    let b0 = median(&y);
    let gap = x[peaks[1]] - x[peaks[0]];
    let span = x[x.len() - 1] - x[0];
    let yscale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut p0 = Vec::with_capacity(7);
    for &i in &peaks {
        p0.extend([x[i], half_width_guess(&x, &y, i, b0).min(0.5 * gap), y[i] - b0]);
    }
    p0.push(b0);
    let scales = [span, span, yscale, span, span, yscale, yscale];
    let (p, residual) = levenberg_marquardt(&x, &y, 2, p0, &scales)?;
    let fit = |k: usize| PeakFit { center: p[3 * k], hwhm: p[3 * k + 1].abs(), amplitude: p[3 * k + 2], baseline: p[6], residual };
    let (mut left, mut right) = (fit(0), fit(1));
    if left.center > right.center {
        std::mem::swap(&mut left, &mut right);
    }
    if !(left.hwhm > 0.0 && right.hwhm > 0.0) || left.center < x[0] || right.center > x[x.len() - 1] {
        return Err(Error::FitDiverged { iterations: 0, residual, center: left.center, hwhm: left.hwhm });
    }
    // the pair is only Lorentzian close to each dip; refit each one locally
    let gap = right.center - left.center;
    let left = anchor(refine(&x, &y, left, gap), vertex(&x, &t, peaks[0]));
    let right = anchor(refine(&x, &y, right, gap), vertex(&x, &t, peaks[1]));
    Ok(DoubleAtsResult { left, right, splitting: right.center - left.center, asymmetry: right.hwhm / left.hwhm })
}

/// Largest tolerated offset between a fitted center and the located
/// maximum, in fitted HWHM.
const MAX_CENTER_DRIFT: f64 = 0.1;

/// Vertex of the parabola through the three samples around `i`.
fn vertex(x: &[f64], t: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return x[i];
    }
    let (a, b, c) = (t[i - 1], t[i], t[i + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return x[i];
    }
    let h = 0.5 * (x[i + 1] - x[i - 1]);
    x[i] + 0.5 * h * (a - c) / denom
}

// Strongly overlapping doublets are not a sum of Lorentzians and the fit
// pushes the centers apart; the spectral maximum is then the better position.
fn anchor(mut fit: PeakFit, maximum: f64) -> PeakFit {
    if (fit.center - maximum).abs() > MAX_CENTER_DRIFT * fit.hwhm {
        fit.center = maximum;
    }
    fit
}

/// Local half-window for refining one dip, in HWHM.
const REFINE_WINDOW: f64 = 2.5;

fn refine(x: &[f64], y: &[f64], coarse: PeakFit, gap: f64) -> PeakFit {
    let half = (REFINE_WINDOW * coarse.hwhm).min(0.5 * gap);
    let (xs, ys): (Vec<f64>, Vec<f64>) =
        x.iter().zip(y).filter(|(&xi, _)| (xi - coarse.center).abs() <= half).map(|(a, b)| (*a, *b)).unzip();
    match fit_single_sloped(&xs, &ys, true) {
        Ok(f) if (f.center - coarse.center).abs() <= half && f.hwhm > 0.0 && f.hwhm < 4.0 * coarse.hwhm => f,
        _ => coarse,
    }
}

/// Settings of a loop-phase sweep.
#[derive(Clone, Debug)]
pub struct PhaseSweepOptions {
    /// Sideband center Δ_c; defaults to `params.delta_c`.
    pub center: Option<Freq>,
    /// Points per control-detuning scan.
    pub points: usize,
    pub model: Model,
    /// Window half-width in units of the predicted splitting.
    pub window_factor: f64,
    pub scan: ScanOptions,
}

impl Default for PhaseSweepOptions {
    fn default() -> Self {
        PhaseSweepOptions { center: None, points: 201, model: Model::DualFloquet, window_factor: 3.0, scan: ScanOptions::default() }
    }
}

/// Prediction and measurement at one drive phase φ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub phi: f64,
    pub loop_phase: f64,
    pub predicted_splitting: f64,
    pub predicted_left_hwhm: f64,
    pub predicted_right_hwhm: f64,
    pub window_halfwidth: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measured: Option<DoubleAtsResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// For each φ, predicts the double-ATS shape and measures it from a
/// control-detuning scan around the sideband. Extraction failures are
/// kept per row; solver failures abort the sweep.
pub fn phase_sweep_analysis(params: &ModelParams, phis: &[f64], opts: &PhaseSweepOptions) -> Result<Vec<PhaseRow>> {
    let name = "dual_floquet";
    let center = opts.center.unwrap_or(params.delta_c);
    let omega_l = params.omega_l(name)?;
    let mixing = params.mixing(name)?;
    let mut rows = Vec::with_capacity(phis.len());
    for &phi in phis {
        let mut p = params.clone();
        p.phi = phi;
        let drive = p.drive(name)?;
        let idx = resolve_indices(omega_l, drive.omega, mixing.freq_m, center)?;
        let c = sideband_couplings(p.omega_c, omega_l, &mixing, &drive, &idx);
        let split = predicted_splitting(&c, mixing.phi_m, phi, &idx)?.value();
        let (wl, wr) = predicted_linewidths(c.omega_c_n, c.omega_c_m, p.gamma, c.loop_phase)?;
        let hw = (opts.window_factor * split).max(8.0 * wl.value().abs().max(wr.value().abs()));
        let spec = ScanSpec {
            center: Some(center),
            ..ScanSpec::new(ScanAxis::ControlDetuning, center.value() - hw, center.value() + hw, opts.points, opts.model)
        };
        let spectrum = scan_with(&p, &spec, &opts.scan)?;
        let measured = extract_double_ats(&spectrum, center.value(), hw);
        info!("φ = {phi:.4}: predicted splitting {split:.4}, measured {:?}", measured.as_ref().map(|m| m.splitting).ok());
        let (measured, error) = match measured {
            Ok(m) => (Some(m), None),
            Err(e) => (None, Some(e.to_string())),
        };
        rows.push(PhaseRow {
            phi,
            loop_phase: c.loop_phase,
            predicted_splitting: split,
            predicted_left_hwhm: wl.value(),
            predicted_right_hwhm: wr.value(),
            window_halfwidth: hw,
            measured,
            error,
        });
    }
    Ok(rows)
}

/// The `count` strongest features of a sensing scan: extrema of
/// |Im ρ₂₁ − median|, returned in scan order.
pub fn sensing_features(spectrum: &Spectrum, count: usize) -> Vec<f64> {
    let im = spectrum.im_rho21();
    let base = median(&im);
    let dev: Vec<f64> = im.iter().map(|v| (v - base).abs()).collect();
    let top = dev.iter().cloned().fold(0.0, f64::max);
    let mut peaks = find_peaks_in(&dev, PEAK_PROMINENCE_FRACTION * top);
    peaks.sort_by(|&a, &b| dev[b].total_cmp(&dev[a]));
    peaks.truncate(count);
    let mut coords: Vec<f64> = peaks.into_iter().map(|i| spectrum.samples[i].coordinate).collect();
    coords.sort_by(f64::total_cmp);
    coords
}
