//! Peak search and Lorentzian least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Spectrum;
use crate::error::{Error, Result};

pub(crate) const MIN_FIT_SAMPLES: usize = 7;
const MAX_ITERATIONS: usize = 200;
const STEP_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitTarget {
    /// Fit Im ρ₂₁, where transparency windows are dips. Default.
    #[default]
    ImRho21,
    Transmission,
}

impl FitTarget {
    pub(crate) fn values(self, spectrum: &[super::Sample]) -> Vec<f64> {
        spectrum
            .iter()
            .map(|s| match self {
                FitTarget::ImRho21 => s.im_rho21,
                FitTarget::Transmission => s.transmission,
            })
            .collect()
    }
}

/// `baseline + amplitude·hwhm²/((x−center)² + hwhm²)`
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakFit {
    pub center: f64,
    pub hwhm: f64,
    pub amplitude: f64,
    pub baseline: f64,
    /// RMS of the fit residuals.
    pub residual: f64,
}

impl PeakFit {
    pub fn eval(&self, x: f64) -> f64 {
        self.baseline + self.amplitude * lorentz(x, self.center, self.hwhm)
    }
}

fn lorentz(x: f64, c: f64, w: f64) -> f64 {
    let u = x - c;
    w * w / (u * u + w * w)
}

/// Value of `n` Lorentzians plus a baseline, and its gradient.
/// Parameters are `[c₁, w₁, a₁, …, c_n, w_n, a_n, b]`, optionally
/// followed by a baseline slope.
pub(crate) fn multi_lorentz(p: &[f64], n: usize, x: f64, grad: &mut [f64]) -> f64 {
    let mut y = p[3 * n];
    grad[3 * n] = 1.0;
    if p.len() > 3 * n + 1 {
        y += p[3 * n + 1] * x;
        grad[3 * n + 1] = x;
    }
    for i in 0..n {
        let (c, w, a) = (p[3 * i], p[3 * i + 1], p[3 * i + 2]);
        let u = x - c;
        let d = u * u + w * w;
        let l = w * w / d;
        y += a * l;
        grad[3 * i] = a * 2.0 * u * w * w / (d * d);
        grad[3 * i + 1] = a * 2.0 * w * u * u / (d * d);
        grad[3 * i + 2] = l;
    }
    y
}

fn sum_sq(x: &[f64], y: &[f64], p: &[f64], n: usize, grad: &mut [f64]) -> f64 {
    x.iter().zip(y).map(|(&xi, &yi)| (yi - multi_lorentz(p, n, xi, grad)).powi(2)).sum()
}

/// Levenberg–Marquardt on [`multi_lorentz`]. `scales` sets the size
/// against which each parameter step counts as negligible.
pub(crate) fn levenberg_marquardt(x: &[f64], y: &[f64], n: usize, mut p: Vec<f64>, scales: &[f64]) -> Result<(Vec<f64>, f64)> {
    let np = p.len();
    if x.len() < MIN_FIT_SAMPLES.max(np) {
        return Err(Error::FitWindow { found: x.len(), needed: MIN_FIT_SAMPLES.max(np) });
    }
    let mut grad = vec![0.0; np];
    let mut cost = sum_sq(x, y, &p, n, &mut grad);
    let mut lambda = 1e-3;
    let rms = |c: f64| (c / x.len() as f64).sqrt();

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = DMatrix::<f64>::zeros(np, np);
        let mut jtr = DVector::<f64>::zeros(np);
        for (&xi, &yi) in x.iter().zip(y) {
            let r = yi - multi_lorentz(&p, n, xi, &mut grad);
            for a in 0..np {
                jtr[a] += grad[a] * r;
                for b in 0..np {
                    jtj[(a, b)] += grad[a] * grad[b];
                }
            }
        }
        loop {
            let mut lhs = jtj.clone();
            for a in 0..np {
                lhs[(a, a)] += lambda * jtj[(a, a)].max(1e-30);
            }
            let Some(step) = lhs.lu().solve(&jtr) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    return Ok((p, rms(cost)));
                }
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let trial_cost = sum_sq(x, y, &trial, n, &mut grad);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = step.iter().zip(scales).all(|(s, sc)| s.abs() <= STEP_TOL * sc);
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if small {
                    return Ok((p, rms(cost)));
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no downhill direction left: at the minimum to working precision
                return Ok((p, rms(cost)));
            }
        }
    }
    Err(Error::FitDiverged {
        iterations: MAX_ITERATIONS,
        residual: rms(cost),
        center: if n > 0 { p[0] } else { f64::NAN },
        hwhm: if n > 0 { p[1].abs() } else { f64::NAN },
    })
}

pub(crate) fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Half width at half height of the feature at `i` above or below `base`.
pub(crate) fn half_width_guess(x: &[f64], y: &[f64], i: usize, base: f64) -> f64 {
    let half = 0.5 * (y[i] - base).abs();
    let mut widths = Vec::new();
    if let Some(j) = (0..i).rev().find(|&j| (y[j] - base).abs() <= half) {
        widths.push(x[i] - x[j]);
    }
    if let Some(j) = (i + 1..y.len()).find(|&j| (y[j] - base).abs() <= half) {
        widths.push(x[j] - x[i]);
    }
    let span = x[x.len() - 1] - x[0];
    match widths.len() {
        0 => span / 10.0,
        _ => widths.iter().sum::<f64>() / widths.len() as f64,
    }
}

pub(crate) fn fit_single(x: &[f64], y: &[f64]) -> Result<PeakFit> {
    fit_single_sloped(x, y, false)
}

/// With `slope`, the baseline is `b + s·(x − x̄)` and the reported
/// baseline is its value at the fitted center.
pub(crate) fn fit_single_sloped(x: &[f64], y: &[f64], slope: bool) -> Result<PeakFit> {
    if x.len() < MIN_FIT_SAMPLES {
        return Err(Error::FitWindow { found: x.len(), needed: MIN_FIT_SAMPLES });
    }
    let b0 = median(y);
    let i = (0..y.len()).max_by(|&a, &b| (y[a] - b0).abs().total_cmp(&(y[b] - b0).abs())).unwrap_or(0);
    let w0 = half_width_guess(x, y, i, b0);
    let span = x[x.len() - 1] - x[0];
    let yscale = y.iter().map(|v| v.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mid = 0.5 * (x[0] + x[x.len() - 1]);
    let xs: Vec<f64> = x.iter().map(|v| v - mid).collect();
    let mut p0 = vec![xs[i], w0, y[i] - b0, b0];
    let mut scales = vec![span, span, yscale, yscale];
    if slope {
        p0.push(0.0);
        scales.push(yscale / span);
    }
    let (p, residual) = levenberg_marquardt(&xs, y, 1, p0, &scales)?;
    let s = if slope { p[4] } else { 0.0 };
    Ok(PeakFit { center: p[0] + mid, hwhm: p[1].abs(), amplitude: p[2], baseline: p[3] + s * p[0], residual })
}

/// Single Lorentzian plus constant baseline fitted to Im ρ₂₁ over
/// `[center − halfwidth, center + halfwidth]`.
pub fn fit_lorentzian(spectrum: &Spectrum, center: f64, halfwidth: f64) -> Result<PeakFit> {
    fit_lorentzian_with(spectrum, center, halfwidth, FitTarget::ImRho21)
}

pub fn fit_lorentzian_with(spectrum: &Spectrum, center: f64, halfwidth: f64, target: FitTarget) -> Result<PeakFit> {
    let w = spectrum.window(center - halfwidth, center + halfwidth);
    let x: Vec<f64> = w.iter().map(|s| s.coordinate).collect();
    fit_single(&x, &target.values(&w))
}

/// Indices of interior local maxima with topographic prominence of at
/// least `min_prominence`. A flat top counts once, at its left end.
pub fn find_peaks_in(values: &[f64], min_prominence: f64) -> Vec<usize> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let top = values[i];
                let left = values[..i].iter().rev().take_while(|&&v| v <= top).fold(top, |m, &v| m.min(v));
                let right = values[j + 1..].iter().take_while(|&&v| v <= top).fold(top, |m, &v| m.min(v));
                if top - left.max(right) >= min_prominence {
                    peaks.push(i);
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Coordinates of the transmission peaks of `spectrum`.
pub fn find_peaks(spectrum: &Spectrum, min_prominence: f64) -> Vec<f64> {
    find_peaks_in(&spectrum.transmissions(), min_prominence)
        .into_iter()
        .map(|i| spectrum.samples[i].coordinate)
        .collect()
}
