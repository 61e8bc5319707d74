//! Sideband analysis for the periodically modulated dressed system.
//!
//! Resolves the Floquet photon orders that make each coupling resonant,
//! weights the couplings by Bessel functions of the modulation depth and
//! provides the closed-form splitting and linewidth predictors of the
//! resulting loop model.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::bessel::bessel_j;
use crate::error::{Error, Result};
use crate::hamiltonian::{MixingParams, PeriodicDriveParams};
use crate::operator::{Freq, C64};

/// Tolerance, in units of ω, for a resonance order to count as integer.
const ORDER_TOLERANCE: f64 = 1e-9;

/// Default ratio ω / (largest off-resonant coupling) for trusted predictions.
pub const DEFAULT_VALIDITY_RATIO: f64 = 5.0;

/// Photon orders (n, m, l, k, j) of the five resonance conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct FloquetIndices {
    pub n: i32,
    pub m: i32,
    pub l: i32,
    pub k: i32,
    pub j: i32,
}

impl FloquetIndices {
    pub fn new(n: i32, m: i32, l: i32, k: i32, j: i32) -> Self {
        FloquetIndices { n, m, l, k, j }
    }

    /// `m + n = j` and `l − j = j − k`.
    pub fn is_consistent(&self) -> bool {
        self.m + self.n == self.j && self.l - self.j == self.j - self.k
    }
}

/// Couplings of the time-independent chain model for one sideband.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffectiveCouplings {
    /// Ω_c^n, coupling |2⟩↔|d₃⟩
    pub omega_c_n: Freq,
    /// Ω_c^m, coupling |2⟩↔|d₄⟩
    pub omega_c_m: Freq,
    pub omega_m_l: Freq,
    pub omega_m_k: Freq,
    pub delta_m_j: Freq,
    /// |Ω_M^{l,k,j}|
    pub composite_magnitude: Freq,
    /// φ_M^{l,k,j}
    pub composite_phase: f64,
    /// φ_LI; equal to the composite phase
    pub loop_phase: f64,
}

impl EffectiveCouplings {
    /// A bare loop: control couplings `c1`, `c2` and a dressed-dressed
    /// coupling `magnitude·e^{i·phase}`.
    pub fn loop_model(c1: Freq, c2: Freq, magnitude: Freq, phase: f64) -> Self {
        EffectiveCouplings {
            omega_c_n: c1,
            omega_c_m: c2,
            omega_m_l: magnitude,
            omega_m_k: Freq::ZERO,
            delta_m_j: Freq::ZERO,
            composite_magnitude: Freq(magnitude.value().abs()),
            composite_phase: phase,
            loop_phase: phase,
        }
    }
}

fn integer_order(condition: &'static str, value: f64) -> Result<i32> {
    let nearest = value.round();
    if (value - nearest).abs() > ORDER_TOLERANCE || !value.is_finite() {
        return Err(Error::NoIntegerOrder { condition, nearest: value });
    }
    Ok(nearest as i32)
}

/// Solves the five photon-assisted resonance conditions
///
/// ```text
/// Δ_c − Ω_L/2 − nω = 0      Δ_c + Ω_L/2 + mω = 0
/// ω_M + Ω_L + lω = 0        −ω_M + Ω_L + kω = 0      Ω_L + jω = 0
/// ```
pub fn resolve_indices(omega_l: Freq, omega: Freq, freq_m: Freq, delta_c_center: Freq) -> Result<FloquetIndices> {
    let w = omega.value();
    if !(w > 0.0) {
        return Err(Error::param("omega", "drive frequency must be positive"));
    }
    let (ol, wm, dc) = (omega_l.value(), freq_m.value(), delta_c_center.value());
    let idx = FloquetIndices {
        n: integer_order("Δ_c − Ω_L/2 − nω = 0", (dc - 0.5 * ol) / w)?,
        m: integer_order("Δ_c + Ω_L/2 + mω = 0", -(dc + 0.5 * ol) / w)?,
        l: integer_order("ω_M + Ω_L + lω = 0", -(wm + ol) / w)?,
        k: integer_order("−ω_M + Ω_L + kω = 0", (wm - ol) / w)?,
        j: integer_order("Ω_L + jω = 0", -ol / w)?,
    };
    debug_assert!(idx.is_consistent());
    Ok(idx)
}

fn bessel_arguments(omega_l: Freq, drive: &PeriodicDriveParams) -> (f64, f64) {
    if drive.g == 0.0 {
        return (0.0, 0.0);
    }
    let x = drive.g * omega_l.value() / drive.omega.value();
    (0.5 * x, x)
}

/// Bessel-weighted couplings of the sideband selected by `idx`.
pub fn sideband_couplings(
    omega_c: Freq,
    omega_l: Freq,
    mixing: &MixingParams,
    drive: &PeriodicDriveParams,
    idx: &FloquetIndices,
) -> EffectiveCouplings {
    let (arg_c, arg_m) = bessel_arguments(omega_l, drive);
    let oc = omega_c.value() * FRAC_1_SQRT_2;
    let omega_c_n = Freq(oc * bessel_j(idx.n, arg_c));
    let omega_c_m = Freq(oc * bessel_j(idx.m, arg_c));
    let omega_m_l = Freq(mixing.omega_m.value() * bessel_j(idx.l, arg_m));
    let omega_m_k = Freq(mixing.omega_m.value() * bessel_j(idx.k, arg_m));
    let delta_m_j = Freq(2.0 * mixing.delta_m.value() * bessel_j(idx.j, arg_m));
    let (magnitude, phase) =
        composite_coupling(omega_m_l, omega_m_k, delta_m_j, mixing.phi_m, drive.phi, idx);
    EffectiveCouplings {
        omega_c_n,
        omega_c_m,
        omega_m_l,
        omega_m_k,
        delta_m_j,
        composite_magnitude: magnitude,
        composite_phase: phase,
        loop_phase: phase,
    }
}

/// Largest coupling of the orders that are *not* resonant, compared to ω.
/// Predictions are trusted when the returned ratio is at least
/// [`DEFAULT_VALIDITY_RATIO`].
pub fn sideband_validity_ratio(
    omega_c: Freq,
    omega_l: Freq,
    mixing: &MixingParams,
    drive: &PeriodicDriveParams,
    idx: &FloquetIndices,
) -> f64 {
    let (arg_c, arg_m) = bessel_arguments(omega_l, drive);
    let oc = omega_c.value().abs() * FRAC_1_SQRT_2;
    let om = mixing.omega_m.value().abs();
    let dm = 2.0 * mixing.delta_m.value().abs();
    let mut worst: f64 = 0.0;
    for order in -40..=40 {
        if order != idx.n && order != idx.m {
            worst = worst.max(oc * bessel_j(order, arg_c).abs());
        }
        if order != idx.l && order != idx.k {
            worst = worst.max(om * bessel_j(order, arg_m).abs());
        }
        if order != idx.j {
            worst = worst.max(dm * bessel_j(order, arg_m).abs());
        }
    }
    if worst == 0.0 {
        f64::INFINITY
    } else {
        drive.omega.value().abs() / worst
    }
}

/// Magnitude and phase of
/// `Ω_M^l e^{i[φ_M+(l−j)φ]} + Ω_M^k e^{−i[φ_M+(j−k)φ]} + δ_M^j`.
pub fn composite_coupling(
    omega_m_l: Freq,
    omega_m_k: Freq,
    delta_m_j: Freq,
    phi_m: f64,
    phi: f64,
    idx: &FloquetIndices,
) -> (Freq, f64) {
    let rotating = C64::from_polar(omega_m_l.value(), phi_m + f64::from(idx.l - idx.j) * phi);
    let counter = C64::from_polar(omega_m_k.value(), -(phi_m + f64::from(idx.j - idx.k) * phi));
    let z = rotating + counter + C64::new(delta_m_j.value(), 0.0);
    (Freq(z.norm()), z.arg())
}

/// The loop phase φ_LI of the sideband, i.e. the composite coupling phase.
pub fn loop_phase(
    omega_m_l: Freq,
    omega_m_k: Freq,
    delta_m_j: Freq,
    phi_m: f64,
    phi: f64,
    idx: &FloquetIndices,
) -> f64 {
    composite_coupling(omega_m_l, omega_m_k, delta_m_j, phi_m, phi, idx).1
}

/// Double-ATS splitting from the pairwise channel phase differences.
pub fn predicted_splitting(couplings: &EffectiveCouplings, phi_m: f64, phi: f64, idx: &FloquetIndices) -> Result<Freq> {
    let a = couplings.omega_m_l.value();
    let b = couplings.omega_m_k.value();
    let c = couplings.delta_m_j.value();
    let phi_lk = 2.0 * phi_m + f64::from(idx.l - idx.k) * phi;
    let phi_jl = -phi_m + f64::from(idx.j - idx.l) * phi;
    let phi_kj = -phi_m + f64::from(idx.k - idx.j) * phi;
    let radicand = a * a + b * b + c * c
        + 2.0 * a * b * phi_lk.cos()
        + 2.0 * c * a * phi_jl.cos()
        + 2.0 * b * c * phi_kj.cos();
    let scale = (a * a + b * b + c * c).max(f64::MIN_POSITIVE);
    if radicand < -1e-12 * scale {
        return Err(Error::NegativeRadicand(radicand));
    }
    Ok(Freq(radicand.max(0.0).sqrt()))
}

/// HWHM of the left and right double-ATS peaks.
pub fn predicted_linewidths(omega_c_n: Freq, omega_c_m: Freq, gamma: Freq, phi_li: f64) -> Result<(Freq, Freq)> {
    if !(gamma.value() > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    let (cn, cm) = (omega_c_n.value(), omega_c_m.value());
    let sum = cn * cn + cm * cm;
    if sum == 0.0 {
        return Err(Error::NoPeaks);
    }
    let base = sum / (4.0 * gamma.value());
    let interference = 2.0 * cn * cm / sum * phi_li.cos();
    Ok((Freq(base * (1.0 - interference)), Freq(base * (1.0 + interference))))
}
