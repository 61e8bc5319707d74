//! The physical parameter record, in linear units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{BareDriveParams, MixingParams, PeriodicDriveParams};
use crate::lindblad::{LevelScheme, TransmissionConfig};
use crate::operator::Freq;
use crate::qfm::mixing_parameters;

fn default_kappa() -> f64 {
    50.0
}

/// Every frequency is a linear `X/(2π)` value. Fields that
/// only some models need are optional and checked when a model asks for
/// them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub omega_p: Freq,
    pub omega_c: Freq,
    #[serde(default)]
    pub delta_c: Freq,
    #[serde(rename = "omega_L")]
    pub omega_l: Option<Freq>,
    pub gamma: Freq,

    /// Far-detuned field pair driving |3⟩ ↔ |4⟩.
    pub omega_1: Option<Freq>,
    pub delta_1: Option<Freq>,
    pub omega_2: Option<Freq>,
    pub delta_2: Option<Freq>,

    /// Mixing-field overrides; derived from the field pair when absent.
    #[serde(rename = "omega_M")]
    pub omega_m: Option<Freq>,
    #[serde(rename = "freq_M")]
    pub freq_m: Option<Freq>,
    #[serde(rename = "delta_M")]
    pub delta_m: Option<Freq>,
    #[serde(rename = "phi_M", default)]
    pub phi_m: f64,

    /// LO modulation `1 + g·cos(ωt + φ)`.
    #[serde(default)]
    pub g: f64,
    pub omega: Option<Freq>,
    #[serde(default)]
    pub phi: f64,

    /// Γ₁..Γ₄; defaults to decay of |2⟩ only, at rate `gamma`.
    pub decay_rates: Option<[Freq; 4]>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
}

fn need(value: Option<Freq>, name: &str, model: &str) -> Result<Freq> {
    value.ok_or_else(|| Error::param(name, format!("required by the {model} model")))
}

impl ModelParams {
    /// Probe, control and decay only; everything else unset.
    pub fn minimal(omega_p: f64, omega_c: f64, gamma: f64) -> Self {
        ModelParams {
            omega_p: Freq(omega_p),
            omega_c: Freq(omega_c),
            delta_c: Freq::ZERO,
            omega_l: None,
            gamma: Freq(gamma),
            omega_1: None,
            delta_1: None,
            omega_2: None,
            delta_2: None,
            omega_m: None,
            freq_m: None,
            delta_m: None,
            phi_m: 0.0,
            g: 0.0,
            omega: None,
            phi: 0.0,
            decay_rates: None,
            kappa: default_kappa(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let freqs = [
            ("omega_p", Some(self.omega_p)),
            ("omega_c", Some(self.omega_c)),
            ("delta_c", Some(self.delta_c)),
            ("omega_L", self.omega_l),
            ("gamma", Some(self.gamma)),
            ("omega_1", self.omega_1),
            ("delta_1", self.delta_1),
            ("omega_2", self.omega_2),
            ("delta_2", self.delta_2),
            ("omega_M", self.omega_m),
            ("freq_M", self.freq_m),
            ("delta_M", self.delta_m),
            ("omega", self.omega),
        ];
        for (name, v) in freqs {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::param(name, "must be finite"));
                }
            }
        }
        for (name, v) in [("phi_M", self.phi_m), ("g", self.g), ("phi", self.phi), ("kappa", self.kappa)] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if !(self.gamma.value() > 0.0) {
            return Err(Error::param("gamma", "must be positive"));
        }
        if self.kappa < 0.0 {
            return Err(Error::param("kappa", "must be ≥ 0"));
        }
        if let Some(l) = self.omega_l {
            if l.value() < 0.0 {
                return Err(Error::param("omega_L", "must be ≥ 0"));
            }
        }
        self.scheme()?;
        Ok(())
    }

    pub fn scheme(&self) -> Result<LevelScheme> {
        match &self.decay_rates {
            Some(rates) => LevelScheme::new(rates.to_vec()),
            None => LevelScheme::cascade(self.gamma),
        }
    }

    pub fn transmission_config(&self) -> TransmissionConfig {
        TransmissionConfig { kappa: self.kappa }
    }

    pub fn omega_l(&self, model: &str) -> Result<Freq> {
        need(self.omega_l, "omega_L", model)
    }

    pub fn bare_drive(&self) -> Result<BareDriveParams> {
        let model = "full";
        Ok(BareDriveParams {
            omega_p: self.omega_p,
            omega_c: self.omega_c,
            delta_c: self.delta_c,
            omega_l: self.omega_l(model)?,
            omega_1: need(self.omega_1, "omega_1", model)?,
            delta_1: need(self.delta_1, "delta_1", model)?,
            omega_2: need(self.omega_2, "omega_2", model)?,
            delta_2: need(self.delta_2, "delta_2", model)?,
        })
    }

    /// Explicit mixing parameters when all three are given, otherwise the
    /// closed forms from the far-detuned field pair.
    pub fn mixing(&self, model: &str) -> Result<MixingParams> {
        let mixing = match (self.omega_m, self.freq_m, self.delta_m) {
            (Some(omega_m), Some(freq_m), Some(delta_m)) => MixingParams { omega_m, freq_m, delta_m, phi_m: self.phi_m },
            (None, None, None) => {
                let m = mixing_parameters(
                    need(self.omega_1, "omega_1", model)?,
                    need(self.delta_1, "delta_1", model)?,
                    need(self.omega_2, "omega_2", model)?,
                    need(self.delta_2, "delta_2", model)?,
                )?;
                MixingParams { phi_m: self.phi_m, ..m }
            }
            _ => {
                return Err(Error::param(
                    "omega_M",
                    "omega_M, freq_M and delta_M must be given together or not at all",
                ))
            }
        };
        mixing.validate()?;
        Ok(mixing)
    }

    pub fn drive(&self, model: &str) -> Result<PeriodicDriveParams> {
        let omega = if self.g == 0.0 { self.omega.unwrap_or(Freq::ZERO) } else { need(self.omega, "omega", model)? };
        let drive = PeriodicDriveParams { g: self.g, omega, phi: self.phi };
        drive.validate()?;
        Ok(drive)
    }
}
