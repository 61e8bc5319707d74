//! Simulation of a four-level ladder system driven by a resonant local
//! oscillator and two far-detuned fields whose quantum frequency mixing
//! produces an effective field between the dressed upper states, with an
//! optional periodic modulation of the local oscillator.
//!
//! The crate builds the lab-frame and effective Hamiltonians, propagates the
//! Lindblad master equation to its (quasi-)steady state, turns the probe
//! coherence into transmission spectra and analyses the resulting
//! double Autler–Townes structure against closed-form predictions.

pub mod bessel;
pub mod config;
pub mod error;
pub mod floquet;
pub mod hamiltonian;
pub mod lindblad;
pub mod operator;
pub mod params;
pub mod qfm;
pub mod report;
pub mod runner;
pub mod spectra;

pub use error::{Error, Result};
pub use operator::{commutator, dagger, projector, DensityMatrix, Freq, Operator, C64};
