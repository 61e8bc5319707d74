use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("level index out of range: ({i}, {j}) for dimension {dim}")]
    LevelIndex { i: usize, j: usize, dim: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("state invariant violated: {0}")]
    Invariant(String),

    #[error("degenerate mode ratio: p·ω_a + q·ω_b = 0 for (p, q) = ({p}, {q})")]
    DegenerateModes { p: i32, q: i32 },

    #[error("slow time dependence of H_(0,0) enters the second-order term for target ({l}, {k})")]
    SlowTermInSecondOrder { l: i32, k: i32 },

    #[error("integrator step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integrator exceeded {steps} steps at t = {t}")]
    TooManySteps { steps: usize, t: f64 },

    #[error("steady state is not unique: Liouvillian null space has dimension {nullity}")]
    SingularSteadyState { nullity: usize },

    #[error("resonance condition `{condition}` has no integer solution (nearest order {nearest:.6})")]
    NoIntegerOrder { condition: &'static str, nearest: f64 },

    #[error("negative radicand {0:.3e} in splitting formula")]
    NegativeRadicand(f64),

    #[error("no peaks exist: both control couplings vanish")]
    NoPeaks,

    #[error("expected 2 peaks in the double-ATS window, found {found}")]
    PeakCount { found: usize },

    #[error("fit did not converge after {iterations} iterations (residual {residual:.3e}, last center {center}, hwhm {hwhm})")]
    FitDiverged { iterations: usize, residual: f64, center: f64, hwhm: f64 },

    #[error("fit window holds {found} samples, need at least {needed}")]
    FitWindow { found: usize, needed: usize },

    #[error("{failed} of {total} scan points failed")]
    ScanFailed { failed: usize, total: usize },

    #[error("spectra have different scan coordinates")]
    CoordinateMismatch,

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name: name.to_string(), reason: reason.into() }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { path: path.into(), reason: reason.into() }
    }

    /// True when the error comes from bad input rather than a numerical
    /// failure; the CLI maps this to its exit code.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Dimension(_)
                | Error::LevelIndex { .. }
                | Error::InvalidParameter { .. }
                | Error::Config { .. }
                | Error::NoIntegerOrder { .. }
                | Error::DegenerateModes { .. }
                | Error::Io { .. }
        )
    }
}
