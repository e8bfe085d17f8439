use thiserror::Error;

/// Errors produced by the force, modulation, readout and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input lies outside the domain where the model is defined
    /// (non-positive gap, closed gap, zero modulation where a ratio is needed).
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested frequency is at or above the Nyquist limit.
    #[error("aliasing: {frequency_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    Aliasing { frequency_hz: f64, nyquist_hz: f64 },

    /// Run configuration is inconsistent (step too coarse, noise band
    /// covering a known line, mismatched spectral grids).
    #[error("configuration error: {0}")]
    Config(String),

    /// No resonance peak stands out of the floor.
    #[error("detection failure: {0}")]
    Detection(String),

    /// The bias ladder did not produce a usable sideband.
    #[error("calibration failure: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
