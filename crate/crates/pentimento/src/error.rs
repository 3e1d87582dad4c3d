use thiserror::Error;

/// Error type shared by the simulation and analysis modules.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an operation precondition (e.g. negative duration).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The theta sweep was exhausted without both transition fronts
    /// landing inside the carry chain.
    #[error("calibration failed for route {route}: {reason}")]
    Calibration { route: String, reason: String },

    /// A measurement trace saturated the chain in both polarities.
    #[error("measurement failed for route {route}: {reason}")]
    Measurement { route: String, reason: String },

    /// A phase schedule is malformed (e.g. Measure before Calibrate).
    #[error("schedule error: {0}")]
    Schedule(String),

    /// An analysis window is too short for the requested classifier.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Malformed input data (CSV schema, config files, empty inputs).
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
