use thiserror::Error;

/// Errors produced by the model, the analysis pipeline and the harness.
#[derive(Debug, Error)]
pub enum SomError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// The increase-factor pathology hit a neighborhood value at or above `C`.
    #[error("computation error: increase factor undefined (C = {c}, phi = {phi})")]
    IncreaseFactor { c: f64, phi: f64 },

    #[error("computation error: non-finite weight after update")]
    NonFinite,

    /// An upstream map produced no encoding neurons, so nothing can be projected.
    #[error("propagation error: {map} has no encoding neurons")]
    DeadUpstream { map: String },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl SomError {
    /// Short machine-readable kind, used by the CLI's error output.
    pub fn kind(&self) -> &'static str {
        match self {
            SomError::Config(_) => "config",
            SomError::Contract(_) => "contract",
            SomError::IncreaseFactor { .. } | SomError::NonFinite => "computation",
            SomError::DeadUpstream { .. } => "propagation",
            SomError::Calibration(_) => "calibration",
            SomError::Io { .. } => "io",
            SomError::Serde(_) | SomError::Csv(_) => "serialization",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        SomError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SomError>;
