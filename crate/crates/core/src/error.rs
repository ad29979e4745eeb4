use thiserror::Error;

/// Errors raised by the solvers, the data model, and file I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("UAV and user are coincident (3-D distance {distance:e} m below floor {floor:e} m)")]
    CoincidentPoints { distance: f64, floor: f64 },

    #[error("altitude must be positive, got {0} m")]
    NonPositiveAltitude(f64),

    #[error("MSLT {mslt} dB must exceed the minimum loss {l_lower} dB")]
    ThresholdBelowMinimumLoss { mslt: f64, l_lower: f64 },

    #[error("degenerate loss bounds: upper {upper} dB is not above lower {lower} dB")]
    DegenerateLossBounds { lower: f64, upper: f64 },

    #[error("invalid {path}: {reason}")]
    Invalid { path: String, reason: String },

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed CSV in {path}: {reason}")]
    Csv { path: String, reason: String },
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
