use thiserror::Error;

/// Errors raised anywhere in the simulator and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("illegal state: {0}")]
    IllegalState(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Near-field distances are outside the free-space model's validity.
    #[error(
        "station `{station}` is {distance_m} m from victim `{victim}`, below one wavelength ({wavelength_m:.3} m)"
    )]
    SubWavelength {
        station: String,
        victim: String,
        distance_m: f64,
        wavelength_m: f64,
    },

    #[error("failed to parse scenario: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by the scenario/configuration rather than by the run itself.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
