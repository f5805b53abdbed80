use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or an unsupported setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// Arguments outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular configuration: {0}")]
    Singularity(String),

    #[error("integration error: {0}")]
    Integration(String),

    /// The wave function is not resolved by the grid.
    #[error("resolution error: spectral tail mass {tail_mass:e} exceeds {threshold:e}")]
    Resolution { tail_mass: f64, threshold: f64 },

    #[error("degenerate slice at y = {y}: slice norm {norm:e} below threshold")]
    DegenerateSlice { y: f64, norm: f64 },

    #[error("malformed history file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors raised by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singularity(_)
                | Error::Integration(_)
                | Error::Resolution { .. }
                | Error::DegenerateSlice { .. }
        )
    }
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
