use thiserror::Error;

/// Errors raised across the library.
///
/// The CLI maps [`Error::is_numerical_guard`] errors to exit status 2 and
/// every other error to exit status 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid state: {0}")]
    State(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("singular diffusion: {0}")]
    Singular(String),
    #[error("CFL violation: dt = {dt:.6e} exceeds limit {limit:.6e}; use at least {suggested_nt} time steps")]
    Cfl {
        dt: f64,
        limit: f64,
        suggested_nt: usize,
    },
    #[error("stencil error: {0}")]
    Stencil(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for CFL, utility-range, singularity and other numerical guards.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::Cfl { .. }
                | Error::Range(_)
                | Error::Numerical(_)
                | Error::Singular(_)
                | Error::Stencil(_)
        )
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(std::io::Error::other(e.to_string()))
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
