use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite {what} at point {point:?}")]
    NonFinite { what: &'static str, point: Vec<f64> },

    #[error("quadrature did not converge ({context}): coarse {coarse:e}, fine {fine:e}, tolerance {tol:e}")]
    Quadrature {
        context: String,
        coarse: f64,
        fine: f64,
        tol: f64,
    },

    #[error("integral diverges ({context}); partial value {partial:e}")]
    Divergent { context: String, partial: f64 },

    #[error("too few usable scales: {usable} (need at least {required})")]
    InsufficientScales { usable: usize, required: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
