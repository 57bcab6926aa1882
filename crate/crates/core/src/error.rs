use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("basis degeneracy: Gram condition number {cond:.3e} exceeds {limit:.1e}; lower the degree or use extended precision")]
    BasisDegeneracy { cond: f64, limit: f64 },

    #[error("quadrature did not converge: node-doubling change {change:.3e} > {tol:.1e}")]
    QuadratureNonConvergence { change: f64, tol: f64 },

    #[error("eigen-solver did not converge after {sweeps} sweeps (off-diagonal norm {off:.3e})")]
    EigenNonConvergence { sweeps: usize, off: f64 },

    #[error("matrix is not positive definite (pivot {index} = {pivot:.3e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("bracket inversion: lower {lower} exceeds upper {upper} beyond tolerance")]
    BracketInversion { lower: f64, upper: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
