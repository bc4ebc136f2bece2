use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("closed-loop matrix is not Hurwitz (max real part of spectrum {0:.3e})")]
    NotStabilizing(f64),
    #[error("inadmissible instance: {0}")]
    Inadmissible(String),
    #[error("argument too close to a pole of tan (distance {0:.3e})")]
    PoleProximity(f64),
    #[error("argument too close to the branch cut of log: {0}")]
    BranchCut(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("Riccati solver failed: {0}")]
    Riccati(String),
    #[error("line search failed: {0}")]
    LineSearch(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Coarse error classes, stable across releases (used for CLI exit codes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Validation,
    Inadmissible,
    Numerical,
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::InvalidInput(_) | Error::Dimension(_) | Error::Validation(_) => {
                Category::Validation
            }
            Error::NotStabilizing(_) | Error::Inadmissible(_) | Error::BranchCut(_) => {
                Category::Inadmissible
            }
            Error::PoleProximity(_)
            | Error::Quadrature(_)
            | Error::Riccati(_)
            | Error::LineSearch(_)
            | Error::Numerical(_) => Category::Numerical,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
