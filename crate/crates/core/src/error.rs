use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes, partitioned by how a driver should exit:
/// invalid input (1), numerical breakdown (2), energy-bound violation (3).
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Rejected before any computation: bad geometry, parameters, or state.
    InvalidInput { what: String },
    /// A numerical procedure failed to meet its tolerance.
    Numeric { what: String, residual: f64 },
    /// A field picked up a NaN or infinity at the given step.
    NonFinite { step: usize },
    /// Total energy exceeded its a-priori bound at the given step.
    EnergyBound { step: usize, energy: f64, bound: f64 },
}

impl Error {
    pub fn invalid(what: impl Into<String>) -> Self {
        Error::InvalidInput { what: what.into() }
    }

    /// Process exit code the failure class maps to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput { .. } => 1,
            Error::Numeric { .. } | Error::NonFinite { .. } => 2,
            Error::EnergyBound { .. } => 3,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput { what } => write!(f, "invalid input: {what}"),
            Error::Numeric { what, residual } => {
                write!(f, "numerical failure: {what} (residual {residual:e})")
            }
            Error::NonFinite { step } => {
                write!(f, "non-finite field value at step {step}")
            }
            Error::EnergyBound { step, energy, bound } => write!(
                f,
                "energy bound violated at step {step}: total {energy:e} exceeds bound {bound:e}"
            ),
        }
    }
}

impl std::error::Error for Error {}
