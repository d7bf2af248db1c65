use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {detail}")]
    Dimension {
        context: &'static str,
        detail: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("Sylvester equation is singular: spectra overlap (separation {separation:e})")]
    SingularSylvester { separation: f64 },

    #[error("no admissible Riccati solution: {diagnostic}")]
    NoAdmissibleSolution { diagnostic: String },

    #[error("matrix is singular or too ill-conditioned in {context} (condition {condition:e})")]
    Singular {
        context: &'static str,
        condition: f64,
    },

    #[error("S(x) is numerically singular at x = {x} (condition {condition:e})")]
    SingularS { x: f64, condition: f64 },

    #[error("z = {z} lies on the spectrum of {context}")]
    Pole { context: &'static str, z: Complex64 },

    #[error("limit did not converge in {context}: {trace}")]
    NotConverged {
        context: &'static str,
        trace: String,
    },

    #[error("Y1(0, z) is nearly singular at z = {z} (condition {condition:e})")]
    NearSingularY1 { z: Complex64, condition: f64 },

    #[error("z = {z} is outside the admissible domain: {reason}")]
    Domain { z: Complex64, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("Schur decomposition failed to converge after {iterations} iterations")]
    SchurNoConvergence { iterations: usize },

    #[error("operation requires flavor {expected}")]
    WrongFlavor { expected: crate::Flavor },

    #[error("invalid realization: {0}")]
    InvalidRealization(String),
}

impl Error {
    pub(crate) fn dim(context: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            context,
            detail: detail.into(),
        }
    }

    /// Numerical failure of the mathematics (as opposed to bad input shape or configuration).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularSylvester { .. }
                | Error::NoAdmissibleSolution { .. }
                | Error::Singular { .. }
                | Error::SingularS { .. }
                | Error::Pole { .. }
                | Error::NotConverged { .. }
                | Error::NearSingularY1 { .. }
                | Error::SchurNoConvergence { .. }
                | Error::InvalidRealization(_)
                | Error::Domain { .. }
        )
    }
}
