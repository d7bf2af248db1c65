//! Explicit recovery of matrix Dirac systems on the half-line from rational
//! reflection coefficients, together with an independent numerical forward
//! solver used to confirm that the recovered potentials reproduce the data.
//!
//! The Dirac system is `y' = i (z j + j V(x)) y` with `j = diag(I_m1, -I_m2)`
//! and off-diagonal potential `V = [0 v; v̆ 0]`. Two flavors are supported:
//! self-adjoint (`v̆ = v*`) and skew-self-adjoint (`v̆ = -v*`).
//!
//! Module map:
//! - [`linalg`]: dense complex kernels (exponential, Sylvester, Riccati, Gram integrals).
//! - [`realization`]: state-space triples `C (zI - A)^{-1} B` and their validation.
//! - [`recovery`]: the explicit system built from a realization and everything evaluated from it.
//! - [`forward`]: the numerical Dirac integrator, Jost solutions, reflection and Weyl values.
//! - [`harness`]: round trips and invariant sweeps packaged as verification reports.
//! - [`wire`]: JSON encoding of complex matrices and realizations.

pub mod error;
pub mod forward;
pub mod harness;
pub mod linalg;
pub mod realization;
pub mod recovery;
pub mod tolerances;
pub mod wire;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use tolerances::Tolerances;

/// Dense complex matrix, row/column counts carried by the storage.
pub type CMatrix = DMatrix<Complex64>;

/// Which symmetry ties the lower-left potential block to `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// Self-adjoint: `v̆ = v*`.
    Sa,
    /// Skew-self-adjoint: `v̆ = -v*`.
    Ssa,
}

impl Flavor {
    pub fn as_str(self) -> &'static str {
        match self {
            Flavor::Sa => "sa",
            Flavor::Ssa => "ssa",
        }
    }
}

impl std::fmt::Display for Flavor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Flavor {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sa" => Ok(Flavor::Sa),
            "ssa" => Ok(Flavor::Ssa),
            other => Err(format!("unknown flavor `{other}` (expected `sa` or `ssa`)")),
        }
    }
}
