use serde::{Deserialize, Serialize};

/// Numerical thresholds shared across the crate. Every field can be overridden
/// from a job configuration; the defaults are the documented contracts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative singular-value threshold for Krylov / minimality rank decisions.
    pub rank: f64,
    /// Minimum eigenvalue separation for Sylvester solves (relative to the operator norms).
    pub sylvester_separation: f64,
    /// Relative Riccati residual accepted for a returned solution.
    pub riccati: f64,
    /// Largest imaginary part tolerated on σ(A) by the self-adjoint side condition.
    pub side_condition: f64,
    /// Relative residual for the S(x) identities.
    pub identity: f64,
    /// Residual for the κ_R relation.
    pub kappa: f64,
    /// Relative Cauchy increment at which the κ_R limit counts as converged.
    pub limit_cauchy: f64,
    /// Condition number above which S(x) (via its balanced frame) is declared singular.
    pub singular_condition: f64,
    /// Condition number above which Y1(0, z) is declared nearly singular.
    pub y1_condition: f64,
    /// Deviation allowed for checks mediated by the ODE integrator.
    pub ode: f64,
    /// Slack on the contractivity certificate.
    pub contractive: f64,
    /// Threshold for |det Y1(0, t)| below which a scan point is flagged.
    pub det_y1_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank: 1e-10,
            sylvester_separation: 1e-10,
            riccati: 1e-10,
            side_condition: 1e-10,
            identity: 1e-10,
            kappa: 1e-9,
            limit_cauchy: 1e-12,
            singular_condition: 1e14,
            y1_condition: 1e12,
            ode: 2e-4,
            contractive: 1e-9,
            det_y1_floor: 1e-8,
        }
    }
}
