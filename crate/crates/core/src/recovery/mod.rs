//! The explicit system `(A, S(0), θ₁, θ₂)` recovered from a realization, and
//! everything evaluated from it: `S(x)`, the potential `v(x)`, the transfer
//! matrix `w_A(x, z)`, the limit objects and the Jost solution.
//!
//! With `Λ(x) = [e^{-ixA} θ₁, e^{ixA} θ₂]` the two flavors use
//!
//! ```text
//! sa : S(x) = S(0) + ∫_0^x Λ Λ* dt ,   A S - S A* = i Λ j Λ*
//! ssa: S(x) = S(0) + ∫_0^x Λ j Λ* dt,  A S - S A* = i Λ Λ*
//! ```
//!
//! `S(x)` itself grows exponentially, so the potential and the transfer matrix
//! are evaluated through a balanced frame: `R(x) = e^{-ixA} S(x) e^{ixA*}`
//! for sa and `Q(x) = e^{ixA} S(x) e^{-ixA*}` for ssa. Each is a sum of
//! bounded Gram integrals, and every exponential that multiplies its inverse
//! decays.

mod limits;

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

pub use limits::{q_infinity_quadrature, ReflectionCheck};

use crate::linalg::{
    c64, condition_number, eigenvalues, fro, gram_integral, hermitian_part, identity, inverse,
    is_controllable_with, mat_exp, signature, solve, solve_riccati_with, spectral_norm,
    HermitianPd, RiccatiBranch, I,
};
use crate::realization::Realization;
use crate::wire::{complex_to_wire, matrix_to_wire, WireComplex, WireMatrix};
use crate::{CMatrix, Error, Flavor, Result, Tolerances};

#[derive(Debug, Clone)]
pub struct ExplicitSystem {
    flavor: Flavor,
    a: CMatrix,
    s0: HermitianPd,
    theta1: CMatrix,
    theta2: CMatrix,
    source: Realization,
    riccati: RiccatiReport,
    spectrum: Vec<Complex64>,
    tol: Tolerances,
    kappa: OnceLock<Result<CMatrix>>,
    q_inf: OnceLock<Result<HermitianPd>>,
}

/// How the Riccati solution behind `S(0)` was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiccatiReport {
    pub relative_residual: f64,
    pub absolute_residual: f64,
    pub newton_steps: usize,
    pub branch: RiccatiBranch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SMatrixValue {
    pub x: f64,
    pub s: CMatrix,
    /// `Λ(x)`, n×m.
    pub lambda: CMatrix,
    /// Condition number of the balanced frame (`R(x)` for sa, `Q(x)` for ssa).
    pub condition: f64,
}

/// Balanced quantities at one `x`. `M12 = e^{ixA*} S⁻¹ e^{ixA}` and
/// `M21 = e^{-ixA*} S⁻¹ e^{-ixA}`.
#[derive(Debug, Clone)]
pub struct Frame {
    pub x: f64,
    /// `R(x)` for sa, `Q(x)` for ssa.
    pub balanced: CMatrix,
    pub r_inv: CMatrix,
    pub q_inv: CMatrix,
    pub m12: CMatrix,
    pub m21: CMatrix,
    pub condition: f64,
}

/// Builds the explicit system for `r` (assumed minimal).
pub fn build(r: &Realization, flavor: Flavor) -> Result<ExplicitSystem> {
    build_with(r, flavor, &Tolerances::default())
}

pub fn build_with(r: &Realization, flavor: Flavor, tol: &Tolerances) -> Result<ExplicitSystem> {
    let sol = solve_riccati_with(r.a(), r.b(), r.c(), flavor, tol)?;
    let n = r.n();
    let x = sol.x.matrix().clone();
    let theta1 = r.b().clone();
    let phase = match flavor {
        Flavor::Sa => -I,
        Flavor::Ssa => I,
    };
    let theta2 = &x * r.c().adjoint() * phase;
    let a = if n == 0 {
        CMatrix::zeros(0, 0)
    } else {
        // 𝒜 + i ℬ ℬ* X⁻¹, using (X⁻¹ℬ)* = ℬ* X⁻¹ for Hermitian X.
        r.a() + r.b() * solve(&x, r.b(), "build: X")?.adjoint() * I
    };
    let spectrum = eigenvalues(&a)?;
    let sys = ExplicitSystem {
        flavor,
        a,
        s0: sol.x,
        theta1,
        theta2,
        source: r.clone(),
        riccati: RiccatiReport {
            relative_residual: sol.relative_residual,
            absolute_residual: sol.absolute_residual,
            newton_steps: sol.newton_steps,
            branch: sol.branch,
        },
        spectrum,
        tol: *tol,
        kappa: OnceLock::new(),
        q_inf: OnceLock::new(),
    };
    sys.check_invariants()?;
    Ok(sys)
}

impl ExplicitSystem {
    fn check_invariants(&self) -> Result<()> {
        if self.n() == 0 {
            return Ok(());
        }
        let residual = self.identity_residual_at(&self.s0, &self.lambda(0.0)?);
        if residual > self.tol.identity {
            return Err(Error::InvalidRealization(format!(
                "recovered system violates A S0 - S0 A* identity (relative residual {residual:e})"
            )));
        }
        if !is_controllable_with(&self.a, &self.theta1, self.tol.rank)? {
            return Err(Error::InvalidRealization(
                "pair (A, θ₁) is not controllable; reduce the realization to a minimal one".into(),
            ));
        }
        if self.flavor == Flavor::Ssa {
            if let Some(z) = self.spectrum.iter().find(|z| z.im <= 0.0) {
                return Err(Error::InvalidRealization(format!(
                    "recovered A has eigenvalue {z} outside the open upper half-plane"
                )));
            }
        }
        Ok(())
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m1(&self) -> usize {
        self.theta1.ncols()
    }

    pub fn m2(&self) -> usize {
        self.theta2.ncols()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn s0(&self) -> &HermitianPd {
        &self.s0
    }

    pub fn theta1(&self) -> &CMatrix {
        &self.theta1
    }

    pub fn theta2(&self) -> &CMatrix {
        &self.theta2
    }

    pub fn source(&self) -> &Realization {
        &self.source
    }

    pub fn riccati(&self) -> &RiccatiReport {
        &self.riccati
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    /// `1 / min |Im σ(A)|`, infinite when `A` has a real eigenvalue and zero for n = 0.
    pub fn decay_scale(&self) -> f64 {
        let gamma = self.decay_rate();
        if self.n() == 0 {
            0.0
        } else {
            1.0 / gamma
        }
    }

    /// `min |Im σ(A)|` (infinite for n = 0).
    pub fn decay_rate(&self) -> f64 {
        self.spectrum
            .iter()
            .map(|z| z.im.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Default end of the x-range: ten decay scales.
    pub fn default_x_max(&self) -> f64 {
        let scale = self.decay_scale();
        if scale.is_finite() && scale > 0.0 {
            10.0 * scale
        } else {
            10.0
        }
    }

    /// `𝒜 = A - i θ₁θ₁* S(0)⁻¹`, recomputed from the explicit data.
    pub fn a_cal(&self) -> Result<CMatrix> {
        if self.n() == 0 {
            return Ok(CMatrix::zeros(0, 0));
        }
        let s0_inv_theta1 = solve(self.s0.matrix(), &self.theta1, "S(0)")?;
        Ok(&self.a - &self.theta1 * s0_inv_theta1.adjoint() * I)
    }

    fn j_weight(&self) -> CMatrix {
        match self.flavor {
            Flavor::Sa => signature(self.m1(), self.m2()),
            Flavor::Ssa => identity(self.m1() + self.m2()),
        }
    }

    /// `Λ(x) = [e^{-ixA} θ₁, e^{ixA} θ₂]`.
    pub fn lambda(&self, x: f64) -> Result<CMatrix> {
        let n = self.n();
        let (m1, m2) = (self.m1(), self.m2());
        let mut out = CMatrix::zeros(n, m1 + m2);
        if n == 0 {
            return Ok(out);
        }
        let e_minus = mat_exp(&(&self.a * c64(0.0, -x)))?;
        let e_plus = mat_exp(&(&self.a * c64(0.0, x)))?;
        out.view_mut((0, 0), (n, m1))
            .copy_from(&(e_minus * &self.theta1));
        out.view_mut((0, m1), (n, m2))
            .copy_from(&(e_plus * &self.theta2));
        Ok(out)
    }

    /// `‖A S - S A* - i Λ J Λ*‖ / (‖A‖‖S‖)` with `J = j` (sa) or `I` (ssa).
    fn identity_residual_at(&self, s: &CMatrix, lambda: &CMatrix) -> f64 {
        let lhs = &self.a * s - s * self.a.adjoint();
        let rhs = lambda * self.j_weight() * lambda.adjoint() * I;
        let scale = fro(&self.a) * fro(s);
        fro(&(lhs - rhs)) / scale.max(f64::MIN_POSITIVE)
    }

    fn check_x(x: f64) -> Result<()> {
        if x >= 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "x must be finite and nonnegative, got {x}"
            )))
        }
    }

    fn p1(&self) -> CMatrix {
        &self.theta1 * self.theta1.adjoint()
    }

    fn p2(&self) -> CMatrix {
        &self.theta2 * self.theta2.adjoint()
    }

    /// `∫_0^x e^{-itA} W e^{itA*} dt`
    fn gram_minus(&self, w: &CMatrix, x: f64) -> Result<CMatrix> {
        gram_integral(&(&self.a * -I), w, &(self.a.adjoint() * I), x)
    }

    /// `∫_0^x e^{itA} W e^{-itA*} dt`
    fn gram_plus(&self, w: &CMatrix, x: f64) -> Result<CMatrix> {
        gram_integral(&(&self.a * I), w, &(self.a.adjoint() * -I), x)
    }

    /// `S(x)` by closed-form Gram integrals.
    pub fn s_matrix(&self, x: f64) -> Result<SMatrixValue> {
        Self::check_x(x)?;
        let lambda = self.lambda(x)?;
        if self.n() == 0 {
            return Ok(SMatrixValue {
                x,
                s: CMatrix::zeros(0, 0),
                lambda,
                condition: 1.0,
            });
        }
        let first = self.gram_minus(&self.p1(), x)?;
        let second = self.gram_plus(&self.p2(), x)?;
        let s = match self.flavor {
            Flavor::Sa => self.s0.matrix() + first + second,
            Flavor::Ssa => self.s0.matrix() + first - second,
        };
        let s = hermitian_part(&s);
        let frame = self.frame(x)?;
        Ok(SMatrixValue {
            x,
            s,
            lambda,
            condition: frame.condition,
        })
    }

    /// Relative residual of `A S(x) - S(x) A* = i Λ J Λ*`.
    pub fn identity_residual(&self, x: f64) -> Result<f64> {
        if self.n() == 0 {
            return Ok(0.0);
        }
        let sv = self.s_matrix(x)?;
        Ok(self.identity_residual_at(&sv.s, &sv.lambda))
    }

    /// The balanced frame at `x`; fails with a singular-S error naming `x`.
    pub fn frame(&self, x: f64) -> Result<Frame> {
        Self::check_x(x)?;
        let n = self.n();
        if n == 0 {
            let e = CMatrix::zeros(0, 0);
            return Ok(Frame {
                x,
                balanced: e.clone(),
                r_inv: e.clone(),
                q_inv: e.clone(),
                m12: e.clone(),
                m21: e,
                condition: 1.0,
            });
        }
        let s0 = self.s0.matrix();
        match self.flavor {
            Flavor::Sa => {
                let e_m = mat_exp(&(&self.a * c64(0.0, -x)))?;
                let inner = s0 + self.gram_minus(&self.p1(), x)?;
                let r = hermitian_part(
                    &(&e_m * inner * e_m.adjoint() + self.gram_minus(&self.p2(), x)?),
                );
                let condition = self.checked_condition(&r, x)?;
                let r_inv = hermitian_part(&inverse(&r, "R(x)")?);
                let e2 = &e_m * &e_m;
                let e2_adj = e2.adjoint();
                Ok(Frame {
                    x,
                    q_inv: hermitian_part(&(&e2_adj * &r_inv * &e2)),
                    m12: &e2_adj * &r_inv,
                    m21: &r_inv * &e2,
                    r_inv,
                    balanced: r,
                    condition,
                })
            }
            Flavor::Ssa => {
                let e_p = mat_exp(&(&self.a * c64(0.0, x)))?;
                let inner = s0 - self.gram_plus(&self.p2(), x)?;
                let q = hermitian_part(
                    &(&e_p * inner * e_p.adjoint() + self.gram_plus(&self.p1(), x)?),
                );
                let condition = self.checked_condition(&q, x)?;
                let q_inv = hermitian_part(&inverse(&q, "Q(x)")?);
                let e2 = &e_p * &e_p;
                let e2_adj = e2.adjoint();
                Ok(Frame {
                    x,
                    r_inv: hermitian_part(&(&e2_adj * &q_inv * &e2)),
                    m12: &q_inv * &e2,
                    m21: &e2_adj * &q_inv,
                    q_inv,
                    balanced: q,
                    condition,
                })
            }
        }
    }

    fn checked_condition(&self, m: &CMatrix, x: f64) -> Result<f64> {
        let condition = condition_number(m);
        if !(condition <= self.tol.singular_condition) {
            return Err(Error::SingularS { x, condition });
        }
        Ok(condition)
    }

    /// `v(x) = -2i θ₁* e^{ixA*} S(x)⁻¹ e^{ixA} θ₂`, an m1×m2 matrix.
    pub fn potential(&self, x: f64) -> Result<CMatrix> {
        if self.n() == 0 {
            Self::check_x(x)?;
            return Ok(CMatrix::zeros(self.m1(), self.m2()));
        }
        let f = self.frame(x)?;
        Ok(self.theta1.adjoint() * f.m12 * &self.theta2 * c64(0.0, -2.0))
    }

    /// `V(x) = [0 v; v̆ 0]` with the flavor's `v̆`.
    pub fn full_potential(&self, x: f64) -> Result<CMatrix> {
        Ok(assemble_potential(self.flavor, &self.potential(x)?))
    }

    /// Solves `(A - z) Y = rhs`, refusing `z` on the spectrum.
    pub(crate) fn resolvent_apply(&self, z: Complex64, rhs: &CMatrix) -> Result<CMatrix> {
        if self.n() == 0 {
            return Ok(CMatrix::zeros(0, rhs.ncols()));
        }
        let threshold = 1e-12 * spectral_norm(&self.a).max(1.0);
        if self.spectrum.iter().any(|p| (p - z).norm() < threshold) {
            return Err(Error::Pole { context: "A", z });
        }
        let shifted = &self.a - identity(self.n()) * z;
        solve(&shifted, rhs, "A - z").map_err(|_| Error::Pole { context: "A", z })
    }

    /// `w_A(x, z) = I - i J Λ* S⁻¹ (A - z)⁻¹ Λ` with `J = j` (sa) or `I` (ssa).
    pub fn transfer_matrix(&self, x: f64, z: Complex64) -> Result<CMatrix> {
        let (m1, m2) = (self.m1(), self.m2());
        let m = m1 + m2;
        if self.n() == 0 {
            Self::check_x(x)?;
            return Ok(identity(m));
        }
        let f = self.frame(x)?;
        let r1 = self.resolvent_apply(z, &self.theta1)?;
        let r2 = self.resolvent_apply(z, &self.theta2)?;
        let s = match self.flavor {
            Flavor::Sa => I,
            Flavor::Ssa => -I,
        };
        let t1 = self.theta1.adjoint();
        let t2 = self.theta2.adjoint();
        let mut w = CMatrix::zeros(m, m);
        w.view_mut((0, 0), (m1, m1))
            .copy_from(&(identity(m1) - &t1 * &f.q_inv * &r1 * I));
        w.view_mut((0, m1), (m1, m2))
            .copy_from(&(&t1 * &f.m12 * &r2 * -I));
        w.view_mut((m1, 0), (m2, m1))
            .copy_from(&(&t2 * &f.m21 * &r1 * s));
        w.view_mut((m1, m1), (m2, m2))
            .copy_from(&(identity(m2) + &t2 * &f.r_inv * &r2 * s));
        Ok(w)
    }

    /// `û(x, z) = w_A(x, z) e^{ixzj}`, a fundamental solution of the Dirac system.
    pub fn fundamental_explicit(&self, x: f64, z: Complex64) -> Result<CMatrix> {
        Ok(self.transfer_matrix(x, z)? * free_solution(self.m1(), self.m2(), x, z))
    }

    /// Normalized fundamental solution `u(x, z) = û(x, z) û(0, z)⁻¹`.
    pub fn normalized_fundamental(&self, x: f64, z: Complex64) -> Result<CMatrix> {
        let at_x = self.fundamental_explicit(x, z)?;
        let at_0 = self.fundamental_explicit(0.0, z)?;
        Ok(solve(&at_0.transpose(), &at_x.transpose(), "û(0, z)")?.transpose())
    }

    /// JSON summary of the system.
    pub fn summary(&self) -> SystemSummary {
        SystemSummary {
            flavor: self.flavor,
            n: self.n(),
            m1: self.m1(),
            m2: self.m2(),
            a: matrix_to_wire(&self.a),
            s0: matrix_to_wire(self.s0.matrix()),
            theta1: matrix_to_wire(&self.theta1),
            theta2: matrix_to_wire(&self.theta2),
            spectrum: self.spectrum.iter().map(|z| complex_to_wire(*z)).collect(),
            riccati: self.riccati.clone(),
        }
    }
}

/// Sidecar description of an explicit system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSummary {
    pub flavor: Flavor,
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    #[serde(rename = "A")]
    pub a: WireMatrix,
    #[serde(rename = "S0")]
    pub s0: WireMatrix,
    pub theta1: WireMatrix,
    pub theta2: WireMatrix,
    pub spectrum: Vec<WireComplex>,
    pub riccati: RiccatiReport,
}

/// `e^{ixzj}`.
pub fn free_solution(m1: usize, m2: usize, x: f64, z: Complex64) -> CMatrix {
    let phase = (I * z * x).exp();
    let inv_phase = (-I * z * x).exp();
    let mut d = CMatrix::zeros(m1 + m2, m1 + m2);
    for k in 0..m1 {
        d[(k, k)] = phase;
    }
    for k in m1..m1 + m2 {
        d[(k, k)] = inv_phase;
    }
    d
}

/// `[0 v; v̆ 0]` with `v̆ = v*` (sa) or `-v*` (ssa).
pub fn assemble_potential(flavor: Flavor, v: &CMatrix) -> CMatrix {
    let (m1, m2) = (v.nrows(), v.ncols());
    let mut out = CMatrix::zeros(m1 + m2, m1 + m2);
    out.view_mut((0, m1), (m1, m2)).copy_from(v);
    let lower = match flavor {
        Flavor::Sa => v.adjoint(),
        Flavor::Ssa => -v.adjoint(),
    };
    out.view_mut((m1, 0), (m2, m1)).copy_from(&lower);
    out
}

/// Free-function forms of the explicit-system methods.
pub fn s_matrix(sys: &ExplicitSystem, x: f64) -> Result<SMatrixValue> {
    sys.s_matrix(x)
}

pub fn potential(sys: &ExplicitSystem, x: f64) -> Result<CMatrix> {
    sys.potential(x)
}

pub fn transfer_matrix(sys: &ExplicitSystem, x: f64, z: Complex64) -> Result<CMatrix> {
    sys.transfer_matrix(x, z)
}

pub fn kappa_r(sys: &ExplicitSystem) -> Result<CMatrix> {
    sys.kappa_r().cloned()
}

pub fn chi(sys: &ExplicitSystem, z: Complex64) -> Result<CMatrix> {
    sys.chi(z)
}

pub fn q_infinity(sys: &ExplicitSystem) -> Result<HermitianPd> {
    sys.q_infinity().cloned()
}

pub fn omega(sys: &ExplicitSystem, z: Complex64) -> Result<CMatrix> {
    sys.omega(z)
}

pub fn jost_explicit(sys: &ExplicitSystem, x: f64, z: f64) -> Result<CMatrix> {
    sys.jost(x, z)
}

pub fn reflection_explicit(sys: &ExplicitSystem, z: Complex64) -> Result<CMatrix> {
    sys.reflection(z)
}
