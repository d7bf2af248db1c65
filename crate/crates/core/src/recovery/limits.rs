//! Limits at infinity (`κ_R`, `Q_∞`), the normalizers `χ`, `ω`, the Jost
//! solution and the closed-form reflection coefficient.

use num_complex::Complex64;

use super::{free_solution, ExplicitSystem};
use crate::linalg::{c64, fro, hermitian_part, identity, solve, solve_sylvester, HermitianPd, I};
use crate::{CMatrix, Error, Flavor, Result};

const MAX_DOUBLINGS: usize = 40;

/// Both closed forms of the reflection coefficient and how far apart they are.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionCheck {
    /// `∓ i θ₂* S(0)⁻¹ (z - 𝒜)⁻¹ θ₁` (minus for sa, plus for ssa).
    pub value: CMatrix,
    /// Relative distance to `𝒞 (z - 𝒜)⁻¹ ℬ` evaluated from the source realization.
    pub source_discrepancy: f64,
    /// Relative distance to `w21 w11⁻¹` built from `w_A(0, z)`, when that is defined at `z`.
    pub block_discrepancy: Option<f64>,
}

fn relative(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = fro(&(a - b));
    if d == 0.0 {
        0.0
    } else {
        d / fro(b).max(f64::MIN_POSITIVE)
    }
}

impl ExplicitSystem {
    fn require(&self, flavor: Flavor) -> Result<()> {
        if self.flavor == flavor {
            Ok(())
        } else {
            Err(Error::WrongFlavor { expected: flavor })
        }
    }

    /// `κ_R = lim R(x)⁻¹` (sa only), computed once and cached.
    pub fn kappa_r(&self) -> Result<&CMatrix> {
        self.require(Flavor::Sa)?;
        self.kappa
            .get_or_init(|| self.compute_kappa())
            .as_ref()
            .map_err(Clone::clone)
    }

    fn compute_kappa(&self) -> Result<CMatrix> {
        let n = self.n();
        if n == 0 {
            return Ok(CMatrix::zeros(0, 0));
        }
        let floor = 1e-6 * fro(&solve(self.s0.matrix(), &identity(n), "S(0)")?);
        let scale = self.decay_scale();
        let mut x = if scale.is_finite() {
            scale.clamp(0.1, 1e3)
        } else {
            1.0
        };
        let mut prev = self.frame(x)?.r_inv;
        let mut trace = Vec::new();
        let mut converged = None;
        for _ in 0..MAX_DOUBLINGS {
            x *= 2.0;
            let next = self.frame(x)?.r_inv;
            let increment = fro(&(&next - &prev)) / fro(&next).max(floor);
            trace.push(format!("x={x:.4e}: Δ={increment:.3e}"));
            prev = next;
            if increment <= self.tol.limit_cauchy {
                converged = Some(prev.clone());
                break;
            }
        }
        let kappa = converged.ok_or_else(|| Error::NotConverged {
            context: "κ_R = lim R(x)⁻¹",
            trace: trace.join("; "),
        })?;
        let kappa = hermitian_part(&kappa);
        let residual = self.kappa_residual(&kappa);
        if residual > self.tol.kappa {
            trace.push(format!("certificate residual {residual:.3e}"));
            return Err(Error::NotConverged {
                context: "κ_R Riccati certificate",
                trace: trace.join("; "),
            });
        }
        Ok(kappa)
    }

    /// Relative residual of `i (A* κ - κ A) + κ θ₂θ₂* κ = 0`.
    pub fn kappa_residual(&self, kappa: &CMatrix) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        let p2 = &self.theta2 * self.theta2.adjoint();
        let lhs = (self.a.adjoint() * kappa - kappa * &self.a) * I + kappa * &p2 * kappa;
        let k = fro(kappa);
        let scale = 2.0 * fro(&self.a) * k + k * k * fro(&p2);
        if scale == 0.0 {
            fro(&lhs)
        } else {
            fro(&lhs) / scale
        }
    }

    /// `χ(z) = I + i θ₂* κ_R (A - z)⁻¹ θ₂` (sa only).
    pub fn chi(&self, z: Complex64) -> Result<CMatrix> {
        let kappa = self.kappa_r()?;
        let r2 = self.resolvent_apply(z, &self.theta2)?;
        Ok(identity(self.m2()) + self.theta2.adjoint() * kappa * r2 * I)
    }

    /// `Q_∞`, the solution of `A Q - Q A* = i θ₁θ₁*` (ssa only), cached.
    pub fn q_infinity(&self) -> Result<&HermitianPd> {
        self.require(Flavor::Ssa)?;
        self.q_inf
            .get_or_init(|| {
                if self.n() == 0 {
                    return HermitianPd::new(CMatrix::zeros(0, 0));
                }
                let rhs = &self.theta1 * self.theta1.adjoint() * I;
                let q = solve_sylvester(&self.a, &self.a.adjoint(), &rhs)?;
                HermitianPd::with_tolerance(q, 1e-10)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    /// Relative residual of `A Q - Q A* - i θ₁θ₁*` for a candidate `Q_∞`.
    pub fn q_infinity_residual(&self, q: &CMatrix) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        let p1 = &self.theta1 * self.theta1.adjoint();
        let r = &self.a * q - q * self.a.adjoint() - &p1 * I;
        fro(&r) / (2.0 * fro(&self.a) * fro(q) + fro(&p1)).max(f64::MIN_POSITIVE)
    }

    /// `ω(z) = I - i θ₁* Q_∞⁻¹ (A - z)⁻¹ θ₁` (ssa only).
    pub fn omega(&self, z: Complex64) -> Result<CMatrix> {
        let q = self.q_infinity()?;
        let r1 = self.resolvent_apply(z, &self.theta1)?;
        let q_inv_r1 = if self.n() == 0 {
            r1
        } else {
            solve(q.matrix(), &r1, "Q_∞")?
        };
        Ok(identity(self.m1()) - self.theta1.adjoint() * q_inv_r1 * I)
    }

    /// Jost solution `F(x, z)` for real `z`.
    pub fn jost(&self, x: f64, z: f64) -> Result<CMatrix> {
        let zc = c64(z, 0.0);
        let (m1, m2) = (self.m1(), self.m2());
        let base = self.fundamental_explicit(x, zc)?;
        let mut normalizer = identity(m1 + m2);
        match self.flavor {
            Flavor::Sa => {
                let chi = self.chi(zc)?;
                let inv = solve(&chi, &identity(m2), "χ(z)")?;
                normalizer.view_mut((m1, m1), (m2, m2)).copy_from(&inv);
            }
            Flavor::Ssa => {
                let omega = self.omega(zc)?;
                let inv = solve(&omega, &identity(m1), "ω(z)")?;
                normalizer.view_mut((0, 0), (m1, m1)).copy_from(&inv);
            }
        }
        Ok(base * normalizer)
    }

    /// `‖F(x, z) e^{-ixzj} - I‖`, the distance from the free asymptotics.
    pub fn jost_asymptotic_residual(&self, x: f64, z: f64) -> Result<f64> {
        let f = self.jost(x, z)?;
        let free_inv = free_solution(self.m1(), self.m2(), -x, c64(z, 0.0));
        Ok(crate::linalg::spectral_norm(
            &(f * free_inv - identity(self.m1() + self.m2())),
        ))
    }

    /// Reflection coefficient from the explicit data (θ-form).
    pub fn reflection(&self, z: Complex64) -> Result<CMatrix> {
        Ok(self.reflection_checked(z)?.value)
    }

    pub fn reflection_checked(&self, z: Complex64) -> Result<ReflectionCheck> {
        let (m1, m2) = (self.m1(), self.m2());
        let reference = self.source.eval(z)?;
        if self.n() == 0 {
            return Ok(ReflectionCheck {
                value: CMatrix::zeros(m2, m1),
                source_discrepancy: 0.0,
                block_discrepancy: Some(0.0),
            });
        }
        let a_cal = self.a_cal()?;
        let shifted = identity(self.n()) * z - a_cal;
        let resolvent_theta1 = solve(&shifted, &self.theta1, "z - 𝒜")
            .map_err(|_| Error::Pole { context: "𝒜", z })?;
        let s0_inv = solve(self.s0.matrix(), &resolvent_theta1, "S(0)")?;
        let sign = match self.flavor {
            Flavor::Sa => -I,
            Flavor::Ssa => I,
        };
        let value = self.theta2.adjoint() * s0_inv * sign;
        let block_discrepancy = self.block_reflection(z).ok().map(|b| relative(&b, &value));
        Ok(ReflectionCheck {
            source_discrepancy: relative(&value, &reference),
            value,
            block_discrepancy,
        })
    }

    /// `w21 w11⁻¹` from `w_A(0, z)`.
    fn block_reflection(&self, z: Complex64) -> Result<CMatrix> {
        let (m1, m2) = (self.m1(), self.m2());
        let w = self.transfer_matrix(0.0, z)?;
        let w11 = w.view((0, 0), (m1, m1)).into_owned();
        let w21 = w.view((m1, 0), (m2, m1)).into_owned();
        Ok(solve(&w11.transpose(), &w21.transpose(), "w11")?.transpose())
    }
}

/// `(1/2π) ∫ (A - t)⁻¹ θ₁θ₁* (A* - t)⁻¹ dt` by composite Simpson on
/// `t = tan u`; an independent cross-check of `Q_∞`.
pub fn q_infinity_quadrature(sys: &ExplicitSystem, panels: usize) -> Result<CMatrix> {
    let n = sys.n();
    if n == 0 {
        return Ok(CMatrix::zeros(0, 0));
    }
    let p1 = sys.theta1() * sys.theta1().adjoint();
    let panels = panels.max(2) & !1;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let h = 2.0 * half_pi / panels as f64;
    let integrand = |u: f64| -> Result<CMatrix> {
        if (u.abs() - half_pi).abs() < 1e-15 {
            return Ok(p1.clone());
        }
        let t = u.tan();
        let left = sys.resolvent_apply(c64(t, 0.0), sys.theta1())?;
        Ok(&left * left.adjoint() * c64(1.0 + t * t, 0.0))
    };
    let mut acc = CMatrix::zeros(n, n);
    for k in 0..=panels {
        let u = -half_pi + h * k as f64;
        let weight = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += integrand(u)? * c64(weight, 0.0);
    }
    Ok(hermitian_part(
        &(acc * c64(h / 3.0 / (2.0 * std::f64::consts::PI), 0.0)),
    ))
}
