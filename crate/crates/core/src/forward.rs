//! Numerical forward problem for `y' = i (z j + j V(x)) y` on the half-line.
//!
//! Every integration uses the exponential midpoint rule
//! `u ← exp(h G(x + h/2)) u`. This is second order and keeps the determinant
//! and the (j-)unitarity of the exact flow. Each result is also computed with
//! half the step, and `4/3 ‖u_h - u_{h/2}‖` is reported as its error estimate.
//!
//! Weyl and reflection values come from the rescaled solution
//! `Ỹ = e^{-ixz} Y`, which satisfies `Ỹ' = (iz(j - I) + i j V) Ỹ` and tends
//! to `[I; 0]`. It is integrated backward from `x = L`, where the wanted
//! solution dominates.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::linalg::{c64, fro, identity, mat_exp, signature, solve, spectral_norm, I};
use crate::recovery::{assemble_potential, free_solution, ExplicitSystem};
use crate::{CMatrix, Error, Flavor, Result, Tolerances};

/// A potential `v(x)`, `x ≥ 0`, as an m1×m2 matrix function.
pub trait Potential: Sync {
    fn flavor(&self) -> Flavor;

    /// `(m1, m2)`.
    fn dims(&self) -> (usize, usize);

    fn eval(&self, x: f64) -> Result<CMatrix>;

    /// Upper bound for `∫_x^∞ ‖v(t)‖ dt`, when known.
    fn tail_bound(&self, _x: f64) -> Option<f64> {
        None
    }

    /// A truncation point the potential considers safe, when it has one.
    fn suggested_truncation(&self) -> Option<f64> {
        None
    }

    /// `V(x) = [0 v; v̆ 0]`.
    fn full(&self, x: f64) -> Result<CMatrix> {
        Ok(assemble_potential(self.flavor(), &self.eval(x)?))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ZeroPotential {
    pub flavor: Flavor,
    pub m1: usize,
    pub m2: usize,
}

impl Potential for ZeroPotential {
    fn flavor(&self) -> Flavor {
        self.flavor
    }

    fn dims(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    fn eval(&self, _x: f64) -> Result<CMatrix> {
        Ok(CMatrix::zeros(self.m1, self.m2))
    }

    fn tail_bound(&self, _x: f64) -> Option<f64> {
        Some(0.0)
    }

    fn suggested_truncation(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// The closed-form potential of an explicit system, with a fitted decay
/// envelope `‖v(x)‖ ≤ C e^{-2γx}`, `γ = min |Im σ(A)|`.
#[derive(Debug, Clone)]
pub struct ExplicitPotential {
    sys: ExplicitSystem,
    envelope: Option<(f64, f64)>,
}

impl ExplicitPotential {
    pub fn new(sys: ExplicitSystem) -> Result<Self> {
        let envelope = if sys.n() == 0 {
            Some((0.0, 1.0))
        } else {
            let gamma = sys.decay_rate();
            if gamma.is_finite() && gamma > 0.0 {
                let x_fit = sys.default_x_max();
                let mut c: f64 = 0.0;
                for k in 0..=200 {
                    let x = x_fit * k as f64 / 200.0;
                    let v = spectral_norm(&sys.potential(x)?);
                    c = c.max(v * (2.0 * gamma * x).exp());
                }
                // Safety factor for polynomial prefactors the fit may miss.
                Some((2.0 * c, gamma))
            } else {
                None
            }
        };
        Ok(Self { sys, envelope })
    }

    pub fn system(&self) -> &ExplicitSystem {
        &self.sys
    }
}

impl Potential for ExplicitPotential {
    fn flavor(&self) -> Flavor {
        self.sys.flavor()
    }

    fn dims(&self) -> (usize, usize) {
        (self.sys.m1(), self.sys.m2())
    }

    fn eval(&self, x: f64) -> Result<CMatrix> {
        self.sys.potential(x)
    }

    fn tail_bound(&self, x: f64) -> Option<f64> {
        self.envelope
            .map(|(c, gamma)| c * (-2.0 * gamma * x).exp() / (2.0 * gamma))
    }

    /// Where the tail bound drops below `1e-10`.
    fn suggested_truncation(&self) -> Option<f64> {
        self.envelope.map(|(c, gamma)| {
            if c == 0.0 {
                1.0
            } else {
                ((c / (2.0 * gamma * 1e-10)).ln() / (2.0 * gamma)).max(1.0)
            }
        })
    }
}

/// Samples of `v` on a strictly increasing grid starting at 0, linearly
/// interpolated in between and zero beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialGrid {
    flavor: Flavor,
    m1: usize,
    m2: usize,
    xs: Vec<f64>,
    samples: Vec<CMatrix>,
}

impl PotentialGrid {
    pub fn new(
        flavor: Flavor,
        m1: usize,
        m2: usize,
        xs: Vec<f64>,
        samples: Vec<CMatrix>,
    ) -> Result<Self> {
        if xs.is_empty() || xs.len() != samples.len() {
            return Err(Error::Config(format!(
                "potential grid needs matching, nonempty nodes and samples ({} vs {})",
                xs.len(),
                samples.len()
            )));
        }
        if xs[0] != 0.0 {
            return Err(Error::Config(format!(
                "potential grid must start at x = 0, got {}",
                xs[0]
            )));
        }
        if let Some(k) = xs.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Config(format!(
                "potential grid nodes must increase strictly (x[{}] = {}, x[{}] = {})",
                k,
                xs[k],
                k + 1,
                xs[k + 1]
            )));
        }
        if let Some(k) = samples.iter().position(|s| s.shape() != (m1, m2)) {
            return Err(Error::dim(
                "PotentialGrid",
                format!("sample {k} is not {m1}x{m2}"),
            ));
        }
        if let Some(k) = samples.iter().position(|s| !crate::linalg::is_finite(s)) {
            return Err(Error::Config(format!("potential sample {k} is not finite")));
        }
        Ok(Self {
            flavor,
            m1,
            m2,
            xs,
            samples,
        })
    }

    /// Samples `p` at `xs`.
    pub fn sample(p: &dyn Potential, xs: Vec<f64>) -> Result<Self> {
        let samples = xs.par_iter().map(|&x| p.eval(x)).collect::<Vec<_>>();
        let samples = samples.into_iter().collect::<Result<Vec<_>>>()?;
        let (m1, m2) = p.dims();
        Self::new(p.flavor(), m1, m2, xs, samples)
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn samples(&self) -> &[CMatrix] {
        &self.samples
    }

    pub fn last_node(&self) -> f64 {
        *self.xs.last().expect("grid is nonempty")
    }
}

impl Potential for PotentialGrid {
    fn flavor(&self) -> Flavor {
        self.flavor
    }

    fn dims(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    fn eval(&self, x: f64) -> Result<CMatrix> {
        if !(x >= 0.0) {
            return Err(Error::Config(format!("potential queried at x = {x} < 0")));
        }
        let k = self.xs.partition_point(|&t| t <= x);
        if k == self.xs.len() {
            return Ok(if x == self.last_node() {
                self.samples[k - 1].clone()
            } else {
                CMatrix::zeros(self.m1, self.m2)
            });
        }
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = (x - x0) / (x1 - x0);
        Ok(&self.samples[k - 1] * c64(1.0 - t, 0.0) + &self.samples[k] * c64(t, 0.0))
    }

    fn tail_bound(&self, x: f64) -> Option<f64> {
        (x >= self.last_node()).then_some(0.0)
    }
}

/// A potential given by a closure.
pub struct FnPotential<F> {
    pub flavor: Flavor,
    pub m1: usize,
    pub m2: usize,
    pub f: F,
}

impl<F: Fn(f64) -> CMatrix + Sync> Potential for FnPotential<F> {
    fn flavor(&self) -> Flavor {
        self.flavor
    }

    fn dims(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    fn eval(&self, x: f64) -> Result<CMatrix> {
        Ok((self.f)(x))
    }
}

/// Discretization and truncation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardConfig {
    pub h: f64,
    /// Truncation point; falls back to the potential's suggestion.
    pub l: Option<f64>,
    /// Optional ssa margin: Weyl values are only computed for `Im z > margin`.
    pub ssa_margin: Option<f64>,
    pub tolerances: Tolerances,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        Self {
            h: 1e-3,
            l: None,
            ssa_margin: None,
            tolerances: Tolerances::default(),
        }
    }
}

impl ForwardConfig {
    pub fn with_l(l: f64, h: f64) -> Self {
        Self {
            h,
            l: Some(l),
            ..Self::default()
        }
    }

    fn check_step(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Config(format!(
                "step h must be positive, got {}",
                self.h
            )));
        }
        if self.h < 1e-12 {
            return Err(Error::Config(format!(
                "step h = {:e} underflows (minimum 1e-12)",
                self.h
            )));
        }
        Ok(())
    }

    /// The truncation point to use for `p`.
    pub fn truncation(&self, p: &dyn Potential) -> Result<f64> {
        let l = match self.l.or_else(|| p.suggested_truncation()) {
            Some(l) => l,
            None => {
                return Err(Error::Config(
                    "this potential has no decay bound; an explicit truncation L is required"
                        .into(),
                ))
            }
        };
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Config(format!(
                "truncation L must be positive, got {l}"
            )));
        }
        Ok(l)
    }
}

/// A propagated quantity with its error estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagated {
    pub value: CMatrix,
    pub error_estimate: f64,
    /// Number of steps of the reported value.
    pub steps: usize,
}

fn step_count(length: f64, h: f64) -> usize {
    if length <= 0.0 {
        0
    } else {
        ((length / h).ceil() as usize).max(1)
    }
}

/// `V` at the midpoints of `steps` equal cells of `[0, length]`.
fn midpoint_samples(p: &dyn Potential, length: f64, steps: usize) -> Result<Vec<CMatrix>> {
    let dx = if steps == 0 {
        0.0
    } else {
        length / steps as f64
    };
    let samples: Vec<Result<CMatrix>> = (0..steps)
        .into_par_iter()
        .map(|k| p.full(dx * (k as f64 + 0.5)))
        .collect();
    samples.into_iter().collect()
}

/// Generator of the plain system, `i (z j + j V)`.
fn dirac_generator(j: &CMatrix, z: Complex64, v: &CMatrix) -> CMatrix {
    (j * z + j * v) * I
}

/// Generator of the rescaled system, `i z (j - I) + i j V`.
fn rescaled_generator(j: &CMatrix, z: Complex64, v: &CMatrix) -> CMatrix {
    let m = j.nrows();
    (j - identity(m)) * (I * z) + j * v * I
}

/// Applies the midpoint steps to `init`, forward in x or backward.
fn propagate(
    samples: &[CMatrix],
    dx: f64,
    init: CMatrix,
    backward: bool,
    generator: impl Fn(&CMatrix) -> CMatrix,
) -> Result<CMatrix> {
    let signed = if backward { -dx } else { dx };
    let mut u = init;
    let step = |u: CMatrix, v: &CMatrix| -> Result<CMatrix> {
        Ok(mat_exp(&(generator(v) * c64(signed, 0.0)))? * u)
    };
    if backward {
        for v in samples.iter().rev() {
            u = step(u, v)?;
        }
    } else {
        for v in samples {
            u = step(u, v)?;
        }
    }
    Ok(u)
}

/// Runs `f` with `steps` and `2 steps` and returns the coarse value with the estimate.
fn with_halving(
    p: &dyn Potential,
    length: f64,
    h: f64,
    f: impl Fn(&[CMatrix], f64) -> Result<CMatrix> + Sync,
) -> Result<Propagated> {
    let steps = step_count(length, h);
    let run = |n: usize| -> Result<CMatrix> {
        let samples = midpoint_samples(p, length, n)?;
        let dx = if n == 0 { 0.0 } else { length / n as f64 };
        f(&samples, dx)
    };
    let (coarse, fine) = rayon::join(|| run(steps), || run(2 * steps));
    let (coarse, fine) = (coarse?, fine?);
    Ok(Propagated {
        error_estimate: 4.0 / 3.0 * fro(&(&coarse - &fine)),
        value: coarse,
        steps,
    })
}

/// Normalized fundamental solution `u(x, z)`, `u(0, z) = I`.
pub fn fundamental_numeric(
    p: &dyn Potential,
    x: f64,
    z: Complex64,
    cfg: &ForwardConfig,
) -> Result<Propagated> {
    cfg.check_step()?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Config(format!(
            "x must be finite and nonnegative, got {x}"
        )));
    }
    let (m1, m2) = p.dims();
    let j = signature(m1, m2);
    with_halving(p, x, cfg.h, |samples, dx| {
        propagate(samples, dx, identity(m1 + m2), false, |v| {
            dirac_generator(&j, z, v)
        })
    })
}

/// Jost solution at the origin, `F(0, z)`, for real `z`.
pub fn jost_numeric(p: &dyn Potential, z: f64, cfg: &ForwardConfig) -> Result<Propagated> {
    cfg.check_step()?;
    let l = cfg.truncation(p)?;
    let (m1, m2) = p.dims();
    let j = signature(m1, m2);
    let zc = c64(z, 0.0);
    let terminal = free_solution(m1, m2, l, zc);
    let mut out = with_halving(p, l, cfg.h, |samples, dx| {
        propagate(samples, dx, terminal.clone(), true, |v| {
            dirac_generator(&j, zc, v)
        })
    })?;
    out.error_estimate += p.tail_bound(l).unwrap_or(0.0);
    Ok(out)
}

/// `Ỹ(0)` for the rescaled solution started at `[I; 0]` at `x = L`.
fn rescaled_at_origin(
    p: &dyn Potential,
    z: Complex64,
    cfg: &ForwardConfig,
) -> Result<(Propagated, f64)> {
    cfg.check_step()?;
    let l = cfg.truncation(p)?;
    let (m1, m2) = p.dims();
    let j = signature(m1, m2);
    let terminal = identity(m1 + m2).columns(0, m1).into_owned();
    let out = with_halving(p, l, cfg.h, |samples, dx| {
        propagate(samples, dx, terminal.clone(), true, |v| {
            rescaled_generator(&j, z, v)
        })
    })?;
    Ok((out, l))
}

fn ratio_of_blocks(
    y: &CMatrix,
    m1: usize,
    m2: usize,
    z: Complex64,
    tol: &Tolerances,
) -> Result<CMatrix> {
    let y1 = y.view((0, 0), (m1, m1)).into_owned();
    let y2 = y.view((m1, 0), (m2, m1)).into_owned();
    // Measured against the whole column block: a scalar Y1 has condition 1.
    let sv = crate::linalg::singular_values(&y1);
    let smallest = sv.last().copied().unwrap_or(0.0);
    let condition = spectral_norm(y) / smallest;
    if !(condition <= tol.y1_condition) {
        return Err(Error::NearSingularY1 { z, condition });
    }
    Ok(solve(&y1.transpose(), &y2.transpose(), "Y1(0, z)")?.transpose())
}

/// `Y₂(0) Y₁(0)⁻¹` from the rescaled backward solution, with propagated error.
fn block_ratio(p: &dyn Potential, z: Complex64, cfg: &ForwardConfig) -> Result<Propagated> {
    let (m1, m2) = p.dims();
    let (y, l) = rescaled_at_origin(p, z, cfg)?;
    let value = ratio_of_blocks(&y.value, m1, m2, z, &cfg.tolerances)?;
    // Perturbation of Y propagates through Y1⁻¹ on both blocks.
    let y1 = y.value.view((0, 0), (m1, m1)).into_owned();
    let amplification =
        spectral_norm(&crate::linalg::inverse(&y1, "Y1(0, z)")?) * (1.0 + spectral_norm(&value));
    let tail = p.tail_bound(l).unwrap_or(0.0);
    Ok(Propagated {
        value,
        error_estimate: amplification * (y.error_estimate + tail),
        steps: y.steps,
    })
}

/// Reflection coefficient `R(z) = Y₂(0, z) Y₁(0, z)⁻¹` for real `z`.
pub fn reflection_numeric(p: &dyn Potential, z: f64, cfg: &ForwardConfig) -> Result<Propagated> {
    block_ratio(p, c64(z, 0.0), cfg)
}

/// Weyl function `φ(z)` for `Im z > 0` (and above the ssa margin if one is set).
pub fn weyl_numeric(p: &dyn Potential, z: Complex64, cfg: &ForwardConfig) -> Result<Propagated> {
    if !(z.im > 0.0) {
        return Err(Error::Domain {
            z,
            reason: "Weyl values require Im z > 0".into(),
        });
    }
    if let (Flavor::Ssa, Some(margin)) = (p.flavor(), cfg.ssa_margin) {
        if !(z.im > margin) {
            return Err(Error::Domain {
                z,
                reason: format!("ssa Weyl values require Im z > {margin}"),
            });
        }
    }
    block_ratio(p, z, cfg)
}

/// `|det Y₁(0, t)|` for real `t`.
pub fn det_y1(p: &dyn Potential, t: f64, cfg: &ForwardConfig) -> Result<f64> {
    let (m1, _) = p.dims();
    let (y, _) = rescaled_at_origin(p, c64(t, 0.0), cfg)?;
    Ok(y.value
        .view((0, 0), (m1, m1))
        .into_owned()
        .determinant()
        .norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableKind {
    Reflection,
    Weyl,
    Mixed,
}

/// Values of `R(z)` (real points) and `φ(z)` (upper half-plane points).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    pub kind: TableKind,
    pub points: Vec<Complex64>,
    pub values: Vec<CMatrix>,
    pub errors: Vec<f64>,
    pub l: f64,
    pub h: f64,
}

/// Computes one value per point in parallel. Real points give reflection
/// values, upper half-plane points Weyl values.
pub fn spectral_table(
    p: &dyn Potential,
    points: &[Complex64],
    cfg: &ForwardConfig,
) -> Result<SpectralTable> {
    let l = cfg.truncation(p)?;
    let results: Vec<Result<Propagated>> = points
        .par_iter()
        .map(|&z| {
            if z.im == 0.0 {
                reflection_numeric(p, z.re, cfg)
            } else {
                weyl_numeric(p, z, cfg)
            }
        })
        .collect();
    let mut values = Vec::with_capacity(points.len());
    let mut errors = Vec::with_capacity(points.len());
    for r in results {
        let r = r?;
        values.push(r.value);
        errors.push(r.error_estimate);
    }
    let real = points.iter().filter(|z| z.im == 0.0).count();
    let kind = if real == points.len() {
        TableKind::Reflection
    } else if real == 0 {
        TableKind::Weyl
    } else {
        TableKind::Mixed
    };
    Ok(SpectralTable {
        kind,
        points: points.to_vec(),
        values,
        errors,
        l,
        h: cfg.h,
    })
}

/// Outcome of the boundedness check for a candidate `φ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwBound {
    /// `max_{x_k ≤ l} ‖e^{-i x_k z} u(x_k, z) [I; φ]‖`.
    pub sup: f64,
    pub witness_x: f64,
    /// `‖φ - φ_h‖` against the backward-integrated value.
    pub deviation: f64,
    /// Whether the deviation was within the integrator's resolution and treated as zero.
    pub deviation_resolved: bool,
}

/// Evaluates `sup ‖e^{-ixz} u(x, z) [I; φ]‖` over the step grid on `[0, l]`.
///
/// Direct forward integration amplifies rounding like `e^{2x Im z}`, so the
/// solution is split as `Ỹ(x) Ỹ₁(0)⁻¹ + e^{-ixz} u(x, z) [0; φ - φ_h]`, with
/// `Ỹ` and `φ_h` from the backward pass. The second term is dropped when
/// `‖φ - φ_h‖` is below the error estimate of `φ_h`.
pub fn gw_bound_check(
    p: &dyn Potential,
    phi: &CMatrix,
    z: Complex64,
    l: f64,
    cfg: &ForwardConfig,
) -> Result<GwBound> {
    cfg.check_step()?;
    let (m1, m2) = p.dims();
    if phi.shape() != (m2, m1) {
        return Err(Error::dim("gw_bound_check", format!("φ must be {m2}x{m1}")));
    }
    if !(l > 0.0 && l.is_finite()) {
        return Err(Error::Config(format!(
            "interval end l must be positive, got {l}"
        )));
    }
    let big_l = cfg
        .l
        .or_else(|| p.suggested_truncation())
        .unwrap_or(l)
        .max(l);
    let steps = step_count(big_l, cfg.h);
    let dx = big_l / steps as f64;
    let j = signature(m1, m2);
    let samples = midpoint_samples(p, big_l, steps)?;

    // Backward pass, keeping Ỹ at every node.
    let mut nodes = vec![CMatrix::zeros(m1 + m2, m1); steps + 1];
    nodes[steps] = identity(m1 + m2).columns(0, m1).into_owned();
    for k in (0..steps).rev() {
        let g = rescaled_generator(&j, z, &samples[k]) * c64(-dx, 0.0);
        nodes[k] = mat_exp(&g)? * &nodes[k + 1];
    }
    let phi_h = ratio_of_blocks(&nodes[0], m1, m2, z, &cfg.tolerances)?;
    let fine = block_ratio(
        p,
        z,
        &ForwardConfig {
            l: Some(big_l),
            ..*cfg
        },
    )?;
    let resolution = fine.error_estimate.max(fro(&(&fine.value - &phi_h)));

    let delta = phi - &phi_h;
    let deviation = fro(&delta);
    let resolved = deviation <= resolution;
    let y1_inv = crate::linalg::inverse(&nodes[0].view((0, 0), (m1, m1)).into_owned(), "Y1(0, z)")?;

    let mut w = CMatrix::zeros(m1 + m2, m1);
    if !resolved {
        w.view_mut((m1, 0), (m2, m1)).copy_from(&delta);
    }
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..=steps {
        let x = dx * k as f64;
        if x > l * (1.0 + 1e-12) {
            break;
        }
        let value = spectral_norm(&(&nodes[k] * &y1_inv + &w));
        if value > best.0 {
            best = (value, x);
        }
        if k < steps && !resolved {
            w = mat_exp(&(rescaled_generator(&j, z, &samples[k]) * c64(dx, 0.0)))? * w;
        }
    }
    Ok(GwBound {
        sup: best.0,
        witness_x: best.1,
        deviation,
        deviation_resolved: resolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real_rows, from_rows};
    use crate::realization::Realization;
    use crate::recovery::build;

    fn sech_potential() -> ExplicitPotential {
        let r = Realization::new(
            from_real_rows(1, 1, &[0.0]),
            from_real_rows(1, 1, &[1.0]),
            from_real_rows(1, 1, &[1.0]),
        )
        .unwrap();
        ExplicitPotential::new(build(&r, Flavor::Ssa).unwrap()).unwrap()
    }

    fn sa_potential() -> ExplicitPotential {
        let r = Realization::new(
            from_rows(1, 1, &[c64(0.0, -1.0)]),
            from_real_rows(1, 1, &[1.0]),
            from_real_rows(1, 1, &[0.5]),
        )
        .unwrap();
        ExplicitPotential::new(build(&r, Flavor::Sa).unwrap()).unwrap()
    }

    /// A smooth 2x1 sa potential with a nontrivial phase.
    fn wavy() -> FnPotential<impl Fn(f64) -> CMatrix + Sync> {
        FnPotential {
            flavor: Flavor::Sa,
            m1: 2,
            m2: 1,
            f: |x: f64| {
                let e = (-x).exp();
                from_rows(
                    2,
                    1,
                    &[
                        c64(0.8 * e * x.cos(), 0.3 * e),
                        c64(-0.2 * e, 0.5 * e * (2.0 * x).sin()),
                    ],
                )
            },
        }
    }

    fn cfg(l: f64, h: f64) -> ForwardConfig {
        ForwardConfig::with_l(l, h)
    }

    #[test]
    fn free_system_is_exact() {
        let p = ZeroPotential {
            flavor: Flavor::Sa,
            m1: 2,
            m2: 1,
        };
        let z = c64(1.3, 0.2);
        let u = fundamental_numeric(&p, 2.5, z, &cfg(1.0, 0.01)).unwrap();
        assert!(fro(&(u.value - free_solution(2, 1, 2.5, z))) < 1e-13);
        let f = jost_numeric(&p, 0.7, &cfg(5.0, 0.01)).unwrap();
        assert!(fro(&(f.value - identity(3))) < 1e-13);
        assert_eq!(
            reflection_numeric(&p, 0.7, &cfg(5.0, 0.01)).unwrap().value,
            CMatrix::zeros(1, 2)
        );
        assert_eq!(
            weyl_numeric(&p, c64(0.0, 1.0), &cfg(5.0, 0.01))
                .unwrap()
                .value,
            CMatrix::zeros(1, 2)
        );
    }

    #[test]
    fn determinant_and_symmetry_laws() {
        let cases: Vec<Box<dyn Potential>> = vec![
            Box::new(sech_potential()),
            Box::new(sa_potential()),
            Box::new(wavy()),
        ];
        for p in &cases {
            let (m1, m2) = p.dims();
            let j = signature(m1, m2);
            for &z in &[-1.5, 0.4, 2.0] {
                let x = 3.0;
                let u = fundamental_numeric(p.as_ref(), x, c64(z, 0.0), &cfg(1.0, 0.01))
                    .unwrap()
                    .value;
                let expected = (I * z * x * (m1 as f64 - m2 as f64)).exp();
                assert!((u.determinant() - expected).norm() < 1e-8);
                let defect = match p.flavor() {
                    Flavor::Sa => fro(&(u.adjoint() * &j * &u - &j)),
                    Flavor::Ssa => fro(&(u.adjoint() * &u - identity(m1 + m2))),
                };
                assert!(defect < 1e-8, "{defect}");
            }
        }
    }

    #[test]
    fn fundamental_matches_explicit_oracle() {
        let p = sech_potential();
        let z = c64(1.0, 0.0);
        let u = fundamental_numeric(&p, 5.0, z, &cfg(1.0, 1e-3)).unwrap();
        let exact = p.system().normalized_fundamental(5.0, z).unwrap();
        assert!(fro(&(&u.value - &exact)) < 1e-6);
        assert!(u.error_estimate < 1e-5);
    }

    #[test]
    fn second_order_convergence() {
        let p = sech_potential();
        let z = c64(1.0, 0.0);
        let exact = p.system().normalized_fundamental(5.0, z).unwrap();
        let e1 = fro(&(fundamental_numeric(&p, 5.0, z, &cfg(1.0, 0.02))
            .unwrap()
            .value
            - &exact));
        let e2 = fro(&(fundamental_numeric(&p, 5.0, z, &cfg(1.0, 0.01))
            .unwrap()
            .value
            - &exact));
        let ratio = e1 / e2;
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn jost_matches_explicit() {
        let p = sech_potential();
        let f = jost_numeric(&p, 2.0, &cfg(15.0, 1e-3)).unwrap();
        let exact = p.system().jost(0.0, 2.0).unwrap();
        assert!(fro(&(&f.value - &exact)) < 1e-5);
        let f30 = jost_numeric(&p, 2.0, &cfg(30.0, 1e-3)).unwrap();
        assert!(fro(&(&f.value - &f30.value)) < 1e-6);
    }

    #[test]
    fn reflection_round_trips() {
        let r = reflection_numeric(&sech_potential(), 2.0, &cfg(15.0, 1e-3)).unwrap();
        assert!((r.value[(0, 0)] - c64(0.5, 0.0)).norm() < 2e-4);
        let r = reflection_numeric(&sa_potential(), 1.0, &cfg(15.0, 1e-3)).unwrap();
        assert!((r.value[(0, 0)] - c64(0.25, -0.25)).norm() < 2e-4);
        assert!(r.error_estimate < 2e-4);
    }

    #[test]
    fn weyl_round_trips() {
        let w = weyl_numeric(&sa_potential(), I, &cfg(15.0, 1e-3)).unwrap();
        assert!((w.value[(0, 0)] - c64(0.0, -0.25)).norm() < 1e-4);
        let w = weyl_numeric(&sech_potential(), c64(0.0, 2.0), &cfg(15.0, 1e-3)).unwrap();
        assert!((w.value[(0, 0)] - c64(0.0, -0.5)).norm() < 1e-4);
        assert!(matches!(
            weyl_numeric(&sa_potential(), c64(1.0, 0.0), &ForwardConfig::default()),
            Err(Error::Domain { .. })
        ));
        let guarded = ForwardConfig {
            ssa_margin: Some(4.0),
            ..cfg(15.0, 1e-3)
        };
        assert!(matches!(
            weyl_numeric(&sech_potential(), c64(0.0, 2.0), &guarded),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn sech_exceptional_point_is_reported() {
        let err = reflection_numeric(&sech_potential(), 0.0, &cfg(15.0, 1e-3)).unwrap_err();
        assert!(
            matches!(err, Error::NearSingularY1 { .. }) || matches!(err, Error::Singular { .. }),
            "{err:?}"
        );
        assert!(det_y1(&sech_potential(), 0.0, &cfg(15.0, 1e-3)).unwrap() < 1e-5);
    }

    #[test]
    fn grid_potential_interpolates_and_truncates() {
        let xs = vec![0.0, 1.0, 3.0];
        let samples = vec![
            from_real_rows(1, 1, &[1.0]),
            from_real_rows(1, 1, &[3.0]),
            from_real_rows(1, 1, &[-1.0]),
        ];
        let g = PotentialGrid::new(Flavor::Sa, 1, 1, xs, samples).unwrap();
        assert_eq!(g.eval(0.5).unwrap()[(0, 0)], c64(2.0, 0.0));
        assert_eq!(g.eval(2.0).unwrap()[(0, 0)], c64(1.0, 0.0));
        assert_eq!(g.eval(3.0).unwrap()[(0, 0)], c64(-1.0, 0.0));
        assert_eq!(g.eval(3.5).unwrap()[(0, 0)], c64(0.0, 0.0));
        assert!(g.eval(-0.1).is_err());
        assert!(matches!(
            jost_numeric(&g, 1.0, &ForwardConfig::default()),
            Err(Error::Config(_))
        ));
        assert!(PotentialGrid::new(
            Flavor::Sa,
            1,
            1,
            vec![0.0, 0.0],
            vec![CMatrix::zeros(1, 1); 2]
        )
        .is_err());
    }

    #[test]
    fn sampled_sech_reproduces_reflection() {
        let p = sech_potential();
        let xs: Vec<f64> = (0..=15_000).map(|k| k as f64 * 1e-3).collect();
        let grid = PotentialGrid::sample(&p, xs).unwrap();
        let a = reflection_numeric(&grid, 2.0, &cfg(15.0, 1e-3)).unwrap();
        assert!((a.value[(0, 0)] - c64(0.5, 0.0)).norm() < 2e-4);
    }

    #[test]
    fn explicit_tail_bound_dominates() {
        let p = sech_potential();
        // ∫_x^∞ 2/cosh(2t) dt ≤ 2 e^{-2x}.
        for &x in &[1.0, 5.0, 10.0] {
            assert!(p.tail_bound(x).unwrap() >= 2.0 * (-2.0 * x).exp() * 0.99);
        }
        assert!(p.suggested_truncation().unwrap() > 5.0);
    }

    #[test]
    fn gw_bound_examples() {
        let zero = ZeroPotential {
            flavor: Flavor::Ssa,
            m1: 1,
            m2: 1,
        };
        let b = gw_bound_check(
            &zero,
            &CMatrix::zeros(1, 1),
            c64(0.0, 1.0),
            5.0,
            &cfg(5.0, 0.01),
        )
        .unwrap();
        assert!((b.sup - 1.0).abs() < 1e-12);

        let p = sech_potential();
        let z = c64(0.0, 2.0);
        let phi = from_rows(1, 1, &[c64(0.0, -0.5)]);
        let c = ForwardConfig {
            l: None,
            ..cfg(15.0, 1e-3)
        };
        let s10 = gw_bound_check(&p, &phi, z, 10.0, &c).unwrap();
        let s20 = gw_bound_check(&p, &phi, z, 20.0, &c).unwrap();
        assert!(s10.sup.is_finite() && s10.deviation_resolved);
        assert!(s20.sup <= s10.sup * 1.01);

        let wrong = from_rows(1, 1, &[c64(0.5, -0.5)]);
        let w5 = gw_bound_check(&p, &wrong, z, 5.0, &c).unwrap();
        let w10 = gw_bound_check(&p, &wrong, z, 10.0, &c).unwrap();
        assert!(w10.sup > 100.0 * w5.sup);
    }

    #[test]
    fn table_kinds() {
        let p = sa_potential();
        let c = cfg(15.0, 1e-2);
        let t = spectral_table(&p, &[c64(1.0, 0.0), c64(0.0, 1.0)], &c).unwrap();
        assert_eq!(t.kind, TableKind::Mixed);
        assert_eq!(t.values.len(), 2);
        assert!(spectral_table(&p, &[c64(1.0, -1.0)], &c).is_err());
    }
}
