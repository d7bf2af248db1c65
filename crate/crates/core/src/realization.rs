//! State-space realizations `R(z) = C (zI_n - A)^{-1} B` of strictly proper
//! rational matrix functions.

use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{
    c64, eigenvalues, ensure_finite, ensure_square, identity, is_controllable_with,
    reachable_basis, solve, spectral_norm,
};
use crate::{CMatrix, Error, Flavor, Result, Tolerances};

#[derive(Debug, Clone)]
pub struct Realization {
    a: CMatrix,
    b: CMatrix,
    c: CMatrix,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl PartialEq for Realization {
    fn eq(&self, other: &Self) -> bool {
        self.a == other.a && self.b == other.b && self.c == other.c
    }
}

impl Realization {
    /// `a` is n×n, `b` n×m1, `c` m2×n. Port sizes are read off `b` and `c`.
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let n = ensure_square(&a, "Realization")?;
        if b.nrows() != n {
            return Err(Error::dim(
                "Realization",
                format!("ℬ has {} rows, expected {n}", b.nrows()),
            ));
        }
        if c.ncols() != n {
            return Err(Error::dim(
                "Realization",
                format!("𝒞 has {} columns, expected {n}", c.ncols()),
            ));
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::dim(
                "Realization",
                "port dimensions m1, m2 must be positive",
            ));
        }
        ensure_finite(&a, "Realization: 𝒜")?;
        ensure_finite(&b, "Realization: ℬ")?;
        ensure_finite(&c, "Realization: 𝒞")?;
        Ok(Self {
            a,
            b,
            c,
            spectrum: OnceLock::new(),
        })
    }

    /// Same as [`Realization::new`] but also checks the declared port sizes.
    pub fn with_ports(a: CMatrix, b: CMatrix, c: CMatrix, m1: usize, m2: usize) -> Result<Self> {
        if b.ncols() != m1 || c.nrows() != m2 {
            return Err(Error::dim(
                "Realization",
                format!(
                    "declared m1={m1}, m2={m2} but ℬ has {} columns and 𝒞 has {} rows",
                    b.ncols(),
                    c.nrows()
                ),
            ));
        }
        Self::new(a, b, c)
    }

    /// The zero function (n = 0).
    pub fn zero(m1: usize, m2: usize) -> Result<Self> {
        Self::new(
            CMatrix::zeros(0, 0),
            CMatrix::zeros(0, m1),
            CMatrix::zeros(m2, 0),
        )
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m1(&self) -> usize {
        self.b.ncols()
    }

    pub fn m2(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    /// Eigenvalues of 𝒜 (the poles of a minimal realization).
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum
            .get_or_init(|| eigenvalues(&self.a).unwrap_or_default())
    }

    /// `𝒞 (z I - 𝒜)^{-1} ℬ` by a linear solve.
    pub fn eval(&self, z: Complex64) -> Result<CMatrix> {
        let n = self.n();
        if n == 0 {
            return Ok(CMatrix::zeros(self.m2(), self.m1()));
        }
        let threshold = 1e-12 * spectral_norm(&self.a).max(1.0);
        if self.spectrum().iter().any(|p| (p - z).norm() < threshold) {
            return Err(Error::Pole { context: "𝒜", z });
        }
        let shifted = identity(n) * z - &self.a;
        let resolvent_b = solve(&shifted, &self.b, "eval_rational")
            .map_err(|_| Error::Pole { context: "𝒜", z })?;
        Ok(&self.c * resolvent_b)
    }

    pub fn is_minimal(&self, rank_tol: f64) -> Result<bool> {
        Ok(is_controllable_with(&self.a, &self.b, rank_tol)?
            && is_controllable_with(&self.a.adjoint(), &self.c.adjoint(), rank_tol)?)
    }
}

/// Free-function form of [`Realization::eval`].
pub fn eval_rational(r: &Realization, z: Complex64) -> Result<CMatrix> {
    r.eval(z)
}

/// Removes unreachable and then unobservable states by orthogonal projection
/// onto staircase bases. A realization that is already minimal is returned
/// unchanged, which makes the reduction idempotent.
pub fn minimal_reduce(r: &Realization) -> Result<Realization> {
    minimal_reduce_with(r, Tolerances::default().rank)
}

pub fn minimal_reduce_with(r: &Realization, rank_tol: f64) -> Result<Realization> {
    let n = r.n();
    if n == 0 {
        return Ok(r.clone());
    }
    let reach = reachable_basis(r.a(), r.b(), rank_tol)?;
    let (a1, b1, c1) = if reach.ncols() == n {
        (r.a().clone(), r.b().clone(), r.c().clone())
    } else {
        (
            reach.adjoint() * r.a() * &reach,
            reach.adjoint() * r.b(),
            r.c() * &reach,
        )
    };
    let k = a1.nrows();
    let observe = reachable_basis(&a1.adjoint(), &c1.adjoint(), rank_tol)?;
    let (a2, b2, c2) = if observe.ncols() == k {
        (a1, b1, c1)
    } else {
        (
            observe.adjoint() * &a1 * &observe,
            observe.adjoint() * &b1,
            &c1 * &observe,
        )
    };
    // Port sizes survive even when every state is removed.
    let b2 = if b2.nrows() == 0 {
        CMatrix::zeros(0, r.m1())
    } else {
        b2
    };
    let c2 = if c2.ncols() == 0 {
        CMatrix::zeros(r.m2(), 0)
    } else {
        c2
    };
    Realization::new(a2, b2, c2)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub flavor: Flavor,
    pub minimal: bool,
    pub poles_in_upper_half_plane: Vec<[f64; 2]>,
    pub poles_on_real_axis: Vec<[f64; 2]>,
    /// Estimated sup over the real axis of the spectral norm (infinite with a real pole).
    pub sup_norm_on_axis: f64,
    /// Real point where the estimate was attained.
    pub sup_witness: Option<f64>,
    pub contractive: bool,
    /// Whether the realization meets the hypotheses of its flavor's recovery theorem.
    pub valid: bool,
    pub messages: Vec<String>,
}

/// Options for the contractivity certificate.
#[derive(Debug, Clone, Copy)]
pub struct SupNormOptions {
    /// Number of uniform sub-intervals of `[-10ρ, 10ρ]`.
    pub intervals: usize,
    /// Number of grid maxima refined by golden-section search.
    pub refine: usize,
}

impl Default for SupNormOptions {
    fn default() -> Self {
        Self {
            intervals: 10_000,
            refine: 8,
        }
    }
}

/// Sup-norm estimate on the real axis with its witness point.
pub fn sup_norm_on_axis(r: &Realization, opts: SupNormOptions) -> (f64, Option<f64>) {
    if r.n() == 0 {
        return (0.0, None);
    }
    let norm_at = |t: f64| -> f64 {
        match r.eval(c64(t, 0.0)) {
            Ok(m) => spectral_norm(&m),
            Err(_) => f64::INFINITY,
        }
    };
    let rho = r
        .spectrum()
        .iter()
        .map(|z| z.norm())
        .fold(1.0_f64, f64::max);
    let half_width = 10.0 * rho;
    let intervals = opts.intervals.max(2);
    let step = 2.0 * half_width / intervals as f64;
    let ts: Vec<f64> = (0..=intervals)
        .map(|k| -half_width + step * k as f64)
        .collect();
    let values: Vec<f64> = ts.iter().map(|&t| norm_at(t)).collect();

    let mut best = (f64::NEG_INFINITY, None);
    let mut consider = |v: f64, t: f64| {
        if v > best.0 {
            best = (v, Some(t));
        }
    };
    for (&t, &v) in ts.iter().zip(&values) {
        consider(v, t);
    }

    let mut peaks: Vec<usize> = (1..intervals)
        .filter(|&k| values[k] >= values[k - 1] && values[k] >= values[k + 1])
        .collect();
    peaks.sort_by(|&i, &j| {
        values[j]
            .partial_cmp(&values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    peaks.truncate(opts.refine);
    for k in peaks {
        let (t, v) = golden_max(&norm_at, ts[k - 1], ts[k + 1]);
        consider(v, t);
    }
    for p in r.spectrum() {
        let width = p.im.abs().max(step);
        let (t, v) = golden_max(&norm_at, p.re - 3.0 * width, p.re + 3.0 * width);
        consider(v, t);
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    for _ in 0..80 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
        for (x, v) in [(x1, f1), (x2, f2)] {
            if v > best.1 {
                best = (x, v);
            }
        }
        if (hi - lo).abs() <= 1e-14 * (1.0 + lo.abs()) {
            break;
        }
    }
    best
}

/// Checks the hypotheses of the flavor's recovery theorem.
pub fn validate(r: &Realization, flavor: Flavor) -> Result<ValidationReport> {
    validate_with(r, flavor, &Tolerances::default(), SupNormOptions::default())
}

pub fn validate_with(
    r: &Realization,
    flavor: Flavor,
    tol: &Tolerances,
    opts: SupNormOptions,
) -> Result<ValidationReport> {
    let minimal = r.is_minimal(tol.rank)?;
    let mut messages = Vec::new();
    if !minimal {
        messages.push("realization is not minimal; run minimal_reduce first".to_string());
    }
    let axis_tol = 1e-10 * spectral_norm(r.a()).max(1.0);
    let upper: Vec<[f64; 2]> = r
        .spectrum()
        .iter()
        .filter(|z| z.im > axis_tol)
        .map(|z| [z.re, z.im])
        .collect();
    let real: Vec<[f64; 2]> = r
        .spectrum()
        .iter()
        .filter(|z| z.im.abs() <= axis_tol)
        .map(|z| [z.re, z.im])
        .collect();

    let (sup, witness) = if real.is_empty() {
        sup_norm_on_axis(r, opts)
    } else {
        (f64::INFINITY, real.first().map(|p| p[0]))
    };
    let contractive = sup <= 1.0 + tol.contractive;

    let valid = match flavor {
        Flavor::Sa => {
            if !upper.is_empty() {
                messages.push(format!(
                    "{} pole(s) in the open upper half-plane",
                    upper.len()
                ));
            }
            if !real.is_empty() {
                let at: Vec<String> = real.iter().map(|p| format!("{}", p[0])).collect();
                messages.push(format!("pole(s) on the real axis at {}", at.join(", ")));
            }
            if !contractive {
                messages.push(format!(
                    "not contractive on the real axis: sup norm {sup:.6e} exceeds 1"
                ));
            }
            messages.push(
                "contractivity certified on the whole real axis (stronger than the half-axis hypothesis)"
                    .to_string(),
            );
            minimal && upper.is_empty() && real.is_empty() && contractive
        }
        Flavor::Ssa => minimal,
    };

    Ok(ValidationReport {
        flavor,
        minimal,
        poles_in_upper_half_plane: upper,
        poles_on_real_axis: real,
        sup_norm_on_axis: sup,
        sup_witness: witness,
        contractive,
        valid,
        messages,
    })
}
