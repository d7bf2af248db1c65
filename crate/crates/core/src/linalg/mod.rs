//! Dense complex matrix kernels.

mod riccati;
mod schur;

use nalgebra::{SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

pub use riccati::{solve_riccati, solve_riccati_with, RiccatiBranch, RiccatiSolution};
pub use schur::ComplexSchur;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };
pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from row-major complex entries.
pub fn from_rows(rows: usize, cols: usize, entries: &[Complex64]) -> CMatrix {
    CMatrix::from_row_slice(rows, cols, entries)
}

/// Builds a matrix from row-major real entries.
pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_iterator(rows * cols, 1, entries.iter().map(|&r| c64(r, 0.0)))
        .reshape_generic(nalgebra::Dyn(cols), nalgebra::Dyn(rows))
        .transpose()
}

pub fn diag(entries: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries))
}

/// Signature matrix `j = diag(I_m1, -I_m2)`.
pub fn signature(m1: usize, m2: usize) -> CMatrix {
    let mut j = CMatrix::identity(m1 + m2, m1 + m2);
    for k in m1..m1 + m2 {
        j[(k, k)] = -ONE;
    }
    j
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn ensure_square(m: &CMatrix, context: &'static str) -> Result<usize> {
    if m.is_square() {
        Ok(m.nrows())
    } else {
        Err(Error::dim(
            context,
            format!("expected square matrix, got {}x{}", m.nrows(), m.ncols()),
        ))
    }
}

pub(crate) fn ensure_finite(m: &CMatrix, context: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Frobenius norm.
pub fn fro(m: &CMatrix) -> f64 {
    m.norm()
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Spectral norm (largest singular value); zero for empty matrices.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// 2-norm condition number; `inf` for singular or non-square input.
pub fn condition_number(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&max), Some(&min)) if min > 0.0 => max / min,
        (None, None) => 1.0,
        _ => f64::INFINITY,
    }
}

/// Numerical rank with threshold `rel_tol * σ_max`.
pub fn numerical_rank(m: &CMatrix, rel_tol: f64) -> usize {
    let s = singular_values(m);
    let Some(&max) = s.first() else { return 0 };
    if max == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rel_tol * max).count()
}

/// Eigenvalues of a general square matrix.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<Complex64>> {
    Ok(ComplexSchur::new(m)?.eigenvalues())
}

/// Eigenvalues of the Hermitian part of `m`, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Solves `a x = b` by LU with partial pivoting; `a` must be square and
/// numerically nonsingular.
pub fn solve(a: &CMatrix, b: &CMatrix, context: &'static str) -> Result<CMatrix> {
    let n = ensure_square(a, context)?;
    if b.nrows() != n {
        return Err(Error::dim(
            context,
            format!("right-hand side has {} rows, expected {n}", b.nrows()),
        ));
    }
    if n == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    let x = a.clone().lu().solve(b).ok_or(Error::Singular {
        context,
        condition: f64::INFINITY,
    })?;
    if !is_finite(&x) {
        return Err(Error::Singular {
            context,
            condition: f64::INFINITY,
        });
    }
    Ok(x)
}

pub fn inverse(a: &CMatrix, context: &'static str) -> Result<CMatrix> {
    let n = ensure_square(a, context)?;
    solve(a, &identity(n), context)
}

/// Matrix exponential by Padé scaling and squaring.
pub fn mat_exp(m: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(m, "mat_exp")?;
    ensure_finite(m, "mat_exp")?;
    match n {
        0 => Ok(CMatrix::zeros(0, 0)),
        1 => Ok(m.map(|z| z.exp())),
        _ => Ok(m.exp()),
    }
}

/// Solves the Sylvester equation `A X - X B = C` (Bartels–Stewart on complex
/// Schur forms). The residual is checked by direct substitution on every call.
pub fn solve_sylvester(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix> {
    solve_sylvester_with(a, b, c, 1e-10)
}

pub fn solve_sylvester_with(
    a: &CMatrix,
    b: &CMatrix,
    c: &CMatrix,
    separation_tol: f64,
) -> Result<CMatrix> {
    let n = ensure_square(a, "solve_sylvester")?;
    let k = ensure_square(b, "solve_sylvester")?;
    if c.nrows() != n || c.ncols() != k {
        return Err(Error::dim(
            "solve_sylvester",
            format!("C is {}x{}, expected {n}x{k}", c.nrows(), c.ncols()),
        ));
    }
    if n == 0 || k == 0 {
        return Ok(CMatrix::zeros(n, k));
    }
    let sa = ComplexSchur::new(a)?;
    let sb = ComplexSchur::new(b)?;
    let scale = (spectral_norm(a) + spectral_norm(b)).max(1.0);

    let mut separation = f64::INFINITY;
    for i in 0..n {
        for j in 0..k {
            separation = separation.min((sa.t[(i, i)] - sb.t[(j, j)]).norm());
        }
    }
    if separation < separation_tol * scale {
        return Err(Error::SingularSylvester { separation });
    }

    // T_a Y - Y T_b = F with Y = Q_a* X Q_b.
    let f = sa.q.adjoint() * c * &sb.q;
    let mut y = CMatrix::zeros(n, k);
    for col in 0..k {
        let mut rhs: Vec<Complex64> = (0..n).map(|i| f[(i, col)]).collect();
        for prev in 0..col {
            let coupling = sb.t[(prev, col)];
            if coupling != ZERO {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r += coupling * y[(i, prev)];
                }
            }
        }
        let shift = sb.t[(col, col)];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            for jj in (i + 1)..n {
                acc -= sa.t[(i, jj)] * y[(jj, col)];
            }
            y[(i, col)] = acc / (sa.t[(i, i)] - shift);
        }
    }
    let x = &sa.q * y * sb.q.adjoint();

    let residual = fro(&(a * &x - &x * b - c));
    let bound = 1e-11 * (spectral_norm(a) + spectral_norm(b)) * fro(&x) + 1e-13 * fro(c);
    // Substitution check; ill-separated spectra amplify rounding beyond the contract.
    if !(residual <= bound.max(f64::MIN_POSITIVE) * 10.0) {
        return Err(Error::SingularSylvester { separation });
    }
    Ok(x)
}

/// Block Krylov matrix `[θ, Aθ, …, A^{n-1}θ]`.
pub fn krylov_matrix(a: &CMatrix, theta: &CMatrix) -> Result<CMatrix> {
    let n = ensure_square(a, "krylov_matrix")?;
    if theta.nrows() != n {
        return Err(Error::dim(
            "krylov_matrix",
            format!("θ has {} rows, expected {n}", theta.nrows()),
        ));
    }
    let k = theta.ncols();
    let mut out = CMatrix::zeros(n, n * k);
    let mut block = theta.clone();
    for p in 0..n {
        out.columns_mut(p * k, k).copy_from(&block);
        block = a * block;
    }
    Ok(out)
}

/// True iff `[θ, Aθ, …, A^{n-1}θ]` has numerical rank `n`.
pub fn is_controllable(a: &CMatrix, theta: &CMatrix) -> Result<bool> {
    is_controllable_with(a, theta, 1e-10)
}

pub fn is_controllable_with(a: &CMatrix, theta: &CMatrix, rel_tol: f64) -> Result<bool> {
    let n = ensure_square(a, "is_controllable")?;
    if n == 0 {
        return Ok(true);
    }
    let k = krylov_matrix(a, theta)?;
    Ok(numerical_rank(&k, rel_tol) == n)
}

/// Orthonormal basis of the reachable subspace of `{A, B}`, built block by
/// block (staircase) so that large powers of `A` are never formed.
pub fn reachable_basis(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> Result<CMatrix> {
    let n = ensure_square(a, "reachable_basis")?;
    if b.nrows() != n {
        return Err(Error::dim(
            "reachable_basis",
            format!("B has {} rows, expected {n}", b.nrows()),
        ));
    }
    let mut basis = CMatrix::zeros(n, 0);
    if n == 0 {
        return Ok(basis);
    }
    let a_norm = spectral_norm(a);
    let mut candidate = b.clone();
    let mut threshold = rel_tol * spectral_norm(b);
    if threshold == 0.0 {
        return Ok(basis);
    }
    while basis.ncols() < n && candidate.ncols() > 0 {
        // Two passes of Gram–Schmidt against the current basis.
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let proj = basis.adjoint() * &candidate;
                candidate -= &basis * proj;
            }
        }
        let svd = SVD::new(candidate.clone(), true, false);
        let u = svd.u.expect("requested U");
        let fresh: Vec<usize> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > threshold)
            .map(|(i, _)| i)
            .collect();
        if fresh.is_empty() {
            break;
        }
        let take = fresh.len().min(n - basis.ncols());
        let new_cols = CMatrix::from_fn(n, take, |r, c| u[(r, fresh[c])]);
        let start = basis.ncols();
        basis = basis.resize_horizontally(start + take, ZERO);
        basis.columns_mut(start, take).copy_from(&new_cols);
        candidate = a * new_cols;
        threshold = rel_tol * a_norm.max(f64::MIN_POSITIVE);
    }
    Ok(basis)
}

/// `∫_0^x e^{t A1} W e^{t A2} dt` in closed form.
///
/// Evaluated from one Van Loan block exponential
/// `exp(y [[A1, W], [0, -A2]])` at a reduced step `y = x / 2^k`, followed by
/// `k` doublings `G(2y) = G(y) + e^{y A1} G(y) e^{y A2}`. The doubling keeps
/// intermediate quantities at the size of the result, so long intervals with
/// decaying exponentials never overflow.
pub fn gram_integral(a1: &CMatrix, w: &CMatrix, a2: &CMatrix, x: f64) -> Result<CMatrix> {
    let n = ensure_square(a1, "gram_integral")?;
    let k = ensure_square(a2, "gram_integral")?;
    if w.nrows() != n || w.ncols() != k {
        return Err(Error::dim(
            "gram_integral",
            format!("W is {}x{}, expected {n}x{k}", w.nrows(), w.ncols()),
        ));
    }
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Config(format!(
            "gram_integral requires finite x >= 0, got {x}"
        )));
    }
    let w_norm = fro(w);
    if x == 0.0 || n == 0 || k == 0 || w_norm == 0.0 {
        return Ok(CMatrix::zeros(n, k));
    }
    let w_unit = w / c64(w_norm, 0.0);

    let spread = (spectral_norm(a1).max(spectral_norm(a2)) + 1.0) * x;
    let doublings = if spread > 0.5 {
        (spread / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let y = x / 2f64.powi(doublings);

    let mut block = CMatrix::zeros(n + k, n + k);
    block
        .view_mut((0, 0), (n, n))
        .copy_from(&(a1 * c64(y, 0.0)));
    block
        .view_mut((0, n), (n, k))
        .copy_from(&(&w_unit * c64(y, 0.0)));
    block
        .view_mut((n, n), (k, k))
        .copy_from(&(a2 * c64(-y, 0.0)));
    let e = mat_exp(&block)?;
    let mut e1 = e.view((0, 0), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, k)).into_owned();
    let mut e2 = mat_exp(&(a2 * c64(y, 0.0)))?;
    let mut g = f12 * &e2;
    for _ in 0..doublings {
        g = &g + &e1 * &g * &e2;
        e1 = &e1 * &e1;
        e2 = &e2 * &e2;
    }
    Ok(g * c64(w_norm, 0.0))
}

/// Hermitian positive definite matrix (validated on construction).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianPd(CMatrix);

impl HermitianPd {
    /// Accepts `m` if it is Hermitian to `1e-12` relative and its smallest
    /// eigenvalue is positive. The stored matrix is the exact Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        Self::with_tolerance(m, 1e-12)
    }

    pub fn with_tolerance(m: CMatrix, hermitian_tol: f64) -> Result<Self> {
        ensure_square(&m, "HermitianPd")?;
        ensure_finite(&m, "HermitianPd")?;
        let defect = fro(&(&m - m.adjoint()));
        if defect > hermitian_tol * fro(&m).max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidRealization(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        let h = hermitian_part(&m);
        let ev = hermitian_eigenvalues(&h);
        if let Some(&min) = ev.first() {
            if !(min > 0.0) {
                return Err(Error::Singular {
                    context: "HermitianPd",
                    condition: ev.last().copied().unwrap_or(0.0) / min.abs().max(f64::MIN_POSITIVE),
                });
            }
        }
        Ok(Self(h))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.0)
            .first()
            .copied()
            .unwrap_or(f64::INFINITY)
    }
}

impl std::ops::Deref for HermitianPd {
    type Target = CMatrix;

    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            c64(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))
        })
    }

    fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
        fro(&(a - b)) / fro(b).max(f64::MIN_POSITIVE)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let e = mat_exp(&CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(e, identity(2));
    }

    #[test]
    fn exp_of_diagonal() {
        let e = mat_exp(&diag(&[c64(0.0, PI), ZERO])).unwrap();
        let expected = diag(&[c64(-1.0, 0.0), ONE]);
        assert!(fro(&(&e - &expected)) < 1e-13 * fro(&expected));
    }

    #[test]
    fn exp_of_nilpotent() {
        let e = mat_exp(&from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(fro(&(e - from_real_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]))) < 1e-15);
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(
            mat_exp(&CMatrix::zeros(2, 3)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn exp_matches_eigen_expansion_at_large_norm() {
        // Unitarily diagonalizable input with spectrum of size up to 1e3.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = random(&mut rng, 4, 4, 1.0);
        let q = nalgebra::QR::new(h).q();
        let lam = [
            c64(-300.0, 700.0),
            c64(-5.0, -2.0),
            c64(0.5, 1.0),
            c64(-700.0, 0.0),
        ];
        let m = &q * diag(&lam) * q.adjoint();
        let expected = &q * diag(&lam.map(|z| z.exp())) * q.adjoint();
        let e = mat_exp(&m).unwrap();
        assert!(rel_err(&e, &expected) < 1e-11, "{}", rel_err(&e, &expected));
    }

    #[test]
    fn sylvester_examples() {
        let x = solve_sylvester(
            &from_real_rows(1, 1, &[2.0]),
            &from_real_rows(1, 1, &[1.0]),
            &from_real_rows(1, 1, &[3.0]),
        )
        .unwrap();
        assert!((x[(0, 0)] - c64(3.0, 0.0)).norm() < 1e-15);

        let c = from_rows(
            2,
            2,
            &[c64(1.0, 2.0), c64(-3.0, 0.5), c64(0.0, 1.0), c64(4.0, 0.0)],
        );
        let x = solve_sylvester(&identity(2), &(-identity(2)), &c).unwrap();
        assert!(fro(&(x - &c * c64(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn sylvester_random_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random(&mut rng, 3, 3, 1.0) + identity(3) * c64(3.0, 0.0);
            let b = random(&mut rng, 3, 3, 1.0) - identity(3) * c64(3.0, 0.0);
            let c = random(&mut rng, 3, 3, 1.0);
            let x = solve_sylvester(&a, &b, &c).unwrap();
            let res = fro(&(&a * &x - &x * &b - &c));
            assert!(
                res <= 1e-11 * (spectral_norm(&a) + spectral_norm(&b)) * fro(&x) + 1e-13 * fro(&c)
            );
        }
    }

    #[test]
    fn sylvester_overlapping_spectra() {
        let a = identity(2);
        assert!(matches!(
            solve_sylvester(&a, &a, &identity(2)),
            Err(Error::SingularSylvester { .. })
        ));
    }

    #[test]
    fn controllability_examples() {
        let a = diag(&[ONE, c64(2.0, 0.0)]);
        assert!(is_controllable(&a, &from_real_rows(2, 1, &[1.0, 1.0])).unwrap());
        assert!(!is_controllable(&a, &from_real_rows(2, 1, &[1.0, 0.0])).unwrap());
        let shift = from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(is_controllable(&shift, &from_real_rows(2, 1, &[0.0, 1.0])).unwrap());
        assert!(is_controllable(&CMatrix::zeros(0, 0), &CMatrix::zeros(0, 1)).unwrap());
    }

    #[test]
    fn reachable_basis_dimensions() {
        let a = diag(&[ONE, c64(2.0, 0.0), c64(3.0, 0.0)]);
        let b = from_real_rows(3, 1, &[1.0, 1.0, 0.0]);
        assert_eq!(reachable_basis(&a, &b, 1e-10).unwrap().ncols(), 2);
        assert_eq!(
            reachable_basis(&a, &CMatrix::zeros(3, 1), 1e-10)
                .unwrap()
                .ncols(),
            0
        );
    }

    #[test]
    fn gram_examples() {
        let w = from_rows(2, 2, &[ONE, c64(0.0, 2.0), c64(-1.0, 0.0), c64(3.0, 1.0)]);
        let z = CMatrix::zeros(2, 2);
        let g = gram_integral(&z, &w, &z, 2.5).unwrap();
        assert!(fro(&(g - &w * c64(2.5, 0.0))) < 1e-14);

        let minus = from_real_rows(1, 1, &[-1.0]);
        let one = from_real_rows(1, 1, &[1.0]);
        for x in [0.1, 1.0, 7.0, 40.0] {
            let g = gram_integral(&minus, &one, &minus, x).unwrap();
            let exact = (1.0 - (-2.0 * x).exp()) / 2.0;
            assert!((g[(0, 0)].re - exact).abs() <= 1e-12 * exact);
        }
        assert_eq!(
            gram_integral(&minus, &one, &minus, 0.0).unwrap(),
            CMatrix::zeros(1, 1)
        );
    }

    #[test]
    fn gram_matches_quadrature() {
        // Independent check with composite Simpson on a smooth integrand.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a1 = random(&mut rng, 3, 3, 0.7);
        let a2 = random(&mut rng, 2, 2, 0.7);
        let w = random(&mut rng, 3, 2, 1.0);
        let x = 1.3;
        let g = gram_integral(&a1, &w, &a2, x).unwrap();
        let n = 2000;
        let h = x / n as f64;
        let mut acc = CMatrix::zeros(3, 2);
        for i in 0..=n {
            let t = i as f64 * h;
            let wt = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let f = mat_exp(&(&a1 * c64(t, 0.0))).unwrap()
                * &w
                * mat_exp(&(&a2 * c64(t, 0.0))).unwrap();
            acc += f * c64(wt * h / 3.0, 0.0);
        }
        assert!(rel_err(&g, &acc) < 1e-11);
    }

    #[test]
    fn hermitian_pd_rejects_indefinite() {
        assert!(HermitianPd::new(diag(&[ONE, c64(-1.0, 0.0)])).is_err());
        assert!(HermitianPd::new(from_rows(2, 2, &[ONE, I, ZERO, ONE])).is_err());
        let ok = HermitianPd::new(from_rows(2, 2, &[c64(2.0, 0.0), I, -I, c64(2.0, 0.0)])).unwrap();
        assert!((ok.min_eigenvalue() - 1.0).abs() < 1e-14);
    }

    fn arb_matrix(n: usize, scale: f64) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-scale..scale, -scale..scale), n * n)
            .prop_map(move |v| CMatrix::from_iterator(n, n, v.into_iter().map(|(r, i)| c64(r, i))))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn exp_times_exp_of_negative_is_identity(m in (1usize..5).prop_flat_map(|n| arb_matrix(n, 25.0))) {
            let n = m.nrows();
            let p = mat_exp(&m).unwrap() * mat_exp(&(-&m)).unwrap();
            // Conditioning of the product is bounded by e^{2‖M‖}-type growth only for
            // non-normal inputs; the contract holds relative to ‖e^M‖‖e^{-M}‖.
            let scale = fro(&mat_exp(&m).unwrap()) * fro(&mat_exp(&(-&m)).unwrap());
            prop_assert!(fro(&(p - identity(n))) <= 1e-12 * scale.max(1.0));
        }

        #[test]
        fn exp_of_skew_hermitian_inverts_exactly(
            m in (1usize..5).prop_flat_map(|n| arb_matrix(n, 50.0)),
        ) {
            let n = m.nrows();
            let skew = (&m - m.adjoint()) * c64(0.5, 0.0);
            prop_assume!(spectral_norm(&skew) <= 100.0);
            let p = mat_exp(&skew).unwrap() * mat_exp(&(-&skew)).unwrap();
            prop_assert!(fro(&(p - identity(n))) <= 1e-12);
        }

        #[test]
        fn gram_is_additive(
            seed in 0u64..1000,
            x1 in 0.0f64..3.0,
            x2 in 0.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a1 = random(&mut rng, 3, 3, 1.0);
            let a2 = random(&mut rng, 3, 3, 1.0);
            let w = random(&mut rng, 3, 3, 1.0);
            let whole = gram_integral(&a1, &w, &a2, x1 + x2).unwrap();
            let head = gram_integral(&a1, &w, &a2, x1).unwrap();
            let tail = gram_integral(&a1, &w, &a2, x2).unwrap();
            let e1 = mat_exp(&(&a1 * c64(x1, 0.0))).unwrap();
            let e2 = mat_exp(&(&a2 * c64(x1, 0.0))).unwrap();
            let joined = head + e1 * tail * e2;
            prop_assert!(fro(&(&whole - &joined)) <= 1e-11 * fro(&whole).max(1.0));
        }

        #[test]
        fn sylvester_substitution(seed in 0u64..1000, n in 1usize..5, k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random(&mut rng, n, n, 1.0) + identity(n) * c64(0.0, 4.0);
            let b = random(&mut rng, k, k, 1.0) - identity(k) * c64(0.0, 4.0);
            let c = random(&mut rng, n, k, 1.0);
            let x = solve_sylvester(&a, &b, &c).unwrap();
            prop_assert!(fro(&(&a * &x - &x * &b - &c)) <= 1e-11 * (spectral_norm(&a) + spectral_norm(&b)) * fro(&x) + 1e-13 * fro(&c));
        }
    }
}
