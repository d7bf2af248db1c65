//! The two Riccati equations of the explicit recovery,
//!
//! ```text
//! sa : X C*C X - i (A X - X A*) + B B* = 0,   σ(A + i B B* X⁻¹) ⊂ closed lower half-plane
//! ssa: X C*C X + i (A X - X A*) - B B* = 0,   σ(A + i B B* X⁻¹) ⊂ open upper half-plane
//! ```
//!
//! Both are written as `F X + X F* + X R X + Q = 0` with `R = C*C`,
//! `F = ∓ i A`, `Q = ± B B*`. A Hermitian solution corresponds to an
//! `n`-dimensional invariant subspace `range [I; X]` of
//! `H = [[-F*, -R], [Q, F]]`, and `H [I; X] = [I; X] Λ` with `Λ = -F* - R X`.
//! In both flavors `Λ*` is similar to a rotation of `A*`, so the side condition
//! on `σ(A)` is exactly "`σ(Λ)` in the closed left half-plane": the stable
//! subspace of `H`.

use num_complex::Complex64;
use serde::Serialize;

use super::{
    c64, condition_number, eigenvalues, ensure_finite, ensure_square, fro, hermitian_part, solve,
    solve_sylvester, spectral_norm, ComplexSchur, HermitianPd, I,
};
use crate::{CMatrix, Error, Flavor, Result, Tolerances};

const MAX_NEWTON_STEPS: usize = 6;
/// Largest `2n` for which invariant subspaces are enumerated exhaustively.
const MAX_ENUMERATION_DIM: usize = 16;

/// Which invariant subspace produced the solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RiccatiBranch {
    /// The `n` eigenvalues of smallest real part (the stable subspace).
    StableSubspace,
    /// Found by enumeration; `rank` is the position in the enumeration order.
    Enumerated { rank: usize },
}

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub x: HermitianPd,
    /// Frobenius residual divided by `‖𝒜‖‖X‖ + ‖𝒞X‖² + ‖ℬ‖²`.
    pub relative_residual: f64,
    pub absolute_residual: f64,
    pub newton_steps: usize,
    pub branch: RiccatiBranch,
    /// Spectrum of the recovered `A = 𝒜 + i ℬℬ* X⁻¹`.
    pub recovered_spectrum: Vec<Complex64>,
}

struct Problem<'a> {
    flavor: Flavor,
    a: &'a CMatrix,
    b: &'a CMatrix,
    c: &'a CMatrix,
    f: CMatrix,
    r: CMatrix,
    q: CMatrix,
    tol: Tolerances,
}

impl Problem<'_> {
    fn residual(&self, x: &CMatrix) -> CMatrix {
        &self.f * x + x * self.f.adjoint() + x * &self.r * x + &self.q
    }

    fn residual_scale(&self, x: &CMatrix) -> f64 {
        let cx = self.c * x;
        let cx_norm = fro(&cx);
        let b_norm = fro(self.b);
        (fro(self.a) * fro(x) + cx_norm * cx_norm + b_norm * b_norm).max(f64::MIN_POSITIVE)
    }

    fn newton_refine(&self, mut x: CMatrix) -> (CMatrix, usize) {
        let mut res_norm = fro(&self.residual(&x));
        let mut steps = 0;
        for _ in 0..MAX_NEWTON_STEPS {
            if res_norm <= 1e-15 * self.residual_scale(&x) {
                break;
            }
            let closed = &self.f + &x * &self.r;
            let Ok(delta) = solve_sylvester(&closed, &(-closed.adjoint()), &(-self.residual(&x)))
            else {
                break;
            };
            let next = hermitian_part(&(&x + delta));
            let next_norm = fro(&self.residual(&next));
            if !(next_norm < res_norm) {
                break;
            }
            x = next;
            res_norm = next_norm;
            steps += 1;
        }
        (x, steps)
    }

    fn recovered_a(&self, x: &CMatrix) -> Result<CMatrix> {
        let bb = self.b * self.b.adjoint();
        // A = 𝒜 + i ℬℬ* X⁻¹, with X⁻¹ applied from the right via a solve.
        let right = solve(&x.adjoint(), &bb.adjoint(), "riccati: X")?.adjoint();
        Ok(self.a + right * I)
    }

    /// Accepts or rejects one candidate subspace, returning the refined solution
    /// or the reason it was rejected.
    fn admit(
        &self,
        u: &CMatrix,
        branch: RiccatiBranch,
    ) -> std::result::Result<RiccatiSolution, String> {
        let n = self.a.nrows();
        let u11 = u.view((0, 0), (n, n)).into_owned();
        let u21 = u.view((n, 0), (n, n)).into_owned();
        let cond = condition_number(&u11);
        if cond > 1e12 {
            return Err(format!(
                "subspace is not a graph over the first block (cond {cond:.3e})"
            ));
        }
        // X = U21 U11⁻¹  ⇔  U11* X* = U21*.
        let x = solve(&u11.adjoint(), &u21.adjoint(), "riccati: U11")
            .map_err(|e| e.to_string())?
            .adjoint();
        let herm_defect = fro(&(&x - x.adjoint())) / fro(&x).max(f64::MIN_POSITIVE);
        if herm_defect > 1e-6 {
            return Err(format!(
                "candidate is not Hermitian (relative defect {herm_defect:.3e})"
            ));
        }
        let (x, newton_steps) = self.newton_refine(hermitian_part(&x));
        let x_pd = HermitianPd::new(x.clone())
            .map_err(|_| "candidate is not positive definite".to_string())?;
        let absolute_residual = fro(&self.residual(&x));
        let relative_residual = absolute_residual / self.residual_scale(&x);
        if relative_residual > self.tol.riccati {
            return Err(format!("residual {relative_residual:.3e} above tolerance"));
        }
        let a_rec = self.recovered_a(&x).map_err(|e| e.to_string())?;
        let spectrum = eigenvalues(&a_rec).map_err(|e| e.to_string())?;
        let scale = spectral_norm(&a_rec).max(1.0);
        match self.flavor {
            Flavor::Sa => {
                let worst = spectrum
                    .iter()
                    .map(|z| z.im)
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst > self.tol.side_condition * scale {
                    return Err(format!(
                        "side condition σ(A) ⊂ closed lower half-plane fails (max Im = {worst:.3e})"
                    ));
                }
            }
            Flavor::Ssa => {
                let worst = spectrum.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
                if !(worst > 0.0) {
                    return Err(format!(
                        "σ(A) ⊂ open upper half-plane fails (min Im = {worst:.3e})"
                    ));
                }
            }
        }
        Ok(RiccatiSolution {
            x: x_pd,
            relative_residual,
            absolute_residual,
            newton_steps,
            branch,
            recovered_spectrum: spectrum,
        })
    }
}

/// Solves the flavor's Riccati equation for `X > 0` satisfying its side condition.
pub fn solve_riccati(
    a: &CMatrix,
    b: &CMatrix,
    c: &CMatrix,
    flavor: Flavor,
) -> Result<RiccatiSolution> {
    solve_riccati_with(a, b, c, flavor, &Tolerances::default())
}

pub fn solve_riccati_with(
    a: &CMatrix,
    b: &CMatrix,
    c: &CMatrix,
    flavor: Flavor,
    tol: &Tolerances,
) -> Result<RiccatiSolution> {
    let n = ensure_square(a, "solve_riccati")?;
    if b.nrows() != n || c.ncols() != n {
        return Err(Error::dim(
            "solve_riccati",
            format!(
                "𝒜 is {n}x{n}, ℬ is {}x{}, 𝒞 is {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            ),
        ));
    }
    ensure_finite(a, "solve_riccati: 𝒜")?;
    ensure_finite(b, "solve_riccati: ℬ")?;
    ensure_finite(c, "solve_riccati: 𝒞")?;
    if n == 0 {
        return Ok(RiccatiSolution {
            x: HermitianPd::new(CMatrix::zeros(0, 0))?,
            relative_residual: 0.0,
            absolute_residual: 0.0,
            newton_steps: 0,
            branch: RiccatiBranch::StableSubspace,
            recovered_spectrum: Vec::new(),
        });
    }

    let bb = b * b.adjoint();
    let (f, q) = match flavor {
        Flavor::Sa => (a * c64(0.0, -1.0), bb),
        Flavor::Ssa => (a * I, -bb),
    };
    let problem = Problem {
        flavor,
        a,
        b,
        c,
        r: c.adjoint() * c,
        f,
        q,
        tol: *tol,
    };

    let mut h = CMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n))
        .copy_from(&(-problem.f.adjoint()));
    h.view_mut((0, n), (n, n)).copy_from(&(-&problem.r));
    h.view_mut((n, 0), (n, n)).copy_from(&problem.q);
    h.view_mut((n, n), (n, n)).copy_from(&problem.f);
    let schur = ComplexSchur::new(&h)?;
    let spectrum = schur.eigenvalues();

    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| {
        spectrum[i]
            .re
            .partial_cmp(&spectrum[j].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let stable: Vec<usize> = order[..n].to_vec();

    let mut rejections = Vec::new();
    let try_subset = |subset: &[usize], branch: RiccatiBranch| {
        let mut select = vec![false; 2 * n];
        for &i in subset {
            select[i] = true;
        }
        let mut s = schur.clone();
        s.reorder(&select);
        let u = s.q.columns(0, n).into_owned();
        problem.admit(&u, branch)
    };

    match try_subset(&stable, RiccatiBranch::StableSubspace) {
        Ok(sol) => return Ok(sol),
        Err(reason) => rejections.push(format!("stable subspace: {reason}")),
    }

    if 2 * n <= MAX_ENUMERATION_DIM {
        let mut subsets = combinations(2 * n, n);
        subsets.sort_by(|p, q| {
            let sp: f64 = p.iter().map(|&i| spectrum[i].re).sum();
            let sq: f64 = q.iter().map(|&i| spectrum[i].re).sum();
            sp.partial_cmp(&sq).unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut stable_sorted = stable.clone();
        stable_sorted.sort_unstable();
        let mut rejected_enumerated = 0usize;
        for (rank, subset) in subsets.iter().enumerate() {
            if *subset == stable_sorted {
                continue;
            }
            match try_subset(subset, RiccatiBranch::Enumerated { rank }) {
                Ok(sol) => return Ok(sol),
                Err(_) => rejected_enumerated += 1,
            }
        }
        rejections.push(format!(
            "{rejected_enumerated} other invariant subspaces enumerated, none admissible"
        ));
    } else {
        rejections.push(format!(
            "enumeration skipped (2n = {} exceeds {MAX_ENUMERATION_DIM})",
            2 * n
        ));
    }

    let spectrum_text: Vec<String> = spectrum
        .iter()
        .map(|z| format!("{:.6}{:+.6}i", z.re, z.im))
        .collect();
    let on_axis = spectrum
        .iter()
        .filter(|z| z.re.abs() <= 1e-9 * spectral_norm(&h).max(1.0))
        .count();
    Err(Error::NoAdmissibleSolution {
        diagnostic: format!(
            "{flavor} Riccati: Hamiltonian spectrum [{}] ({on_axis} eigenvalues on the imaginary axis); {}",
            spectrum_text.join(", "),
            rejections.join("; ")
        ),
    })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;

    fn scalar(v: Complex64) -> CMatrix {
        from_rows(1, 1, &[v])
    }

    #[test]
    fn sa_scalar_root_selected_by_side_condition() {
        let sol = solve_riccati(
            &scalar(c64(0.0, -1.0)),
            &scalar(c64(1.0, 0.0)),
            &scalar(c64(0.5, 0.0)),
            Flavor::Sa,
        )
        .unwrap();
        let expected = 4.0 + 2.0 * 3f64.sqrt();
        assert!((sol.x[(0, 0)].re - expected).abs() < 1e-10 * expected);
        assert_eq!(sol.branch, RiccatiBranch::StableSubspace);
        assert!(sol.recovered_spectrum[0].im <= 0.0);
    }

    #[test]
    fn ssa_scalar_positive_root() {
        let one = scalar(c64(1.0, 0.0));
        let sol = solve_riccati(&scalar(c64(0.0, 0.0)), &one, &one, Flavor::Ssa).unwrap();
        assert!((sol.x[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn sa_without_real_root_is_rejected() {
        let one = scalar(c64(1.0, 0.0));
        let err = solve_riccati(&scalar(c64(0.0, 0.0)), &one, &one, Flavor::Sa).unwrap_err();
        match err {
            Error::NoAdmissibleSolution { diagnostic } => {
                assert!(diagnostic.contains("imaginary axis"), "{diagnostic}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(6, 3).len(), 20);
        assert_eq!(combinations(2, 1), vec![vec![0], vec![1]]);
    }
}
