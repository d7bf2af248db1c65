//! Complex Schur decomposition `M = Q T Q*` with `T` upper triangular, and
//! reordering of the diagonal by adjacent Givens swaps.

use nalgebra::Hessenberg;
use num_complex::Complex64;

use crate::{CMatrix, Error, Result};

const MAX_SWEEPS_PER_EIGENVALUE: usize = 60;

#[derive(Debug, Clone)]
pub struct ComplexSchur {
    /// Unitary factor.
    pub q: CMatrix,
    /// Upper triangular factor; its diagonal carries the eigenvalues.
    pub t: CMatrix,
}

impl ComplexSchur {
    pub fn new(m: &CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(
                "schur",
                format!("expected square matrix, got {}x{}", m.nrows(), m.ncols()),
            ));
        }
        let n = m.nrows();
        if n == 0 {
            return Ok(Self {
                q: CMatrix::zeros(0, 0),
                t: CMatrix::zeros(0, 0),
            });
        }
        if n == 1 {
            return Ok(Self {
                q: CMatrix::identity(1, 1),
                t: m.clone(),
            });
        }

        let (mut q, mut h) = Hessenberg::new(m.clone()).unpack();
        for j in 0..n {
            for i in (j + 2)..n {
                h[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }

        let scale = h.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()));
        let eps = f64::EPSILON;
        let mut hi = n - 1;
        let mut iterations = 0usize;
        let mut since_deflation = 0usize;

        while hi > 0 {
            // Locate the start of the active unreduced block.
            let mut lo = hi;
            while lo > 0 {
                let sub = h[(lo, lo - 1)].norm();
                let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
                if sub <= eps * diag || sub <= f64::MIN_POSITIVE.max(eps * eps * scale) {
                    h[(lo, lo - 1)] = Complex64::new(0.0, 0.0);
                    break;
                }
                lo -= 1;
            }
            if lo == hi {
                hi -= 1;
                since_deflation = 0;
                continue;
            }

            iterations += 1;
            since_deflation += 1;
            if iterations > MAX_SWEEPS_PER_EIGENVALUE * n {
                return Err(Error::SchurNoConvergence { iterations });
            }

            let shift = if since_deflation % 11 == 10 {
                // Exceptional shift to break cycles.
                h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
            } else {
                wilkinson_shift(
                    h[(hi - 1, hi - 1)],
                    h[(hi - 1, hi)],
                    h[(hi, hi - 1)],
                    h[(hi, hi)],
                )
            };

            qr_sweep(&mut h, &mut q, lo, hi, shift);
        }

        for j in 0..n {
            for i in (j + 1)..n {
                h[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        Ok(Self { q, t: h })
    }

    pub fn eigenvalues(&self) -> Vec<Complex64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Moves the eigenvalues flagged in `select` to the leading diagonal positions,
    /// preserving their relative order. Afterwards the first `k` columns of `q`
    /// span the invariant subspace of the selected eigenvalues.
    pub fn reorder(&mut self, select: &[bool]) {
        let n = self.t.nrows();
        assert_eq!(select.len(), n, "selection length must match dimension");
        let mut flags = select.to_vec();
        let mut target = 0usize;
        for i in 0..n {
            if !flags[i] {
                continue;
            }
            let mut k = i;
            while k > target {
                self.swap_adjacent(k - 1);
                flags.swap(k - 1, k);
                k -= 1;
            }
            target += 1;
        }
    }

    /// Swaps diagonal entries `k` and `k + 1` with a unitary similarity.
    fn swap_adjacent(&mut self, k: usize) {
        let n = self.t.nrows();
        let t11 = self.t[(k, k)];
        let t12 = self.t[(k, k + 1)];
        let t22 = self.t[(k + 1, k + 1)];
        // Eigenvector of the 2x2 block for eigenvalue t22.
        let x = t12;
        let y = t22 - t11;
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        if r == 0.0 {
            return;
        }
        let c = x / r;
        let s = y / r;
        // G = [[c, -conj(s)], [s, conj(c)]], apply T <- G* T G, Q <- Q G.
        for row in 0..n {
            let a = self.t[(row, k)];
            let b = self.t[(row, k + 1)];
            self.t[(row, k)] = a * c + b * s;
            self.t[(row, k + 1)] = -a * s.conj() + b * c.conj();
            let qa = self.q[(row, k)];
            let qb = self.q[(row, k + 1)];
            self.q[(row, k)] = qa * c + qb * s;
            self.q[(row, k + 1)] = -qa * s.conj() + qb * c.conj();
        }
        for col in 0..n {
            let a = self.t[(k, col)];
            let b = self.t[(k + 1, col)];
            self.t[(k, col)] = c.conj() * a + s.conj() * b;
            self.t[(k + 1, col)] = -s * a + c * b;
        }
        self.t[(k + 1, k)] = Complex64::new(0.0, 0.0);
        self.t[(k, k)] = t22;
        self.t[(k + 1, k + 1)] = t11;
    }
}

/// Eigenvalue of `[[a, b], [c, d]]` closest to `d`.
fn wilkinson_shift(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Complex64 {
    let half = (a - d) * 0.5;
    let disc = (half * half + b * c).sqrt();
    let mean = (a + d) * 0.5;
    let mu1 = mean + disc;
    let mu2 = mean - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// One implicit single-shift QR sweep on the Hessenberg block `lo..=hi`.
fn qr_sweep(h: &mut CMatrix, q: &mut CMatrix, lo: usize, hi: usize, shift: Complex64) {
    let n = h.nrows();
    let mut x = h[(lo, lo)] - shift;
    let mut y = h[(lo + 1, lo)];
    for k in lo..hi {
        if k > lo {
            x = h[(k, k - 1)];
            y = h[(k + 1, k - 1)];
        }
        let r = (x.norm_sqr() + y.norm_sqr()).sqrt();
        if r == 0.0 {
            continue;
        }
        let c = x / r;
        let s = y / r;
        // Rows k, k+1 <- G [row_k; row_k1] with G = [[conj c, conj s], [-s, c]].
        let col_start = if k > lo { k - 1 } else { k };
        for col in col_start..n {
            let a = h[(k, col)];
            let b = h[(k + 1, col)];
            h[(k, col)] = c.conj() * a + s.conj() * b;
            h[(k + 1, col)] = -s * a + c * b;
        }
        if k > lo {
            h[(k + 1, k - 1)] = Complex64::new(0.0, 0.0);
        }
        // Columns k, k+1 <- [col_k, col_k1] G*.
        let row_end = (k + 2).min(hi);
        for row in 0..=row_end {
            let a = h[(row, k)];
            let b = h[(row, k + 1)];
            h[(row, k)] = a * c + b * s;
            h[(row, k + 1)] = -a * s.conj() + b * c.conj();
        }
        for row in 0..n {
            let a = q[(row, k)];
            let b = q[(row, k + 1)];
            q[(row, k)] = a * c + b * s;
            q[(row, k + 1)] = -a * s.conj() + b * c.conj();
        }
    }
}
