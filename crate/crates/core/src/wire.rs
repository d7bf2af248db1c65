//! JSON encoding shared by configuration files and sidecars: a complex number
//! is a two-element `[re, im]` array and a matrix is a row-major nested array
//! of such pairs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::realization::Realization;
use crate::{CMatrix, Error, Result};

pub type WireComplex = [f64; 2];
pub type WireMatrix = Vec<Vec<WireComplex>>;

pub fn complex_to_wire(z: Complex64) -> WireComplex {
    [z.re, z.im]
}

pub fn complex_from_wire(w: WireComplex) -> Complex64 {
    Complex64::new(w[0], w[1])
}

pub fn matrix_to_wire(m: &CMatrix) -> WireMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| complex_to_wire(m[(r, c)])).collect())
        .collect()
}

/// Decodes a nested array into a `rows × cols` matrix. `field` names the
/// offending entry in error messages.
pub fn matrix_from_wire(w: &WireMatrix, rows: usize, cols: usize, field: &str) -> Result<CMatrix> {
    if w.len() != rows {
        return Err(Error::InvalidRealization(format!(
            "{field}: expected {rows} rows, found {}",
            w.len()
        )));
    }
    let mut m = CMatrix::zeros(rows, cols);
    for (r, row) in w.iter().enumerate() {
        if row.len() != cols {
            return Err(Error::InvalidRealization(format!(
                "{field}[{r}]: expected {cols} columns, found {}",
                row.len()
            )));
        }
        for (c, z) in row.iter().enumerate() {
            if !(z[0].is_finite() && z[1].is_finite()) {
                return Err(Error::InvalidRealization(format!(
                    "{field}[{r}][{c}]: non-finite entry"
                )));
            }
            m[(r, c)] = complex_from_wire(*z);
        }
    }
    Ok(m)
}

/// `{"n":…, "m1":…, "m2":…, "A":…, "B":…, "C":…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationWire {
    pub n: usize,
    pub m1: usize,
    pub m2: usize,
    #[serde(rename = "A")]
    pub a: WireMatrix,
    #[serde(rename = "B")]
    pub b: WireMatrix,
    #[serde(rename = "C")]
    pub c: WireMatrix,
}

impl RealizationWire {
    pub fn decode(&self) -> Result<Realization> {
        let a = matrix_from_wire(&self.a, self.n, self.n, "A")?;
        let b = matrix_from_wire(&self.b, self.n, self.m1, "B")?;
        let c = matrix_from_wire(&self.c, self.m2, self.n, "C")?;
        Realization::with_ports(a, b, c, self.m1, self.m2)
    }

    pub fn encode(r: &Realization) -> Self {
        Self {
            n: r.n(),
            m1: r.m1(),
            m2: r.m2(),
            a: matrix_to_wire(r.a()),
            b: matrix_to_wire(r.b()),
            c: matrix_to_wire(r.c()),
        }
    }
}
