//! Interchange formats: potential and spectral-table CSV, JSON documents,
//! atomic writes.

use std::io::Write;
use std::path::Path;

use dirac_core::forward::{PotentialGrid, SpectralTable};
use dirac_core::{CMatrix, Complex64, Flavor};
use serde::Serialize;

use crate::CliError;

/// Shortest decimal string that parses back to the same `f64`. Plain
/// notation in the usual range, exponent notation outside it.
pub fn format_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn index_label(prefix: &str, i: usize, j: usize) -> String {
    if i < 10 && j < 10 {
        format!("{prefix}_{i}{j}")
    } else {
        format!("{prefix}_{i}_{j}")
    }
}

fn matrix_headers(name: &str, rows: usize, cols: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * rows * cols);
    for i in 1..=rows {
        for j in 1..=cols {
            out.push(index_label(&format!("re_{name}"), i, j));
            out.push(index_label(&format!("im_{name}"), i, j));
        }
    }
    out
}

fn push_matrix(record: &mut Vec<String>, m: &CMatrix) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            record.push(format_f64(m[(i, j)].re));
            record.push(format_f64(m[(i, j)].im));
        }
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Internal(format!("CSV encoding failed: {e}"))
}

/// `x,re_v_11,im_v_11,…` with entries in row-major order.
pub fn potential_csv(
    xs: &[f64],
    samples: &[CMatrix],
    m1: usize,
    m2: usize,
) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["x".to_owned()];
    header.extend(matrix_headers("v", m1, m2));
    w.write_record(&header).map_err(csv_error)?;
    for (x, v) in xs.iter().zip(samples) {
        let mut record = vec![format_f64(*x)];
        push_matrix(&mut record, v);
        w.write_record(&record).map_err(csv_error)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))
}

/// Parses `re_v_ij` / `re_v_i_j` into one-based indices.
fn parse_label(label: &str, prefix: &str) -> Option<(usize, usize)> {
    let rest = label.strip_prefix(prefix)?;
    if let Some((i, j)) = rest.split_once('_') {
        return Some((i.parse().ok()?, j.parse().ok()?));
    }
    let b = rest.as_bytes();
    if b.len() == 2 && b.iter().all(u8::is_ascii_digit) {
        Some(((b[0] - b'0') as usize, (b[1] - b'0') as usize))
    } else {
        None
    }
}

/// Reads a potential written by [`potential_csv`] back into a grid.
pub fn read_potential_csv(text: &str, flavor: Flavor) -> Result<PotentialGrid, CliError> {
    let bad = |msg: String| CliError::Config(format!("potential CSV: {msg}"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("x") || header.len() < 3 || header.len() % 2 == 0 {
        return Err(bad("header must be x followed by re/im column pairs".into()));
    }
    let mut entries = Vec::new();
    for k in (1..header.len()).step_by(2) {
        let re = parse_label(&header[k], "re_v_");
        let im = parse_label(&header[k + 1], "im_v_");
        match (re, im) {
            (Some(a), Some(b)) if a == b && a.0 >= 1 && a.1 >= 1 => entries.push(a),
            _ => {
                return Err(bad(format!(
                    "unexpected columns {:?}, {:?}",
                    &header[k],
                    &header[k + 1]
                )))
            }
        }
    }
    let m1 = entries.iter().map(|e| e.0).max().unwrap_or(0);
    let m2 = entries.iter().map(|e| e.1).max().unwrap_or(0);
    let mut seen = vec![false; m1 * m2];
    for &(i, j) in &entries {
        let slot = &mut seen[(i - 1) * m2 + (j - 1)];
        if *slot {
            return Err(bad(format!("duplicate entry v_{i}{j}")));
        }
        *slot = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(bad(format!("columns do not cover a full {m1}x{m2} block")));
    }
    let mut xs = Vec::new();
    let mut samples = Vec::new();
    for (row, record) in r.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64, CliError> {
            record[k].trim().parse::<f64>().map_err(|_| {
                bad(format!(
                    "row {}: column {} is not a number: {:?}",
                    row + 1,
                    &header[k],
                    &record[k]
                ))
            })
        };
        xs.push(num(0)?);
        let mut v = CMatrix::zeros(m1, m2);
        for (e, &(i, j)) in entries.iter().enumerate() {
            v[(i - 1, j - 1)] = Complex64::new(num(1 + 2 * e)?, num(2 + 2 * e)?);
        }
        samples.push(v);
    }
    PotentialGrid::new(flavor, m1, m2, xs, samples).map_err(|e| bad(e.to_string()))
}

/// `z_re,z_im,re_R_11,im_R_11,…,err_est`.
pub fn table_csv(table: &SpectralTable) -> Result<Vec<u8>, CliError> {
    let (rows, cols) = table.values.first().map_or((0, 0), |v| v.shape());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["z_re".to_owned(), "z_im".to_owned()];
    header.extend(matrix_headers("R", rows, cols));
    header.push("err_est".to_owned());
    w.write_record(&header).map_err(csv_error)?;
    for ((z, v), err) in table.points.iter().zip(&table.values).zip(&table.errors) {
        let mut record = vec![format_f64(z.re), format_f64(z.im)];
        push_matrix(&mut record, v);
        record.push(format_f64(*err));
        w.write_record(&record).map_err(csv_error)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Internal(format!("JSON encoding failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io_err =
        |e: std::io::Error| CliError::Internal(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
