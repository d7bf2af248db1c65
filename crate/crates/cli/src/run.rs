//! Command dispatch.

use std::path::{Path, PathBuf};

use dirac_core::forward::{
    spectral_table, ExplicitPotential, ForwardConfig, Potential, PotentialGrid, SpectralTable,
};
use dirac_core::harness::{det_y1_scan, invariant_suite, roundtrip, VerificationReport};
use dirac_core::realization::{
    minimal_reduce_with, validate_with, Realization, SupNormOptions, ValidationReport,
};
use dirac_core::recovery::{build_with, ExplicitSystem, SystemSummary};
use dirac_core::wire::{complex_to_wire, matrix_to_wire, WireComplex, WireMatrix};
use dirac_core::{Complex64, Flavor};
use serde::Serialize;

use crate::config::{Command, Format, JobConfig, Source};
use crate::io::{json_bytes, potential_csv, read_potential_csv, table_csv, write_atomic};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Prefix for relative output paths.
    pub output_dir: Option<PathBuf>,
    /// Include per-check wall times in the text summary.
    pub timings: bool,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    /// False when a verification report did not pass.
    pub passed: bool,
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            3
        }
    }
}

/// Exit code for a finished or failed run.
pub fn exit_code(result: &Result<Outcome, CliError>) -> i32 {
    match result {
        Ok(o) => o.exit_code(),
        Err(e) => e.exit_code(),
    }
}

pub fn run(cfg: &JobConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let out = output_path(cfg, opts);
    match cfg.command {
        Command::Recover => recover(cfg, &out),
        Command::Forward => forward(cfg, &out),
        Command::Roundtrip => {
            let (r, _) = admissible(realization(cfg)?, cfg)?;
            let report = roundtrip(&r, cfg.flavor, &cfg.z_points, &forward_config(cfg));
            write_report(cfg, &out, &report, opts)
        }
        Command::Invariants => {
            let sys = explicit_system(cfg)?;
            let x_max = cfg.x_max.unwrap_or_else(|| sys.default_x_max());
            let zs = if cfg.z_points.is_empty() {
                linspace(-3.0, 3.0, 10)
                    .into_iter()
                    .map(|t| Complex64::new(t, 0.0))
                    .collect()
            } else {
                cfg.z_points.clone()
            };
            let report = invariant_suite(&sys, &x_grid(x_max, cfg.x_step), &zs);
            write_report(cfg, &out, &report, opts)
        }
        Command::ScanDety1 => {
            let p = potential(cfg)?;
            let fcfg = forward_config(cfg);
            // The scan records per-point failures in the report; a missing
            // truncation is a configuration error and must not end up there.
            fcfg.truncation(p.as_ref())?;
            let ts = linspace(cfg.t_min, cfg.t_max, cfg.t_count);
            let report = det_y1_scan(p.as_ref(), &ts, &fcfg);
            write_report(cfg, &out, &report, opts)
        }
    }
}

fn output_path(cfg: &JobConfig, opts: &RunOptions) -> PathBuf {
    let ext = match cfg.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let path = cfg.output.clone().unwrap_or_else(|| {
        let stem = match cfg.command {
            Command::Recover => "potential",
            Command::Forward => "spectral",
            other => other.as_str(),
        };
        PathBuf::from(format!("{stem}.{ext}"))
    });
    match &opts.output_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path,
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    write_atomic(path, bytes)
}

fn forward_config(cfg: &JobConfig) -> ForwardConfig {
    ForwardConfig {
        h: cfg.h,
        l: cfg.l,
        ssa_margin: cfg.ssa_margin,
        tolerances: cfg.tolerances,
    }
}

fn realization(cfg: &JobConfig) -> Result<&Realization, CliError> {
    match &cfg.source {
        Source::Realization(r) => Ok(r),
        Source::Grid(_) => Err(CliError::Config(
            "realization: this command needs a realization".into(),
        )),
    }
}

/// Minimal reduction followed by the flavor's hypotheses. A rejected sa
/// realization also reports what the Riccati solver says about it.
fn admissible(
    r: &Realization,
    cfg: &JobConfig,
) -> Result<(Realization, ValidationReport), CliError> {
    let reduced = minimal_reduce_with(r, cfg.tolerances.rank)?;
    let report = validate_with(
        &reduced,
        cfg.flavor,
        &cfg.tolerances,
        SupNormOptions::default(),
    )?;
    if report.valid {
        return Ok((reduced, report));
    }
    let mut msg = format!(
        "realization violates the {} hypotheses: {}",
        cfg.flavor,
        report.messages.join("; ")
    );
    if let Err(e) = build_with(&reduced, cfg.flavor, &cfg.tolerances) {
        msg.push_str(&format!("; {e}"));
    }
    Err(CliError::Numeric(msg))
}

fn explicit_system(cfg: &JobConfig) -> Result<ExplicitSystem, CliError> {
    let (r, _) = admissible(realization(cfg)?, cfg)?;
    Ok(build_with(&r, cfg.flavor, &cfg.tolerances)?)
}

fn potential(cfg: &JobConfig) -> Result<Box<dyn Potential>, CliError> {
    match &cfg.source {
        Source::Realization(_) => Ok(Box::new(ExplicitPotential::new(explicit_system(cfg)?)?)),
        Source::Grid(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!(
                    "potential_path: cannot read {}: {e}",
                    path.display()
                ))
            })?;
            Ok(Box::new(read_potential_csv(&text, cfg.flavor)?))
        }
    }
}

/// `0, step, 2 step, …` up to `x_max` (inclusive up to rounding).
pub fn x_grid(x_max: f64, step: f64) -> Vec<f64> {
    let count = (x_max / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| k as f64 * step).collect()
}

pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|k| a + (b - a) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    system: SystemSummary,
    validation: &'a ValidationReport,
    source_order: usize,
    x_max: f64,
    x_step: f64,
    samples: usize,
}

#[derive(Serialize)]
struct PotentialJson {
    flavor: Flavor,
    x: Vec<f64>,
    v: Vec<WireMatrix>,
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("system.json")
}

fn recover(cfg: &JobConfig, out: &Path) -> Result<Outcome, CliError> {
    let source = realization(cfg)?;
    let (reduced, validation) = admissible(source, cfg)?;
    let sys = build_with(&reduced, cfg.flavor, &cfg.tolerances)?;
    let x_max = cfg.x_max.unwrap_or_else(|| sys.default_x_max());
    let summary = sys.summary();
    let p = ExplicitPotential::new(sys)?;
    let grid = PotentialGrid::sample(&p, x_grid(x_max, cfg.x_step))?;
    let (m1, m2) = p.dims();
    let bytes = match cfg.format {
        Format::Csv => potential_csv(grid.xs(), grid.samples(), m1, m2)?,
        Format::Json => json_bytes(&PotentialJson {
            flavor: cfg.flavor,
            x: grid.xs().to_vec(),
            v: grid.samples().iter().map(matrix_to_wire).collect(),
        })?,
    };
    let sidecar = sidecar_path(out);
    let doc = Sidecar {
        system: summary,
        validation: &validation,
        source_order: source.n(),
        x_max,
        x_step: cfg.x_step,
        samples: grid.xs().len(),
    };
    write(out, &bytes)?;
    write(&sidecar, &json_bytes(&doc)?)?;
    let mut text = format!(
        "recovered {} potential of order {} (Riccati residual {:.2e}); {} samples on [0, {}]\n",
        cfg.flavor,
        reduced.n(),
        doc.system.riccati.relative_residual,
        doc.samples,
        x_max
    );
    if reduced.n() < source.n() {
        text.push_str(&format!(
            "minimal reduction: order {} -> {}\n",
            source.n(),
            reduced.n()
        ));
    }
    text.push_str(&format!(
        "wrote {}\nwrote {}\n",
        out.display(),
        sidecar.display()
    ));
    Ok(Outcome {
        passed: true,
        summary: text,
        artifacts: vec![out.to_path_buf(), sidecar],
    })
}

#[derive(Serialize)]
struct TableJson<'a> {
    kind: dirac_core::forward::TableKind,
    #[serde(rename = "L")]
    l: f64,
    h: f64,
    points: Vec<WireComplex>,
    values: Vec<WireMatrix>,
    errors: &'a [f64],
}

fn forward(cfg: &JobConfig, out: &Path) -> Result<Outcome, CliError> {
    let p = potential(cfg)?;
    let table: SpectralTable = spectral_table(p.as_ref(), &cfg.z_points, &forward_config(cfg))?;
    let bytes = match cfg.format {
        Format::Csv => table_csv(&table)?,
        Format::Json => json_bytes(&TableJson {
            kind: table.kind,
            l: table.l,
            h: table.h,
            points: table.points.iter().map(|z| complex_to_wire(*z)).collect(),
            values: table.values.iter().map(matrix_to_wire).collect(),
            errors: &table.errors,
        })?,
    };
    write(out, &bytes)?;
    let worst = table.errors.iter().copied().fold(0.0_f64, f64::max);
    Ok(Outcome {
        passed: true,
        summary: format!(
            "{} values ({:?}) with L = {}, h = {}; largest error estimate {:.2e}\nwrote {}\n",
            table.points.len(),
            table.kind,
            table.l,
            table.h,
            worst,
            out.display()
        ),
        artifacts: vec![out.to_path_buf()],
    })
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    command: &'static str,
    flavor: Flavor,
    #[serde(flatten)]
    report: &'a VerificationReport,
}

fn write_report(
    cfg: &JobConfig,
    out: &Path,
    report: &VerificationReport,
    opts: &RunOptions,
) -> Result<Outcome, CliError> {
    let doc = ReportDocument {
        command: cfg.command.as_str(),
        flavor: cfg.flavor,
        report,
    };
    write(out, &json_bytes(&doc)?)?;
    let mut summary = report.summary_text(opts.timings);
    summary.push_str(&format!("wrote {}\n", out.display()));
    Ok(Outcome {
        passed: report.overall,
        summary,
        artifacts: vec![out.to_path_buf()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_hit_their_endpoints() {
        let xs = x_grid(10.0, 0.01);
        assert_eq!(xs.len(), 1001);
        assert!((xs[1000] - 10.0).abs() < 1e-12);
        assert_eq!(x_grid(1.0, 0.3).len(), 4);
        assert_eq!(linspace(-5.0, 5.0, 11)[5], 0.0);
        assert_eq!(linspace(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn sidecar_sits_next_to_the_table() {
        assert_eq!(
            sidecar_path(Path::new("out/potential.csv")),
            PathBuf::from("out/potential.system.json")
        );
        assert_eq!(sidecar_path(Path::new("v")), PathBuf::from("v.system.json"));
    }
}
