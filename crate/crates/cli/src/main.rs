use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dirac_cli::config::parse_complex_list;
use dirac_cli::{exit_code, load_config, run, Overrides, RunOptions};
use dirac_core::Complex64;

/// Explicit recovery of Dirac systems from rational reflection coefficients,
/// with a numerical forward solver for verification.
///
/// Relative output paths are placed under $DIRAC_OUTPUT_DIR when it is set.
#[derive(Parser, Debug)]
#[command(name = "dirac", version)]
struct Args {
    /// JSON job configuration.
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "x-max")]
    x_max: Option<f64>,
    #[arg(long = "x-step")]
    x_step: Option<f64>,
    /// Integrator step.
    #[arg(long)]
    h: Option<f64>,
    /// Truncation length of the half-line.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Comma-separated spectral points, e.g. "2,-1,1+1i".
    #[arg(long, value_parser = parse_points, allow_hyphen_values = true)]
    z: Option<Points>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Print per-check wall times.
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Clone)]
struct Points(Vec<Complex64>);

fn parse_points(s: &str) -> Result<Points, String> {
    parse_complex_list(s).map(Points)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let overrides = Overrides {
        x_max: args.x_max,
        x_step: args.x_step,
        h: args.h,
        l: args.l,
        z_points: args.z.map(|p| p.0),
        output: args.output,
        format: args.format,
    };
    let opts = RunOptions {
        output_dir: std::env::var_os("DIRAC_OUTPUT_DIR").map(PathBuf::from),
        timings: args.timings,
    };
    let result = load_config(&args.config, &overrides).and_then(|cfg| run(&cfg, &opts));
    match &result {
        Ok(outcome) => print!("{}", outcome.summary),
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
