//! Job configuration: the JSON schema, flag overrides and validation.

use std::path::{Path, PathBuf};

use dirac_core::realization::Realization;
use dirac_core::wire::RealizationWire;
use dirac_core::{Complex64, Flavor, Tolerances};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Recover,
    Forward,
    Roundtrip,
    Invariants,
    ScanDety1,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Recover => "recover",
            Command::Forward => "forward",
            Command::Roundtrip => "roundtrip",
            Command::Invariants => "invariants",
            Command::ScanDety1 => "scan-dety1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// The document as written on disk, before cross-field validation.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    command: Command,
    flavor: Flavor,
    realization: Option<RealizationWire>,
    realization_path: Option<PathBuf>,
    potential_path: Option<PathBuf>,
    x_max: Option<f64>,
    x_step: Option<f64>,
    #[serde(rename = "L")]
    l: Option<f64>,
    h: Option<f64>,
    z_points: Option<Vec<[f64; 2]>>,
    t_min: Option<f64>,
    t_max: Option<f64>,
    t_count: Option<usize>,
    ssa_margin: Option<f64>,
    #[serde(default)]
    tolerances: Tolerances,
    output: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Debug, Clone)]
pub enum Source {
    Realization(Realization),
    /// CSV samples in the layout written by `recover`.
    Grid(PathBuf),
}

#[derive(Debug, Clone)]
pub struct JobConfig {
    pub command: Command,
    pub flavor: Flavor,
    pub source: Source,
    pub x_max: Option<f64>,
    pub x_step: f64,
    pub l: Option<f64>,
    pub h: f64,
    pub z_points: Vec<Complex64>,
    pub t_min: f64,
    pub t_max: f64,
    pub t_count: usize,
    pub ssa_margin: Option<f64>,
    pub tolerances: Tolerances,
    pub output: Option<PathBuf>,
    pub format: Format,
}

/// Per-field overrides coming from command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub x_max: Option<f64>,
    pub x_step: Option<f64>,
    pub h: Option<f64>,
    pub l: Option<f64>,
    pub z_points: Option<Vec<Complex64>>,
    pub output: Option<PathBuf>,
    pub format: Option<String>,
}

impl Overrides {
    fn apply(&self, doc: &mut Map<String, Value>) {
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                doc.insert(key.to_owned(), v);
            }
        };
        set("x_max", self.x_max.map(Value::from));
        set("x_step", self.x_step.map(Value::from));
        set("h", self.h.map(Value::from));
        set("L", self.l.map(Value::from));
        set(
            "z_points",
            self.z_points
                .as_ref()
                .map(|zs| zs.iter().map(|z| Value::from(vec![z.re, z.im])).collect()),
        );
        set(
            "output",
            self.output
                .as_ref()
                .map(|p| Value::from(p.to_string_lossy().into_owned())),
        );
        set("format", self.format.clone().map(Value::from));
    }
}

/// Parses and validates a configuration document. Relative paths inside it
/// are taken relative to the current directory.
pub fn parse_config(text: &str) -> Result<JobConfig, CliError> {
    parse_config_with(text, &Overrides::default(), None)
}

/// Reads a configuration file; relative paths are resolved against its directory.
pub fn load_config(path: &Path, overrides: &Overrides) -> Result<JobConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_with(&text, overrides, path.parent())
}

pub fn parse_config_with(
    text: &str,
    overrides: &Overrides,
    base: Option<&Path>,
) -> Result<JobConfig, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
    let Value::Object(mut doc) = value else {
        return Err(CliError::Config(
            "configuration must be a JSON object".into(),
        ));
    };
    overrides.apply(&mut doc);
    let raw: RawConfig = serde_path_to_error::deserialize(Value::Object(doc)).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Config(e.into_inner().to_string())
        } else {
            CliError::Config(format!("{path}: {}", e.into_inner()))
        }
    })?;
    validate(raw, base)
}

fn positive(field: &str, v: Option<f64>) -> Result<Option<f64>, CliError> {
    match v {
        Some(x) if !(x.is_finite() && x > 0.0) => Err(CliError::Config(format!(
            "{field}: positive required, got {x}"
        ))),
        other => Ok(other),
    }
}

fn resolve(base: Option<&Path>, p: PathBuf) -> PathBuf {
    match base {
        Some(b) if p.is_relative() => b.join(p),
        _ => p,
    }
}

fn validate(raw: RawConfig, base: Option<&Path>) -> Result<JobConfig, CliError> {
    let x_max = positive("x_max", raw.x_max)?;
    let x_step = positive("x_step", raw.x_step)?.unwrap_or(0.01);
    let l = positive("L", raw.l)?;
    let h = positive("h", raw.h)?.unwrap_or(1e-3);
    let ssa_margin = positive("ssa_margin", raw.ssa_margin)?;
    if raw.t_count == Some(0) {
        return Err(CliError::Config("t_count: positive required, got 0".into()));
    }
    for (i, z) in raw.z_points.iter().flatten().enumerate() {
        if !(z[0].is_finite() && z[1].is_finite()) {
            return Err(CliError::Config(format!("z_points[{i}]: non-finite entry")));
        }
    }
    for (field, v) in [("t_min", raw.t_min), ("t_max", raw.t_max)] {
        if v.is_some_and(|t| !t.is_finite()) {
            return Err(CliError::Config(format!("{field}: must be finite")));
        }
    }

    let sources = [
        raw.realization.is_some(),
        raw.realization_path.is_some(),
        raw.potential_path.is_some(),
    ];
    if sources.iter().filter(|&&s| s).count() > 1 {
        return Err(CliError::Config(
            "realization, realization_path and potential_path are mutually exclusive".into(),
        ));
    }
    let source = if let Some(wire) = raw.realization {
        Source::Realization(
            wire.decode()
                .map_err(|e| CliError::Config(format!("realization: {e}")))?,
        )
    } else if let Some(p) = raw.realization_path {
        let p = resolve(base, p);
        Source::Realization(read_realization(&p)?)
    } else if let Some(p) = raw.potential_path {
        Source::Grid(resolve(base, p))
    } else {
        return Err(CliError::Config(
            "realization: a realization or potential_path source is required".into(),
        ));
    };

    let needs_realization = matches!(
        raw.command,
        Command::Recover | Command::Roundtrip | Command::Invariants
    );
    if needs_realization && matches!(source, Source::Grid(_)) {
        return Err(CliError::Config(format!(
            "realization: command {} needs a realization, not a potential grid",
            raw.command.as_str()
        )));
    }
    let z_points: Vec<Complex64> = raw
        .z_points
        .unwrap_or_default()
        .into_iter()
        .map(|[re, im]| Complex64::new(re, im))
        .collect();
    if matches!(raw.command, Command::Forward | Command::Roundtrip) && z_points.is_empty() {
        return Err(CliError::Config(format!(
            "z_points: required and nonempty for command {}",
            raw.command.as_str()
        )));
    }
    let (t_min, t_max) = (raw.t_min.unwrap_or(-5.0), raw.t_max.unwrap_or(5.0));
    if t_max < t_min {
        return Err(CliError::Config(format!(
            "t_max: must not be below t_min ({t_max} < {t_min})"
        )));
    }
    let format = raw.format.unwrap_or(match raw.command {
        Command::Recover | Command::Forward => Format::Csv,
        _ => Format::Json,
    });
    if format == Format::Csv
        && matches!(
            raw.command,
            Command::Roundtrip | Command::Invariants | Command::ScanDety1
        )
    {
        return Err(CliError::Config(format!(
            "format: command {} writes JSON reports only",
            raw.command.as_str()
        )));
    }
    Ok(JobConfig {
        command: raw.command,
        flavor: raw.flavor,
        source,
        x_max,
        x_step,
        l,
        h,
        z_points,
        t_min,
        t_max,
        t_count: raw.t_count.unwrap_or(101),
        ssa_margin,
        tolerances: raw.tolerances,
        output: raw.output,
        format,
    })
}

fn read_realization(path: &Path) -> Result<Realization, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!(
            "realization_path: cannot read {}: {e}",
            path.display()
        ))
    })?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let wire: RealizationWire = serde_path_to_error::deserialize(&mut de)
        .map_err(|e| CliError::Config(format!("realization_path: {}: {}", e.path(), e.inner())))?;
    wire.decode()
        .map_err(|e| CliError::Config(format!("realization_path: {e}")))
}

/// Parses `"a+bi"`, `"-2i"`, `"3"`, `"1e-3-0.5i"` and the like.
pub fn parse_complex(s: &str) -> Result<Complex64, String> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("cannot parse {s:?} as a complex number");
    let Some(body) = t.strip_suffix('i') else {
        return t
            .parse::<f64>()
            .map(|re| Complex64::new(re, 0.0))
            .map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| matches!(bytes[k], b'+' | b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => other.parse::<f64>().map_err(|_| bad())?,
    };
    let re = re.parse::<f64>().map_err(|_| bad())?;
    Ok(Complex64::new(re, im))
}

/// Comma-separated list for `--z`.
pub fn parse_complex_list(s: &str) -> Result<Vec<Complex64>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(parse_complex)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SECH: &str = r#"{"command":"recover","flavor":"ssa","realization":{"n":1,"m1":1,"m2":1,"A":[[[0,0]]],"B":[[[1,0]]],"C":[[[1,0]]]},"x_max":10,"x_step":0.01}"#;

    fn message(e: CliError) -> String {
        assert_eq!(e.exit_code(), 2, "{e}");
        e.to_string()
    }

    #[test]
    fn parses_scalar_recover_job() {
        let cfg = parse_config(SECH).unwrap();
        assert_eq!(cfg.command, Command::Recover);
        assert_eq!(cfg.flavor, Flavor::Ssa);
        assert_eq!(cfg.x_max, Some(10.0));
        assert_eq!(cfg.x_step, 0.01);
        assert_eq!(cfg.format, Format::Csv);
        let Source::Realization(r) = cfg.source else {
            panic!("expected realization")
        };
        assert_eq!((r.n(), r.m1(), r.m2()), (1, 1, 1));
    }

    #[test]
    fn missing_flavor_is_named() {
        let text = SECH.replace(r#""flavor":"ssa","#, "");
        assert!(message(parse_config(&text).unwrap_err()).contains("flavor"));
    }

    #[test]
    fn negative_step_needs_positive() {
        let text = SECH.replace(r#""x_step":0.01"#, r#""x_step":-1"#);
        let msg = message(parse_config(&text).unwrap_err());
        assert!(
            msg.contains("x_step") && msg.contains("positive required"),
            "{msg}"
        );
    }

    #[test]
    fn schema_errors_carry_the_field_path() {
        let text = SECH.replace(r#""B":[[[1,0]]]"#, r#""B":[[[1,"x"]]]"#);
        let msg = message(parse_config(&text).unwrap_err());
        assert!(msg.contains("realization.B"), "{msg}");
        let text = SECH.replace(r#""flavor":"ssa""#, r#""flavor":"both""#);
        assert!(message(parse_config(&text).unwrap_err()).starts_with("flavor"));
        let text = SECH.replace(r#""x_max":10"#, r#""x_maks":10"#);
        assert!(message(parse_config(&text).unwrap_err()).contains("x_maks"));
    }

    #[test]
    fn shape_mismatch_is_a_config_error() {
        let text = SECH.replace(r#""n":1"#, r#""n":2"#);
        assert!(message(parse_config(&text).unwrap_err()).contains("realization"));
    }

    #[test]
    fn forward_requires_points() {
        let text = SECH.replace("recover", "forward");
        assert!(message(parse_config(&text).unwrap_err()).contains("z_points"));
    }

    #[test]
    fn overrides_replace_fields() {
        let o = Overrides {
            x_step: Some(0.5),
            l: Some(15.0),
            z_points: Some(vec![Complex64::new(1.0, 2.0)]),
            ..Default::default()
        };
        let cfg = parse_config_with(SECH, &o, None).unwrap();
        assert_eq!(cfg.x_step, 0.5);
        assert_eq!(cfg.l, Some(15.0));
        assert_eq!(cfg.z_points, vec![Complex64::new(1.0, 2.0)]);
        let o = Overrides {
            h: Some(-1.0),
            ..Default::default()
        };
        assert!(message(parse_config_with(SECH, &o, None).unwrap_err())
            .contains("h: positive required"));
    }

    #[test]
    fn complex_literals() {
        let cases = [
            ("1+2i", (1.0, 2.0)),
            ("-1-0.5i", (-1.0, -0.5)),
            ("2", (2.0, 0.0)),
            ("i", (0.0, 1.0)),
            ("-i", (0.0, -1.0)),
            ("3i", (0.0, 3.0)),
            ("1e-3+2e-1i", (1e-3, 0.2)),
            ("1e+2-1E-2i", (100.0, -0.01)),
            (" 0.5 + i ", (0.5, 1.0)),
        ];
        for (s, (re, im)) in cases {
            assert_eq!(parse_complex(s).unwrap(), Complex64::new(re, im), "{s}");
        }
        assert!(parse_complex("1+").is_err());
        assert!(parse_complex("abc").is_err());
        assert_eq!(parse_complex_list("2, -1,0.5+1i").unwrap().len(), 3);
    }
}
