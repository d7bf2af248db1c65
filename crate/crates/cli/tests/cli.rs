//! End-to-end runs of the `dirac` binary: artifacts and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dirac_cli::io::read_potential_csv;
use dirac_core::forward::Potential;
use dirac_core::Flavor;

const SECH: &str = r#"{"n":1,"m1":1,"m2":1,"A":[[[0,0]]],"B":[[[1,0]]],"C":[[[1,0]]]}"#;
const SA_SCALAR: &str = r#"{"n":1,"m1":1,"m2":1,"A":[[[0,-1]]],"B":[[[1,0]]],"C":[[[0.5,0]]]}"#;

fn dirac(dir: &Path, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("job.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_dirac"))
        .arg("--config")
        .arg(&path)
        .args(extra)
        .current_dir(dir)
        .env_remove("DIRAC_OUTPUT_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn job(command: &str, flavor: &str, realization: &str, rest: &str) -> String {
    format!(r#"{{"command":"{command}","flavor":"{flavor}","realization":{realization}{rest}}}"#)
}

#[test]
fn recover_sech_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dirac(
        dir.path(),
        &job("recover", "ssa", SECH, r#","x_max":10,"x_step":0.01"#),
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("potential.csv")).unwrap();
    assert!(text.starts_with("x,re_v_11,im_v_11\n"));
    let grid = read_potential_csv(&text, Flavor::Ssa).unwrap();
    assert_eq!(grid.xs().len(), 1001);
    let worst = grid
        .xs()
        .iter()
        .zip(grid.samples())
        .map(|(&x, v)| (v[(0, 0)] - dirac_core::Complex64::new(2.0 / (2.0 * x).cosh(), 0.0)).norm())
        .fold(0.0_f64, f64::max);
    assert!(worst <= 1e-8, "max deviation {worst:e}");

    let sidecar: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("potential.system.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(sidecar["system"]["A"], serde_json::json!([[[0.0, 1.0]]]));
    assert_eq!(sidecar["system"]["S0"], serde_json::json!([[[1.0, 0.0]]]));
    assert!(
        sidecar["system"]["riccati"]["relative_residual"]
            .as_f64()
            .unwrap()
            < 1e-10
    );
}

#[test]
fn recovered_csv_feeds_the_forward_solver() {
    let dir = tempfile::tempdir().unwrap();
    let out = dirac(
        dir.path(),
        &job("recover", "ssa", SECH, r#","x_max":15,"x_step":0.001"#),
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let config = r#"{"command":"forward","flavor":"ssa","potential_path":"potential.csv","L":15,"h":0.001,"z_points":[[2,0]],"output":"r.csv"}"#;
    let out = dirac(dir.path(), config, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("z_re,z_im,re_R_11,im_R_11,err_est"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    // Linear interpolation on a 1e-3 grid is second order in the step.
    assert!(
        (row[2] - 0.5).abs() < 1e-5 && row[3].abs() < 1e-5,
        "{row:?}"
    );
}

#[test]
fn grid_source_is_reread_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = dirac(
        dir.path(),
        &job("recover", "sa", SA_SCALAR, r#","x_max":3,"x_step":0.07"#),
        &[],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let first = std::fs::read(dir.path().join("potential.csv")).unwrap();
    let grid = read_potential_csv(std::str::from_utf8(&first).unwrap(), Flavor::Sa).unwrap();
    let again = dirac_cli::io::potential_csv(grid.xs(), grid.samples(), 1, 1).unwrap();
    assert_eq!(first, again);
    assert_eq!(grid.dims(), (1, 1));
}

#[test]
fn sa_roundtrip_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dirac(
        dir.path(),
        &job("roundtrip", "sa", SA_SCALAR, r#","L":15"#),
        &["--z", "1,-2,i,1+i", "--output", "rt.json"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("rt.json")).unwrap())
            .unwrap();
    assert_eq!(report["overall"], serde_json::json!(true));
    assert_eq!(report["command"], serde_json::json!("roundtrip"));
    assert_eq!(report["checks"].as_array().unwrap().len(), 6);
    assert!(String::from_utf8_lossy(&out.stdout).contains("overall: PASS"));
}

#[test]
fn output_directory_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("job.json");
    std::fs::write(
        &path,
        job("recover", "ssa", SECH, r#","x_max":1,"x_step":0.5"#),
    )
    .unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_dirac"))
        .args(["--config", path.to_str().unwrap(), "--format", "json"])
        .current_dir(dir.path())
        .env("DIRAC_OUTPUT_DIR", dir.path().join("nested/out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("nested/out/potential.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(doc["x"], serde_json::json!([0.0, 0.5, 1.0]));
    assert!(dir.path().join("nested/out/potential.system.json").exists());
}

/// Every error path maps to its documented exit code.
#[test]
fn exit_codes_under_fault_injection() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let recover_sech = job("recover", "ssa", SECH, r#","x_max":2,"x_step":0.5"#);
    let blocker = d.join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let into_file = blocker.join("out.csv");
    let cases: Vec<(&str, String, Vec<String>, i32, &str)> = vec![
        ("malformed JSON", "{".into(), vec![], 2, "malformed JSON"),
        ("not an object", "[1]".into(), vec![], 2, "object"),
        (
            "missing flavor",
            recover_sech.replace(r#""flavor":"ssa","#, ""),
            vec![],
            2,
            "flavor",
        ),
        (
            "negative step",
            recover_sech.replace(r#""x_step":0.5"#, r#""x_step":-1"#),
            vec![],
            2,
            "positive required",
        ),
        ("bad flag value", recover_sech.clone(), vec!["--h".into(), "0".into()], 2, "positive required"),
        ("unparsable --z", recover_sech.clone(), vec!["--z".into(), "1+".into()], 2, "complex"),
        (
            "unreadable realization",
            r#"{"command":"recover","flavor":"ssa","realization_path":"missing.json"}"#.into(),
            vec![],
            2,
            "realization_path",
        ),
        (
            "unreadable grid",
            r#"{"command":"forward","flavor":"ssa","potential_path":"missing.csv","L":5,"z_points":[[1,0]]}"#.into(),
            vec![],
            2,
            "potential_path",
        ),
        (
            "grid without L",
            r#"{"command":"scan-dety1","flavor":"ssa","potential_path":"grid.csv","t_count":3}"#.into(),
            vec![],
            2,
            "truncation",
        ),
        (
            "lower half-plane point",
            job("forward", "sa", SA_SCALAR, r#","z_points":[[0,-1]]"#),
            vec![],
            2,
            "Im z",
        ),
        (
            "sa on a pole at the origin",
            job("recover", "sa", SECH, ""),
            vec![],
            3,
            "contractive",
        ),
        (
            "failed report",
            job("roundtrip", "ssa", SECH, r#","z_points":[[1,0]],"h":0.5"#),
            vec![],
            3,
            "",
        ),
        (
            "unwritable output",
            recover_sech.clone(),
            vec!["--output".into(), into_file.to_string_lossy().into_owned()],
            1,
            "cannot",
        ),
    ];
    std::fs::write(d.join("grid.csv"), "x,re_v_11,im_v_11\n0,1,0\n1,0,0\n").unwrap();
    for (label, config, args, expected, needle) in cases {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out = dirac(d, &config, &args);
        let err = stderr(&out);
        assert_eq!(code(&out), expected, "{label}: {err}");
        assert!(err.contains(needle), "{label}: {err:?} lacks {needle:?}");
    }
}

#[test]
fn sa_rejection_cites_riccati() {
    let dir = tempfile::tempdir().unwrap();
    let out = dirac(dir.path(), &job("recover", "sa", SECH, ""), &[]);
    assert_eq!(code(&out), 3);
    let err = stderr(&out);
    assert!(err.contains("no admissible Riccati solution"), "{err}");
    assert!(!PathBuf::from(dir.path()).join("potential.csv").exists());
}
