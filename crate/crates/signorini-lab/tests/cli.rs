//! End-to-end checks of the installed binary: exit codes, JSON output,
//! run-directory artifacts, caching, and machine-readable error records.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_signorini-lab"))
}

/// Run with the given args, require success, parse stdout as one JSON value.
fn run_ok(args: &[&str]) -> Value {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "expected success for {args:?}\nstderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON value")
}

/// Run with the given args, require failure, return the error record.
fn run_err(args: &[&str]) -> (String, String) {
    let out = bin().args(args).output().expect("binary runs");
    assert!(!out.status.success(), "expected failure for {args:?}");
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON record");
    (
        v["error"]["kind"].as_str().expect("kind").to_string(),
        v["error"]["message"].as_str().expect("message").to_string(),
    )
}

fn assert_files(dir: &Path, names: &[&str]) {
    for name in names {
        assert!(
            dir.join(name).is_file(),
            "missing artifact {name} in {}",
            dir.display()
        );
    }
    for entry in std::fs::read_dir(dir).unwrap() {
        let fname = entry.unwrap().file_name().into_string().unwrap();
        assert!(!fname.contains(".tmp-"), "leftover temporary file {fname}");
    }
}

#[test]
fn solve_builtin_writes_artifacts_and_caches() {
    let out = tempfile::tempdir().unwrap();
    let outs = out.path().to_str().unwrap();
    let first = run_ok(&["solve", "signorini-2d", "--out", outs]);
    assert_eq!(first["scenario"], "signorini-2d");
    assert_eq!(first["cached"], Value::Bool(false));
    let dir = Path::new(first["dir"].as_str().unwrap()).to_path_buf();
    assert_files(
        &dir,
        &[
            "config.toml",
            "meta.json",
            "solution.csv",
            "solve_report.json",
        ],
    );
    let second = run_ok(&["solve", "signorini-2d", "--out", outs]);
    assert_eq!(second["cached"], Value::Bool(true));
    assert_eq!(second["dir"], first["dir"]);
    assert_eq!(second["iterations"], first["iterations"]);
    assert_eq!(second["max_pde_residual"], first["max_pde_residual"]);
}

#[test]
fn fresh_runs_agree_bitwise_except_timing() {
    let strip = |mut v: Value| {
        let obj = v.as_object_mut().unwrap();
        obj.remove("wall_seconds");
        obj.remove("cached");
        v
    };
    let mut reports = Vec::new();
    let mut keys = Vec::new();
    for _ in 0..2 {
        let out = tempfile::tempdir().unwrap();
        let v = run_ok(&[
            "solve",
            "signorini-2d",
            "--out",
            out.path().to_str().unwrap(),
        ]);
        let dir = Path::new(v["dir"].as_str().unwrap()).to_path_buf();
        keys.push(dir.file_name().unwrap().to_str().unwrap().to_string());
        let text = std::fs::read_to_string(dir.join("solve_report.json")).unwrap();
        reports.push(strip(serde_json::from_str(&text).unwrap()));
    }
    assert_eq!(
        keys[0], keys[1],
        "identical config bytes must hash to the same run key"
    );
    assert_eq!(
        reports[0], reports[1],
        "identical runs must produce identical reports"
    );
}

#[test]
fn diagnose_builtin_hits_exponent_window() {
    let out = tempfile::tempdir().unwrap();
    let v = run_ok(&[
        "diagnose",
        "signorini-2d",
        "--out",
        out.path().to_str().unwrap(),
    ]);
    let alpha_u = v["alpha_u"].as_f64().expect("finite exponent");
    assert!(
        (1.3..=1.7).contains(&alpha_u),
        "alpha_u {alpha_u} outside the analytic window [1.3, 1.7]"
    );
    assert_eq!(v["barrier_samples"], Value::from(10));
    let dir = Path::new(v["dir"].as_str().unwrap()).to_path_buf();
    assert_files(
        &dir,
        &[
            "regularity_report.json",
            "flatness.csv",
            "sigma_profile.csv",
            "barrier.csv",
        ],
    );
}

fn full_config(dir: &Path) -> String {
    let path = dir.join("bench65.toml");
    std::fs::write(
        &path,
        r#"
name = "bench65"
n = 2
grid = 65
family = "laplace"
obstacle = "zero"
boundary = "exact-signorini"
epsilon_sweep = [0.2, 0.1, 0.05]

[diagnostics]
center = [0.0]
sigma_profile = true
barrier_samples = 4
"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn report_consolidates_all_invariant_flags() {
    let work = tempfile::tempdir().unwrap();
    let cfg = full_config(work.path());
    let outdir = work.path().join("runs");
    let outs = outdir.to_str().unwrap();
    run_ok(&["solve", &cfg, "--out", outs]);
    run_ok(&["diagnose", &cfg, "--out", outs]);
    let sweep = run_ok(&["sweep", &cfg, "--out", outs]);
    let rows = sweep["epsilon_sweep"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    let sups: Vec<f64> = rows
        .iter()
        .map(|r| r["sup_excess"].as_f64().unwrap())
        .collect();
    assert!(
        sups.windows(2).all(|w| w[1] < w[0]),
        "sweep excess must decrease: {sups:?}"
    );

    let dir = sweep["dir"].as_str().unwrap().to_string();
    let summary = run_ok(&["report", &dir]);
    let pass = summary["pass"].as_object().unwrap();
    for key in [
        "max_principle",
        "complementarity",
        "sigma_nonpositive",
        "sigma_off_contact",
        "sigma_identity",
        "pucci_supersolution",
        "thin_complementarity_v",
        "flatness_affine_invariance",
        "barrier_nonnegative",
        "penalization_decreasing",
    ] {
        assert_eq!(
            pass.get(key),
            Some(&Value::Bool(true)),
            "flag {key} missing or false in {pass:?}"
        );
    }

    let csv_summary = run_ok(&["report", &dir, "--format", "csv"]);
    assert_eq!(csv_summary["pass"]["sigma_nonpositive"], Value::Bool(true));
    let text = std::fs::read_to_string(Path::new(&dir).join("summary.csv")).unwrap();
    assert!(
        text.lines()
            .any(|l| l.starts_with("pass.sigma_nonpositive,true")),
        "flattened pass flags missing from summary.csv:\n{text}"
    );
}

#[test]
fn config_content_hash_drives_run_identity() {
    let work = tempfile::tempdir().unwrap();
    let outs = work.path().join("runs");
    let out_str = outs.to_str().unwrap();
    let base = r#"
name = "hashcase"
n = 2
grid = 17
family = "laplace"
obstacle = "zero"
boundary = "exact-signorini"
"#;
    let a = work.path().join("a.toml");
    let b = work.path().join("b.toml");
    std::fs::write(&a, base).unwrap();
    std::fs::write(&b, base).unwrap();
    let va = run_ok(&["solve", a.to_str().unwrap(), "--out", out_str]);
    let vb = run_ok(&["solve", b.to_str().unwrap(), "--out", out_str]);
    assert_eq!(va["dir"], vb["dir"], "same bytes, same key");
    assert_eq!(vb["cached"], Value::Bool(true));

    let c = work.path().join("c.toml");
    std::fs::write(&c, base.replace("grid = 17", "grid = 33")).unwrap();
    let vc = run_ok(&["solve", c.to_str().unwrap(), "--out", out_str]);
    assert_ne!(vc["dir"], va["dir"], "different bytes, different key");
}

#[test]
fn oracle_compare_matches_enumeration() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("tiny.toml");
    std::fs::write(
        &cfg,
        r#"
name = "tiny"
n = 2
grid = 9
family = "laplace"
obstacle = "paraboloid"
paraboloid = [0.2, 2.0]
boundary = "constant"
constant = 0.5
"#,
    )
    .unwrap();
    let outs = work.path().join("runs");
    let v = run_ok(&[
        "oracle-compare",
        cfg.to_str().unwrap(),
        "--out",
        outs.to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert_eq!(v["all_match"], Value::Bool(true));
    assert_eq!(v["instances"].as_array().map(Vec::len), Some(21));
    assert!(v["worst_diff"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn error_records_are_machine_readable() {
    let work = tempfile::tempdir().unwrap();
    let outs = work.path().join("runs");
    let out_str = outs.to_str().unwrap();

    let even = work.path().join("even.toml");
    std::fs::write(
        &even,
        "name = \"even\"\nn = 2\ngrid = 64\nfamily = \"laplace\"\nobstacle = \"zero\"\nboundary = \"constant\"\nconstant = 0.0\n",
    )
    .unwrap();
    let (kind, message) = run_err(&["solve", even.to_str().unwrap(), "--out", out_str]);
    assert_eq!(kind, "invalid-spec");
    assert!(
        message.contains("odd"),
        "message should name the parity rule: {message}"
    );

    let empty = work.path().join("empty-run");
    std::fs::create_dir_all(&empty).unwrap();
    let (kind, _) = run_err(&["report", empty.to_str().unwrap()]);
    assert_eq!(kind, "incomplete-run");

    let fam = work.path().join("shear.json");
    std::fs::write(
        &fam,
        r#"{"lambda": 0.05, "Lambda": 3.0, "members": [
            {"matrix": [1.0, 0.95, 0.95, 1.0], "c": 0.0},
            {"matrix": [0.05, 0.0, 0.0, 2.0], "c": 0.0}
        ]}"#,
    )
    .unwrap();
    let shear_cfg = work.path().join("shear.toml");
    std::fs::write(
        &shear_cfg,
        format!(
            "name = \"shear\"\nn = 2\ngrid = 17\nfamily = {:?}\nobstacle = \"zero\"\nboundary = \"constant\"\nconstant = 0.0\npivot_index = 0\n",
            fam.to_str().unwrap()
        ),
    )
    .unwrap();
    let (kind, _) = run_err(&["solve", shear_cfg.to_str().unwrap(), "--out", out_str]);
    assert_eq!(kind, "non-monotone-after-transform");

    let (kind, message) = run_err(&["solve", "no-such-scenario", "--out", out_str]);
    assert_eq!(kind, "invalid-spec");
    assert!(
        message.contains("no-such-scenario"),
        "message should echo the argument: {message}"
    );
}
