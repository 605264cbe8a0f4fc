use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_codazzi"));
    c.env_remove("CODAZZI_THREADS");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run_config(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .arg("--out-dir")
        .arg(out)
        .args(extra)
        .arg("run")
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

fn entries(dir: &Path) -> Vec<String> {
    match std::fs::read_dir(dir) {
        Ok(rd) => rd
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect(),
        Err(_) => Vec::new(),
    }
}

#[test]
fn ball_pipeline_passes_single_threaded() {
    let dir = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let out = run_config(
        &configs().join("ball.toml"),
        dir.path(),
        &["--threads", "1"],
    );
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(elapsed < 60.0, "{elapsed} s");
    let s = summary(dir.path());
    assert_eq!(s["pass"], Value::Bool(true));
    let tasks = s["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 11);
    assert!(tasks.iter().all(|t| t["gates"]
        .as_array()
        .unwrap()
        .iter()
        .all(|g| g["pass"] == Value::Bool(true))));
    for f in [
        "ball_density.json",
        "ball_geometry.csv",
        "ball_volume.csv",
        "ball_q.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn ellipsoid_pipeline_matches_ball() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config(&configs().join("ellipsoid.toml"), dir.path(), &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(dir.path());
    let l = |name: &str| {
        s["tasks"]
            .as_array()
            .unwrap()
            .iter()
            .find(|t| t["name"] == name)
            .unwrap()["metrics"]["log_coefficient"]
            .as_f64()
            .unwrap()
    };
    assert!((l("ellipsoid-volume") - l("ball-volume")).abs() < 1e-3);
}

#[test]
fn pipeline_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = configs().join("ellipsoid.toml");
    assert!(run_config(&cfg, a.path(), &["--threads", "1"])
        .status
        .success());
    let out = bin()
        .env("CODAZZI_THREADS", "3")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(b.path())
        .arg("run")
        .output()
        .unwrap();
    assert!(out.status.success());
    let mut names = entries(a.path());
    names.sort();
    assert_eq!(names, {
        let mut n = entries(b.path());
        n.sort();
        n
    });
    for n in names {
        assert_eq!(
            std::fs::read(a.path().join(&n)).unwrap(),
            std::fs::read(b.path().join(&n)).unwrap(),
            "{n}"
        );
    }
}

const SOLVE_BALL: &str = r#"
[[tasks]]
name = "d"
kind = "solve"
spec = { kind = "quadric", n = 2, quadric = [[-1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]], grid = { lmax = 8, jet_order = 6 } }
output = "d.json"
"#;

fn malformed(body: &str) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, body).unwrap();
    let out_dir = dir.path().join("out");
    let out = run_config(&cfg, &out_dir, &[]);
    assert!(!out.status.success(), "accepted:\n{body}");
    assert_eq!(out.status.code(), Some(2));
    assert!(entries(&out_dir).is_empty(), "partial outputs for:\n{body}");
}

#[test]
fn malformed_configs_are_rejected_without_outputs() {
    malformed("this is not toml = = =");
    malformed(SOLVE_BALL);
    malformed(&format!("schema_version = 99\n{SOLVE_BALL}"));
    malformed("schema_version = 1\ntasks = []\n");
    malformed(&format!(
        "schema_version = 1\nsurprise = true\n{SOLVE_BALL}"
    ));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"x\"\nkind = \"teleport\"\n"
    ));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"v\"\nkind = \"volume\"\ndensity = \"d\"\ngates = [{{ metric = \"volume_of_the_moon\", max = 1.0 }}]\n"
    ));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"v\"\nkind = \"volume\"\ndensity = \"later\"\n"
    ));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"v\"\nkind = \"volume\"\ndensity = \"d\"\neps = \"0.3:0.02:24\"\n"
    ));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"g\"\nkind = \"gjms\"\ndensity = \"d\"\nm = 2\nharmonics = [{{ l = 1, m = 0, coeff = 1.0 }}]\n"
    ));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"b\"\nkind = \"boundary\"\ndensity = \"d\"\nreport = \"../escape.csv\"\n"
    ));
    malformed(&format!("schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"b\"\nkind = \"boundary\"\ndensity = \"d\"\ncolour = \"red\"\n"));
    malformed(&format!(
        "schema_version = 1\n{SOLVE_BALL}\ngates = [{{ metric = \"residual\", max = 1.0, target = 0.0, tol = 1.0 }}]\n"
    ));
}

#[test]
fn runtime_failure_leaves_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!("schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"b\"\nkind = \"boundary\"\ndensity_file = \"missing.json\"\nreport = \"g.csv\"\n"),
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run_config(&cfg, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(entries(&out_dir).is_empty(), "{:?}", entries(&out_dir));
}

#[test]
fn failing_gate_gives_nonzero_exit_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!(
            "schema_version = 1\n{SOLVE_BALL}\n[[tasks]]\nname = \"v\"\nkind = \"volume\"\ndensity = \"d\"\ngates = [{{ metric = \"log_coefficient\", target = 1.0, tol = 1e-3 }}]\n"
        ),
    )
    .unwrap();
    let out = run_config(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let s = summary(dir.path());
    assert_eq!(s["pass"], Value::Bool(false));
    assert!(dir.path().join("d.json").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("v.log_coefficient"));
}

#[test]
fn subcommands_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("ball.toml");
    std::fs::write(
        &spec,
        "kind = \"quadric\"\nn = 2\nquadric = [[-1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]\n[grid]\nlmax = 10\n",
    )
    .unwrap();
    let ok = |args: &[&str]| {
        let out = bin().current_dir(d).args(args).output().unwrap();
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8_lossy(&out.stdout).into_owned()
    };
    ok(&[
        "solve",
        "--spec",
        "ball.toml",
        "--order",
        "2",
        "--strict",
        "--out",
        "density.json",
    ]);
    ok(&[
        "boundary",
        "--density",
        "density.json",
        "--report",
        "geometry.csv",
    ]);
    let csv = std::fs::read_to_string(d.join("geometry.csv")).unwrap();
    let footer: Value =
        serde_json::from_str(csv.lines().last().unwrap().trim_start_matches("# ")).unwrap();
    assert!((footer["area"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-10);
    assert!(csv.lines().next().unwrap().starts_with("x,y,z,h_xx"));

    std::fs::write(d.join("y.json"), r#"[{"l": 3, "m": 1, "coeff": 1.0}]"#).unwrap();
    ok(&[
        "gjms",
        "--density",
        "density.json",
        "--m",
        "3",
        "--input-harmonics",
        "y.json",
        "--out",
        "p3.json",
    ]);
    let p3: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("p3.json")).unwrap()).unwrap();
    assert!((p3["rayleigh_quotient"].as_f64().unwrap() - 720.0).abs() < 1e-6 * 720.0);

    ok(&[
        "qcurv",
        "--density",
        "density.json",
        "--scale",
        "flat",
        "--out",
        "q.json",
    ]);
    let q: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("q.json")).unwrap()).unwrap();
    assert!((q["q_total"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-8);

    ok(&[
        "--out-dir",
        "vol",
        "volume",
        "--density",
        "density.json",
        "--eps",
        "0.02:0.3:24",
        "--out",
        "vol.csv",
    ]);
    let vol = std::fs::read_to_string(d.join("vol/vol.csv")).unwrap();
    assert_eq!(vol.lines().count(), 26);
    assert!(vol.lines().nth(1).unwrap().split(',').all(|v| {
        let mantissa = v.split('e').next().unwrap();
        mantissa.chars().filter(char::is_ascii_digit).count() == 17
    }));

    std::fs::write(
        d.join("f.json"),
        r#"{"kind": "harmonics", "harmonics": [{"l": 3, "m": 0, "coeff": 0.01}]}"#,
    )
    .unwrap();
    ok(&[
        "vary",
        "--spec",
        "ball.toml",
        "--generator",
        "f.json",
        "--mode",
        "second",
        "--out",
        "report.json",
    ]);
    let r: Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert!((r["report"]["ratio"].as_f64().unwrap() + 0.25).abs() < 2.5e-3);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .args(["boundary", "--density", "nope.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.json"));
    let out = bin().current_dir(dir.path()).arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin()
        .args([
            "vary",
            "--spec",
            "x",
            "--generator",
            "y",
            "--mode",
            "sideways",
        ])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
