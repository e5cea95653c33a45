use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy-lab")).args(args).current_dir(dir).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

fn json_stdout(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn extension_at_the_origin_is_the_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.json", r#"{"points": [[0, 0]], "s": 1, "p": 2, "nu": [[0.3, -0.4]]}"#);
    let report = json_stdout(&lab(&["extend", "--config", &cfg, "--seed", "7"], dir.path()));
    let ext = &report["results"]["extend"]["report"];
    let c_i = ext["norm_bound"]["c_i"].as_f64().unwrap();
    assert!((c_i - 1.0).abs() < 1e-12, "C_I = {c_i}");
    for r in ext["residuals"].as_array().unwrap() {
        assert!(r.as_f64().unwrap() < 1e-15);
    }
    assert_eq!(ext["norm_bound"]["seed"], 7);
    assert!(report["invariants"].as_array().unwrap().iter().all(|c| c["holds"] == true));
}

#[test]
fn khintchine_sweep_at_two_is_orthogonal() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "k.json", r#"{"khintchine": {"qs": [2], "sizes": [1, 3, 5, 8, 12]}}"#);
    let out = lab(&["khintchine", "--config", &cfg, "--seed", "11", "--format", "csv"], dir.path());
    assert!(out.status.success());
    let mut rows = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(rows.headers().unwrap(), vec!["q", "N", "ratio", "method", "stderr"]);
    let mut count = 0;
    for row in rows.records() {
        let row = row.unwrap();
        let ratio: f64 = row[2].parse().unwrap();
        assert!((ratio - 1.0).abs() <= 1e-12, "N = {}: {ratio}", &row[1]);
        assert_eq!(&row[3], "exact");
        count += 1;
    }
    assert_eq!(count, 5);
}

fn strip_timing(text: &str) -> String {
    text.lines().filter(|l| !l.trim_start().starts_with("\"wall_clock_ms\"")).collect::<Vec<_>>().join("\n")
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "run.json",
        r#"{"points": [[0.3, 0.1], [-0.5, 0.2], [0.1, -0.7]], "s": 1.5, "p": 4, "batch": 8,
            "exact_limit": 2, "mc_samples": 500, "restarts": 4}"#,
    );
    for cmd in ["report", "khintchine"] {
        let run = |out: &str| {
            let o = lab(&[cmd, "--config", &cfg, "--seed", "42", "--out", out], dir.path());
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        };
        run("a");
        run("b");
        let mut files: Vec<_> =
            std::fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
        files.sort();
        assert!(!files.is_empty());
        for f in files {
            let a = std::fs::read_to_string(dir.path().join("a").join(&f)).unwrap();
            let b = std::fs::read_to_string(dir.path().join("b").join(&f)).unwrap();
            assert_eq!(strip_timing(&a), strip_timing(&b), "{f:?} differs");
        }
    }
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
    assert!(
        report["results"]["extend"]["report"]["norm_bound"]["chains"][0]["mean_fg"]["method"]["kind"] == "monte_carlo"
    );
}

#[test]
fn points_from_csv_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("pts.csv"), "a1_re,a1_im,a2_re,a2_im\n0.1,0,0,0.2\n-0.3,0.1,0.2,0\n").unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"domain": "unit_ball2", "points_csv": "pts.csv"}"#);
    let report = json_stdout(&lab(&["gleason", "--config", &cfg], Path::new("/")));
    let d = &report["results"]["gleason"]["distances"];
    assert_eq!(d.as_array().unwrap().len(), 2);
    assert_eq!(d[0][0], 0.0);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"s": 1, "p": 2, "q": 3}"#);
    assert_eq!(lab(&["sh", "--config", &bad], dir.path()).status.code(), Some(2));
    let unseeded = write_config(dir.path(), "u.json", r#"{"points": [[0.1, 0]], "s": 1, "p": 2}"#);
    assert_eq!(lab(&["extend", "--config", &unseeded], dir.path()).status.code(), Some(2));
    let big = write_config(dir.path(), "big.json", r#"{"khintchine": {"qs": [2], "sizes": [24]}, "exact_limit": 30}"#);
    assert_eq!(lab(&["khintchine", "--config", &big, "--seed", "1"], dir.path()).status.code(), Some(3));
    let close = write_config(dir.path(), "close.json", r#"{"points": [[0.5, 0], [0.5000001, 0]], "p": 2}"#);
    assert_eq!(lab(&["dual", "--config", &close], dir.path()).status.code(), Some(4));
    assert_eq!(lab(&["carleson", "--format", "csv"], dir.path()).status.code(), Some(2));
}

#[test]
fn sh_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "sh.json", r#"{"domain": "bidisc", "q": 4, "grid": {"max_radius": 0.8, "count": 3}}"#);
    let out = lab(&["sh", "--config", &cfg, "--format", "csv"], dir.path());
    assert!(out.status.success());
    let mut rows = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        rows.headers().unwrap(),
        vec!["a1_re", "a1_im", "a2_re", "a2_im", "ratio", "hypothesis", "resolution", "residual", "converged"]
    );
    let ratios: Vec<f64> = rows.records().map(|r| r.unwrap()[4].parse().unwrap()).collect();
    assert_eq!(ratios.len(), 3);
    assert!(ratios.iter().all(|&r| r > 0.0 && r <= 1.0 + 1e-10));
}

#[test]
fn bergman_subcommand_reports_subordination() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write_config(dir.path(), "b.json", r#"{"points": [[0.3, 0], [-0.4, 0.2]], "s": 1, "p": 2, "max_degree": 3}"#);
    let report = json_stdout(&lab(&["bergman", "--config", &cfg, "--seed", "2", "--resolution", "32"], dir.path()));
    let b = &report["results"]["bergman"];
    assert!(b["subordination"].as_array().unwrap().iter().all(|r| r["residual"].as_f64().unwrap() < 1e-10));
    assert_eq!(b["extension"]["interpolates"], true);
    let weighted = write_config(dir.path(), "w.json", r#"{"weight": 2, "max_degree": 2}"#);
    let report = json_stdout(&lab(&["bergman", "--config", &weighted], dir.path()));
    let m2 = report["results"]["bergman"]["subordination"][2]["bergman"].as_f64().unwrap();
    assert!((m2 * m2 - 0.1).abs() < 1e-12, "{m2}");
    assert!(report["results"]["bergman"]["extension"].is_null());
}
