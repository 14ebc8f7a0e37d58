use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn pwspline(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pwspline"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn csv_column(path: &Path, col: usize) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn build_circle_writes_stencil_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"seed": 1, "backend": {"kind": "circle", "n": 8}}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = pwspline(&["build"], Some(&cfg), &a);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("fingerprint "));
    assert!(pwspline(&["build"], Some(&cfg), &b).status.success());

    let mtx = std::fs::read_to_string(a.join("operator.mtx")).unwrap();
    assert!(mtx.starts_with("%%MatrixMarket matrix coordinate real symmetric"));
    // lower triangle only: 8 diagonal + 8 off-diagonal (one of them the wrap)
    let size = mtx.lines().find(|l| !l.starts_with('%')).unwrap();
    assert_eq!(size, "8 8 16");
    assert_eq!(mtx, std::fs::read_to_string(b.join("operator.mtx")).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(files, ["config.resolved.json", "geometry.json", "operator.mtx"]);
}

#[test]
fn malformed_or_unknown_config_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write(dir.path(), "bad.json", r#"{"seed": 1, "backend": {"kind": "circle", "n": 8},}"#);
    let o = pwspline(&["build"], Some(&bad), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
    assert!(!out.exists());

    let unknown = write(dir.path(), "u.json", r#"{"seed": 1, "backend": {"kind": "circle", "n": 8}, "omgea": 1}"#);
    let o = pwspline(&["build"], Some(&unknown), &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("omgea"));

    let no_seed = write(dir.path(), "s.json", r#"{"backend": {"kind": "circle", "n": 8}}"#);
    assert_eq!(pwspline(&["build"], Some(&no_seed), &out).status.code(), Some(2));
    assert_eq!(pwspline(&["frobnicate"], None, &out).status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn spectrum_of_small_circle_and_lowest_mode() {
    let dir = tempfile::tempdir().unwrap();
    let c4 = write(dir.path(), "c4.json", r#"{"seed": 1, "backend": {"kind": "circle", "n": 4}}"#);
    let out = dir.path().join("s4");
    assert!(pwspline(&["spectrum"], Some(&c4), &out).status.success());
    let ev = csv_column(&out.join("spectrum.csv"), 1);
    for (got, want) in ev.iter().zip([0.0, 2.0, 2.0, 4.0]) {
        assert!((got - want).abs() < 1e-12, "{ev:?}");
    }
    let res = csv_column(&out.join("spectrum.csv"), 2);
    assert!(res.iter().all(|r| *r <= 1e-8 * 4.0));

    // lowest-4 against the full spectrum, the latter read back from Matrix Market
    let c100 = write(dir.path(), "c100.json", r#"{"seed": 1, "backend": {"kind": "circle", "n": 100}}"#);
    let built = dir.path().join("b100");
    assert!(pwspline(&["build"], Some(&c100), &built).status.success());
    let full = dir.path().join("full");
    let mtx = built.join("operator.mtx");
    assert!(pwspline(&["spectrum", "--operator", mtx.to_str().unwrap()], None, &full).status.success());
    let low = dir.path().join("low");
    assert!(pwspline(&["spectrum", "--lowest", "4"], Some(&c100), &low).status.success());
    let f = csv_column(&full.join("spectrum.csv"), 1);
    let l = csv_column(&low.join("spectrum.csv"), 1);
    assert_eq!(l.len(), 4);
    for i in 0..4 {
        assert!((f[i] - l[i]).abs() <= 1e-6, "{i}: {} vs {}", f[i], l[i]);
    }
}

#[test]
fn reconstruct_full_sampling_and_aliased_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let full = write(
        dir.path(),
        "full.json",
        r#"{"seed": 2, "backend": {"kind": "circle", "n": 32}, "band_dim": 5,
            "sampling": {"kind": "all"}, "schedule": [1, 2, 4], "target": {"random_pw": {}}}"#,
    );
    let out = dir.path().join("full");
    let o = pwspline(&["reconstruct", "--expect-converged"], Some(&full), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(csv_column(&out.join("errors.csv"), 2).iter().all(|e| *e == 0.0));

    // 4 samples for a 9-dimensional band
    let aliased = write(
        dir.path(),
        "aliased.json",
        r#"{"seed": 2, "backend": {"kind": "circle", "n": 32}, "band_dim": 9,
            "sampling": {"kind": "lattice", "level": 3, "base_stride": 1}, "schedule": [1, 2, 4],
            "target": {"random_pw": {}}}"#,
    );
    let out = dir.path().join("aliased");
    let o = pwspline(&["reconstruct", "--expect-converged"], Some(&aliased), &out);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["verdict"], "aliased");
    // without the flag the same run succeeds
    assert_eq!(pwspline(&["reconstruct"], Some(&aliased), &dir.path().join("a2")).status.code(), Some(0));
}

#[test]
fn oversampled_circle_errors_decrease() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"seed": 9, "backend": {"kind": "circle", "n": 128}, "band_dim": 9,
            "sampling": {"kind": "lattice", "level": 0, "base_stride": 4}, "schedule": [1, 2, 4, 8],
            "target": {"random_pw": {}}}"#,
    );
    let out = dir.path().join("o");
    assert!(pwspline(&["reconstruct", "--expect-converged"], Some(&cfg), &out).status.success());
    let e = csv_column(&out.join("errors.csv"), 2);
    for w in e.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "{e:?}");
    }
}

#[test]
fn verify_suites_pass_and_asymmetric_operator_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.json",
        r#"{"seed": 4, "backend": {"kind": "circle", "n": 64}, "band_dim": 9,
            "verify": {"suites": ["symmetry", "lemma2", "bernstein"], "lemma2": {"operators": 20}}}"#,
    );
    let out = dir.path().join("v");
    let o = pwspline(&["verify"], Some(&cfg), &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["pass"], true);
    let suites: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["suite"].as_str().unwrap()).collect();
    assert_eq!(suites.iter().filter(|s| **s == "lemma2").count(), 20);

    write(
        dir.path(),
        "bad.mtx",
        "%%MatrixMarket matrix coordinate real general\n3 3 5\n1 1 1\n1 2 -1\n2 1 -1.5\n2 2 2\n3 3 1\n",
    );
    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"seed": 4, "backend": {"kind": "matrix_market", "path": "bad.mtx"}, "verify": {"suites": ["symmetry"]}}"#,
    );
    let out = dir.path().join("bad");
    let o = pwspline(&["verify"], Some(&bad), &out);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("symmetry check failed"));
    assert!(!out.exists());
}

#[test]
fn identical_configs_give_identical_payloads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"seed": 21, "backend": {"kind": "circle", "n": 64}, "band_dim": 11,
            "scan": {"levels": [2, 1, 0], "base_stride": 2, "k": 2}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(pwspline(&["scan"], Some(&cfg), &a).status.success());
    assert!(pwspline(&["scan", "--jobs", "3"], Some(&cfg), &b).status.success());
    for f in ["scan.csv", "scan.json", "config.resolved.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_the_target() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"seed": 1, "backend": {"kind": "circle", "n": 32}, "band_dim": 5, "target": {"random_pw": {}}}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(pwspline(&["project"], Some(&cfg), &a).status.success());
    assert!(pwspline(&["project", "--seed-override", "2"], Some(&cfg), &b).status.success());
    assert_ne!(std::fs::read(a.join("projected.csv")).unwrap(), std::fs::read(b.join("projected.csv")).unwrap());
    let resolved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(b.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["seed"], 2);
}
