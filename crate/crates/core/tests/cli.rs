use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ran-import"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = "[mesh]\ntarget_h = 2.5\n[time]\nt_end = 0.2\nlinear_solver = \"direct\"\n";

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[time]\ndt = \"fast\"\n");
    let out = bin().args(["simulate", cfg.to_str().unwrap(), "--quiet"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("dt"), "{err}");
}

#[test]
fn missing_config_exits_2() {
    let out = bin().args(["simulate", "/nonexistent/cfg.toml", "--quiet"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unstable_explicit_step_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "rk.toml", "[mesh]\ntarget_h = 2.5\n[time]\nscheme = \"ssp-rk3\"\ndt = 0.5\n");
    let out = bin()
        .args(["simulate", cfg.to_str().unwrap(), "--quiet", "--output-dir"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn converge_needs_three_levels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "");
    let out = bin()
        .args(["converge", cfg.to_str().unwrap(), "--levels", "2", "--quiet"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_versioned_csv_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let status = bin()
            .args(["simulate", cfg.to_str().unwrap(), "--quiet", "--output-dir"])
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out_dir.join("timeseries.csv")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    assert!(a.starts_with("# ran-import timeseries v1\nt,"));
    // t = 0, 0.1, 0.2
    assert_eq!(a.lines().count(), 2 + 3);

    // the dumped effective config reproduces the run
    let dumped = dir.path().join("a").join("config.toml");
    let out_dir = dir.path().join("c");
    assert!(bin()
        .args(["simulate", dumped.to_str().unwrap(), "--quiet", "--output-dir"])
        .arg(&out_dir)
        .status()
        .unwrap()
        .success());
    assert_eq!(std::fs::read_to_string(out_dir.join("timeseries.csv")).unwrap(), a);
}

#[test]
fn no_advection_flag_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", SMALL);
    let run = |name: &str, extra: &[&str]| {
        let out_dir = dir.path().join(name);
        let status = bin()
            .args(["simulate", cfg.to_str().unwrap(), "--quiet"])
            .args(extra)
            .arg("--output-dir")
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(out_dir.join("config.toml")).unwrap()
    };
    let on = run("on", &[]);
    let off = run("off", &["--no-advection"]);
    assert!(on.contains("advection = true"));
    assert!(off.contains("advection = false"));
}
