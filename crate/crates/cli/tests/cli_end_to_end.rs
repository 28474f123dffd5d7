use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn sgrobust(args: &[&std::ffi::OsStr]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgrobust"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_manifest(manifest: &Path, out: &Path) -> Output {
    sgrobust(&["run".as_ref(), manifest.as_os_str(), "--out".as_ref(), out.as_os_str()])
}

fn column(summary: &Path, name: &str) -> Vec<String> {
    let mut r = csv::Reader::from_path(summary).unwrap();
    let at = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[at].to_string()).collect()
}

#[test]
fn single_point_writes_one_trajectory_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_manifest(&root().join("manifests/scalar_basic.toml"), dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trajs: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("traj_"))
        .collect();
    assert_eq!(trajs.len(), 1);
    assert_eq!(column(&dir.path().join("summary.csv"), "status"), ["pass"]);
    assert!(dir.path().join("report_0000.toml").exists());
    assert!(dir.path().join("timing.csv").exists());
}

#[test]
fn invalid_step_is_rejected_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(root().join("scenarios/scalar_basic.toml"))
        .unwrap()
        .replace("step = 1e-3", "step = -1e-3");
    fs::write(dir.path().join("bad.toml"), text).unwrap();
    fs::write(dir.path().join("m.toml"), "version = 1\nscenario = \"bad.toml\"\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run_manifest(&dir.path().join("m.toml"), &out_dir);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("bad.toml:"), "{stderr}");
    assert!(!out_dir.exists());
}

#[test]
fn corollary_bound_decreases_along_the_kappa_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_manifest(&root().join("manifests/linear_kappa_sweep.toml"), dir.path());
    assert!(out.status.code().is_some_and(|c| c <= 1));
    let summary = dir.path().join("summary.csv");
    let bounds: Vec<f64> = column(&summary, "corollary_bound").iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(bounds.len(), 4);
    assert!(bounds.windows(2).all(|w| w[1] <= w[0]), "{bounds:?}");
    assert_eq!(column(&summary, "kappa"), ["5", "10", "20", "40"]);
}

#[test]
fn comparing_a_summary_with_itself_shows_zero_differences() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_manifest(&root().join("manifests/scalar_deadzone_levels.toml"), dir.path());
    assert!(out.status.code().is_some_and(|c| c <= 1));
    let s = dir.path().join("summary.csv");
    let out = sgrobust(&["compare".as_ref(), s.as_os_str(), s.as_os_str()]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| l.trim_start().starts_with("0.")).collect();
    assert_eq!(rows.len(), 4, "{table}");
    for r in rows {
        let cols: Vec<&str> = r.split_whitespace().collect();
        let diffs = &cols[cols.len() - 2..];
        assert!(diffs.iter().all(|d| *d == "-" || d.parse::<f64>().unwrap() == 0.0), "{r}");
    }
}

#[test]
fn compare_rejects_a_non_summary_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    fs::write(&p, "a,b\n1,2\n").unwrap();
    let out = sgrobust(&["compare".as_ref(), p.as_os_str()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validate_prints_constants_or_a_located_error() {
    let good = sgrobust(&["validate".as_ref(), root().join("scenarios/scalar_sigma.toml").as_os_str()]);
    assert!(good.status.success());
    let text = String::from_utf8_lossy(&good.stdout);
    assert!(text.contains("k0"), "{text}");

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.toml");
    let text = fs::read_to_string(root().join("scenarios/scalar_basic.toml"))
        .unwrap()
        .replace("gamma = 1.0", "gamma = 1.0\nspeed = 3");
    fs::write(&p, text).unwrap();
    let bad = sgrobust(&["validate".as_ref(), p.as_os_str()]);
    assert_eq!(bad.status.code(), Some(2));
    let err = String::from_utf8_lossy(&bad.stderr);
    assert!(err.contains("s.toml:") && err.contains("speed"), "{err}");
}

#[test]
fn strict_mode_turns_advisory_warnings_into_failure() {
    let dir = tempfile::tempdir().unwrap();
    let m = root().join("manifests/linear_constant.toml");
    let lax = run_manifest(&m, &dir.path().join("a"));
    assert_eq!(lax.status.code(), Some(0));
    let strict = sgrobust(&[
        "run".as_ref(),
        m.as_os_str(),
        "--out".as_ref(),
        dir.path().join("b").as_os_str(),
        "--strict".as_ref(),
    ]);
    assert_eq!(strict.status.code(), Some(1));
}
