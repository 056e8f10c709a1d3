use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geokinetic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn euclidean_geodesic_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "metric = \"euclidean\"\ngrid.rays = 20\n");
    let out = dir.path().join("out");
    let o = run(&["geodesic", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("straight_lines") && stdout.contains("overall: PASS"));
    let csv = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.starts_with("index,suite,check,tag,value,threshold,pass\n"));
    assert!(!csv.contains('\r'));
    assert!(out.join("geodesic.csv").exists());
}

#[cfg(feature = "recovery")]
#[test]
fn zero_source_uniqueness_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "source.kind = \"zero\"\n");
    let out = dir.path().join("out");
    let o = run(&["uniqueness", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert!(stdout.contains("unique-consistent"), "{stdout}");
}

#[test]
fn identical_runs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "metric = \"bump\"\nseed = 7\ngrid.rays = 10\ngrid.probes = 2\n");
    let dirs = ["a", "b"].map(|d| dir.path().join(d));
    for suite in ["geodesic", "forward", "kinetic-check", "spectrum"] {
        for d in &dirs {
            let o = run(&[suite, "--config", &cfg, "--out", d.to_str().unwrap()]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
        }
        for name in std::fs::read_dir(&dirs[0]).unwrap() {
            let name = name.unwrap().file_name();
            let a = std::fs::read(dirs[0].join(&name)).unwrap();
            let b = std::fs::read(dirs[1].join(&name)).unwrap();
            assert_eq!(a, b, "{name:?} differs");
        }
    }
    let other = dir.path().join("c");
    run(&["geodesic", "--config", &cfg, "--out", other.to_str().unwrap(), "--seed", "8"]);
    assert_ne!(
        std::fs::read(dirs[0].join("geodesic.csv")).unwrap(),
        std::fs::read(other.join("geodesic.csv")).unwrap()
    );
}

#[test]
fn config_errors_report_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "metric = \"bump\"\nseed = 1\ngrid.step = -0.5\n");
    let o = run(&["geodesic", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");
    let cfg = write_config(dir.path(), "metric = \"hyperbolic\"\n");
    let o = run(&["geodesic", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 1"));
}

#[test]
fn failing_check_gives_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // the step-halving order cannot be seen when the step is far too coarse for the data
    let cfg = write_config(dir.path(), "metric = \"euclidean\"\ngrid.fd_step = 0.5\n");
    let out = dir.path().join("out");
    let o = run(&["kinetic-check", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL"), "{stdout}");
    assert_eq!(o.status.code(), Some(1));
}
