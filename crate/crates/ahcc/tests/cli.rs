use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ahcc::{ReportDoc, RunConfig};

fn ahcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahcc")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> (i32, Option<ReportDoc>) {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = ahcc(&args);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let stderr = String::from_utf8_lossy(&o.stderr);
    let report = stdout
        .lines()
        .chain(stderr.lines())
        .find_map(|l| l.strip_prefix("report: ").map(PathBuf::from).or_else(|| {
            l.strip_prefix("partial report in ").map(|d| Path::new(d).join("report.json"))
        }))
        .map(|p| ReportDoc::read(&p).unwrap());
    (o.status.code().unwrap(), report)
}

const SMALL: &str = "[grid]\npoints = 17\n[verify.tolerances]\ndecay = 5.0\n";

#[test]
fn background_passes_in_three_and_four_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    for (text, r) in [("[grid]\npoints = 17\n", 6.0), ("n = 4\n[grid]\npoints = 13\n", 12.0)] {
        let cfg = write_config(dir.path(), "bg.toml", text);
        let (code, report) = run("background", &cfg, dir.path(), &[]);
        assert_eq!(code, 0);
        let report = report.unwrap();
        let v = report.verification.as_ref().unwrap();
        assert!(v.pass);
        for name in ["constant_scalar", "einstein", "d_rho_interior", "d_rho_boundary"] {
            assert!(v.get(name).unwrap().pass, "{name}");
        }
        assert!(report.files["g0"].exists());
        assert_eq!(report.config.n as f64 * (report.config.n as f64 - 1.0), r);
    }
}

#[test]
fn report_has_stable_top_level_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bg.toml", "[grid]\npoints = 9\n");
    let (_, report) = run("background", &cfg, dir.path(), &[]);
    let text = fs::read_to_string(&report.unwrap().files["report"]).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    let mut keys: Vec<_> = value.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["config", "files", "solve", "timestamp", "verification", "version"]);
}

#[test]
fn validation_errors_exit_with_status_three() {
    let dir = tempfile::tempdir().unwrap();
    for (name, text) in [
        ("parity.toml", "[grid]\npoints = 8\n"),
        ("typo.toml", "[grid]\npoints = 9\nr_mx = 0.5\n"),
        ("dim.toml", "n = 2\n"),
        ("tol.toml", "[solver]\nlinear_tol = 0.0\n"),
    ] {
        let cfg = write_config(dir.path(), name, text);
        let (code, _) = run("background", &cfg, dir.path(), &[]);
        assert_eq!(code, 3, "{name}");
    }
    assert_eq!(ahcc(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(ahcc(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_config_is_an_io_error() {
    let o = ahcc(&["solve", "--config", "/nonexistent/ahcc.toml"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn weight_outside_the_range_only_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "s.toml", "[grid]\npoints = 9\n[solver]\ns = 2.5\n");
    let o = ahcc(&["background", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
}

#[test]
fn zero_source_gives_the_trivial_solution() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "z.toml", "[grid]\npoints = 13\n[source]\namplitude = 0.0\n");
    let (code, report) = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let solve = report.unwrap().solve.unwrap();
    assert!(solve.converged);
    assert_eq!(solve.iterations, 0);
    assert_eq!(solve.h_norm, 0.0);
}

#[test]
fn solve_then_verify_reproduces_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "small.toml", SMALL);
    let (code, report) = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let solved = report.unwrap();
    let sr = solved.solve.as_ref().unwrap();
    assert!(sr.converged && sr.wall_time_s.unwrap() > 0.0);
    assert_eq!(sr.residual_history.len(), sr.iterations + 1);
    for name in ["hbar", "xibar", "residual_history", "radial_profile"] {
        assert!(solved.files[name].exists(), "{name}");
    }
    let csv = fs::read_to_string(&solved.files["residual_history"]).unwrap();
    assert_eq!(csv.lines().count(), sr.iterations + 2);

    let state = solved.files["hbar"].parent().unwrap().to_str().unwrap().to_string();
    let (code, again) = run("verify", &cfg, dir.path(), &["--state", &state]);
    assert_eq!(code, 0);
    let a = solved.verification.unwrap().checks;
    let b = again.unwrap().verification.unwrap().checks;
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.name, y.name);
        assert!((x.value - y.value).abs() <= 1e-12 * x.value.abs(), "{}", x.name);
    }

    let other = write_config(dir.path(), "other.toml", &format!("[grid]\npoints = 19\n[verify]\nstate = {state:?}\n"));
    let (code, _) = run("verify", &other, dir.path(), &[]);
    assert_eq!(code, 4);
}

#[test]
fn divergence_exits_with_status_two_and_keeps_the_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "big.toml", "[grid]\npoints = 13\n[source]\namplitude = 10.0\n");
    let (code, report) = run("solve", &cfg, dir.path(), &[]);
    assert_eq!(code, 2);
    let solve = report.unwrap().solve.unwrap();
    assert!(!solve.converged);
    assert!(!solve.residual_history.is_empty());
}

#[test]
fn lincheck_meets_its_tolerances() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "lin.toml", "[lincheck]\ndirections = 2\n");
    let (code, report) = run("lincheck", &cfg, dir.path(), &[]);
    assert_eq!(code, 0);
    let v = report.unwrap().verification.unwrap();
    assert!(v.get("jacobian_vs_formula").unwrap().value <= 1e-3);
    assert!(v.get("manufactured_recovery").unwrap().value <= 1e-8);
}

#[test]
fn reruns_never_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bg.toml", "[grid]\npoints = 9\n");
    let a = run("background", &cfg, dir.path(), &[]).1.unwrap();
    let b = run("background", &cfg, dir.path(), &[]).1.unwrap();
    assert_ne!(a.files["report"], b.files["report"]);
    assert!(a.files["report"].exists() && b.files["report"].exists());
}

#[test]
fn config_defaults_and_relative_state_paths() {
    let cfg = RunConfig::parse("", Path::new("/base")).unwrap();
    assert_eq!(cfg, RunConfig::default());
    assert_eq!(cfg.points(), 33);
    let four = RunConfig::parse("n = 4\n", Path::new("/base")).unwrap();
    assert_eq!(four.points(), 25);
    let rel = RunConfig::parse("[verify]\nstate = \"runs/x\"\n", Path::new("/base")).unwrap();
    assert_eq!(rel.verify.state.unwrap(), Path::new("/base/runs/x"));
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(RunConfig::parse(&text, Path::new("/")).unwrap(), cfg);
}
