use std::path::Path;
use std::process::{Command, Output};

fn quasiboot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasiboot"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn coverage_prints_csv_and_honours_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 10\np = 2\nreps = 5000\nboot = 40\nlevels = [0.9, 0.5]\n");
    let out = quasiboot(&["coverage", "--config", &cfg, "--reps", "25", "--seed", "9"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "kind,n,p,x_dist,scheme,level,frequency,mc_se,R,B,seed");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("coverage,10,2,chisq1c,gauss,0.9,"));
    assert!(lines[1].ends_with(",25,40,9"));
}

#[test]
fn cdf_writes_data_and_summary_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", "n = 10\np = 3\nsamples = 200\nx_dist = chisq1c\n");
    let csv = dir.path().join("fig.csv");
    let out = quasiboot(&["cdf", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 201);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fig.json")).unwrap()).unwrap();
    assert_eq!(summary["reference"]["law"], "chi-squared");
    assert_eq!(summary["samples"], 200);
}

#[test]
fn weights_check_and_moment_fit_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "w.cfg", "scheme = bernmix(b=0.276)\n");
    let out = quasiboot(&["weights-check", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["third_ok"], true);

    let cfg = write(dir.path(), "m.cfg", "x_dist = lognormal(sigma=1, std)\n");
    let out = quasiboot(&["moment-fit", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("pareto_var_z = 0.0458"));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "u.cfg", "n = 10\ncolour = red\n");
    assert_eq!(quasiboot(&["coverage", "--config", &unknown]).status.code(), Some(2));
    let wrong_kind = write(dir.path(), "k.cfg", "kind = cdf\n");
    assert_eq!(quasiboot(&["coverage", "--config", &wrong_kind]).status.code(), Some(2));
    let missing = dir.path().join("absent.cfg");
    assert_eq!(
        quasiboot(&["coverage", "--config", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn budget_overrun_exits_with_3_unless_forced() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "b.cfg", "n = 10\np = 2\nreps = 4\nboot = 10\nmax_work = 100\n");
    let out = quasiboot(&["coverage", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().contains("--force"));
    assert_eq!(quasiboot(&["coverage", "--config", &cfg, "--force"]).status.code(), Some(0));
}
