use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mfgprox::io::Summary;

fn mfgprox(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfgprox"))
        .args(args)
        .current_dir(cwd)
        .env("MFGPROX_THREADS", "0")
        .output()
        .expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TEST1: &str = "[problem]\ntest = 1\nn = 20\n[solver]\nalgorithm = cp-u\n[output]\ndir = run\n";

fn solved_dir() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.ini"), TEST1).unwrap();
    let out = mfgprox(&["solve", "--config", "run.ini"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    tmp
}

#[test]
fn solve_writes_artifacts_and_summary() {
    let tmp = solved_dir();
    let run = tmp.path().join("run");
    for f in ["history.csv", "summary.txt", "config.ini", "m.gf1", "w.gf1", "u.gf1"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let s = Summary::load(&run.join("summary.txt")).unwrap();
    assert_eq!(s.get("converged"), Some("true"));
    assert_eq!(s.get("test"), Some("1"));
    // closed form: 2 log I0(1)
    assert!((s.get_f64("lambda").unwrap() - 0.4718287).abs() < 1e-3);
    assert!(s.get_f64("error_l2").unwrap() < 1e-4);
    let history = fs::read_to_string(run.join("history.csv")).unwrap();
    assert!(history.starts_with("iter,primal_change,res_hjb,res_fp,res_mass,res_compl,gap,lambda\n"));
    assert_eq!(history.lines().count(), 1 + s.get_f64("iterations").unwrap() as usize);
}

#[test]
fn missing_algorithm_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.ini"), "[problem]\ntest = 1\nn = 20\n[solver]\ngamma = 0.5\n").unwrap();
    let out = mfgprox(&["solve", "--config", "bad.ini"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("solver.algorithm"), "{}", stderr(&out));

    fs::write(tmp.path().join("typo.ini"), format!("{TEST1}histroy_every = 2\n")).unwrap();
    let out = mfgprox(&["solve", "--config", "typo.ini"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("output.histroy_every"), "{}", stderr(&out));

    let out = mfgprox(&["solve", "--config", "absent.ini"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dry_run_reports_steps_without_solving() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("sp.ini"),
        "[problem]\ntest = 1\nn = 20\n[solver]\nalgorithm = cp-sp\n[output]\ndir = run\n",
    )
    .unwrap();
    let out = mfgprox(&["solve", "--config", "sp.ini", "--dry-run"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("algorithm = cp-sp"));
    let norm: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("xi_norm = "))
        .expect("norm line")
        .parse()
        .unwrap();
    let gamma: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("gamma = "))
        .filter(|v| v.contains('e'))
        .expect("gamma line")
        .parse()
        .unwrap();
    assert!(norm > 1.0);
    assert!((gamma * norm - 0.95).abs() < 1e-8);
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn max_iter_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("short.ini"), format!("{TEST1}").replace("cp-u\n", "cp-u\nmax_iter = 3\n")).unwrap();
    let out = mfgprox(&["solve", "--config", "short.ini"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    let s = Summary::load(&tmp.path().join("run/summary.txt")).unwrap();
    assert_eq!(s.get("converged"), Some("false"));
    assert_eq!(s.get("iterations"), Some("3"));
}

#[test]
fn check_passes_fresh_output_and_catches_corruption() {
    let tmp = solved_dir();
    let run = tmp.path().join("run");
    let out = mfgprox(&["check", "--dir", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(stdout(&out).contains("check: pass"));

    let text = fs::read_to_string(run.join("m.gf1")).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut values: Vec<f64> = lines[1].split_whitespace().map(|v| v.parse().unwrap()).collect();
    values[3] *= 1.1;
    lines[1] = values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ");
    fs::write(run.join("m.gf1"), lines.join("\n") + "\n").unwrap();
    let out = mfgprox(&["check", "--dir", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("check: FAIL"));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn check_lists_missing_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfgprox(&["check", "--dir", "."], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    for f in ["config.ini", "summary.txt", "m.gf1", "w.gf1", "u.gf1"] {
        assert!(err.contains(f), "{err}");
    }
}

#[test]
fn identical_configs_give_identical_outputs() {
    let a = solved_dir();
    let b = solved_dir();
    for f in ["summary.txt", "history.csv", "m.gf1", "w.gf1", "u.gf1"] {
        let x = fs::read(a.path().join("run").join(f)).unwrap();
        let y = fs::read(b.path().join("run").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn out_flag_overrides_directory() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.ini"), TEST1).unwrap();
    let out = mfgprox(&["solve", "--config", "run.ini", "--out", "elsewhere"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(tmp.path().join("elsewhere/summary.txt").is_file());
    assert!(!tmp.path().join("run").exists());
}

#[test]
fn bench_rates_has_one_row_per_algorithm_and_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfgprox(&["bench", "--test", "1", "--sizes", "8,10,12", "--out", "b"], tmp.path());
    assert!(out.status.code() == Some(0) || out.status.code() == Some(2), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("b/test1_rates.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 7 * 3);
    for algo in ["admm", "pcpm-u", "cp-u", "ms-u", "cp-sp", "ms-sp", "pcpm-sp"] {
        assert_eq!(rows.iter().filter(|r| r.starts_with(&format!("{algo},"))).count(), 3);
    }
    let slopes = fs::read_to_string(tmp.path().join("b/test1_slopes.csv")).unwrap();
    assert_eq!(slopes.lines().count(), 8);
}

#[test]
fn bench_marks_failed_rows_and_continues() {
    let tmp = tempfile::tempdir().unwrap();
    // admm refuses q != 2, cp-u solves every row
    let out = mfgprox(
        &["bench", "--test", "4", "--sizes", "10", "--algos", "admm,cp-u", "--out", "b"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(tmp.path().join("b/test4_extremal.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 8);
    let admm_failed = rows.iter().filter(|r| r.starts_with("admm,") && r.contains("FAILED")).count();
    assert_eq!(admm_failed, 3);
    assert!(rows.iter().filter(|r| r.starts_with("cp-u,")).all(|r| !r.contains("FAILED")), "{csv}");
}

#[test]
fn bench_rejects_unknown_test_and_algorithm() {
    let tmp = tempfile::tempdir().unwrap();
    assert_ne!(mfgprox(&["bench", "--test", "5"], tmp.path()).status.code(), Some(0));
    let out = mfgprox(&["bench", "--test", "1", "--algos", "newton"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("newton"));
}

#[test]
fn norms_lists_every_algorithm() {
    let tmp = tempfile::tempdir().unwrap();
    let out = mfgprox(&["norms", "--nh", "16", "--nu", "0.5", "--q", "3"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for algo in ["admm", "pcpm-u", "cp-u", "ms-u", "cp-sp", "ms-sp", "pcpm-sp"] {
        assert!(text.lines().any(|l| l.starts_with(algo)), "{algo}: {text}");
    }
    assert!(text.contains("requires q = 2"));
}
