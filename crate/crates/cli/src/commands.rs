use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use mfgprox::coupling::QuadraticCoupling;
use mfgprox::diagnostics::{
    dual_objective, duality_gap, exact_log_benchmark, fit_rate, kkt_residuals, l2_error, Certificate,
};
use mfgprox::energies::primal_objective;
use mfgprox::experiments::{make_test_problem, Experiment, GAUSSIAN_WIDTH};
use mfgprox::io::{load_gf1, save_flux, save_scalar, write_history_csv, Summary};
use mfgprox::problem::Problem;
use mfgprox::saddle::{estimate_norm, NormTarget};
use mfgprox::solvers::{
    check_steps, default_steps, resolve_steps, solve as run_solver, xi_norm, AlgorithmRegistry, SolveReport, SolverConfig,
    Splitting, ALGORITHMS,
};
use rayon::prelude::*;

use crate::config::{BoundSpec, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
/// Solve hit `max_iter`, a bench row failed, or a certificate check failed.
pub const EXIT_INCOMPLETE: u8 = 2;

const ARTIFACTS: [&str; 5] = ["config.ini", "summary.txt", "m.gf1", "w.gf1", "u.gf1"];
/// Slack on the density bound when counting violations and plateau nodes.
const BOUND_SLACK: f64 = 1e-6;

fn fail(msg: impl std::fmt::Display) -> u8 {
    eprintln!("error: {msg}");
    EXIT_ERROR
}

/// L2 distance to the known solution, when the benchmark has one.
fn reference_error(test: Option<u32>, nu: f64, report: &SolveReport) -> Option<(f64, Option<f64>)> {
    let grid = report.m.grid();
    match test {
        Some(1) if nu == 0.0 => {
            let (m, _, lambda) = exact_log_benchmark(grid);
            Some((l2_error(&report.m, &m).ok()?, Some(lambda)))
        }
        Some(2) if nu == 0.0 => {
            let m = QuadraticCoupling::gaussian_reference(grid, GAUSSIAN_WIDTH);
            Some((l2_error(&report.m, &m).ok()?, None))
        }
        _ => None,
    }
}

fn run_summary(cfg: &RunConfig, report: &SolveReport) -> Summary {
    let p = &cfg.problem;
    let mut s = Summary::new();
    match p.test {
        Some(t) => s.set("test", t),
        None => s.set("test", "custom"),
    }
    s.set("nu", p.nu);
    s.set("q", p.q);
    if let Some(c) = &p.coupling {
        s.set("coupling", c);
    }
    if p.test == Some(2) {
        s.set("gaussian_width", GAUSSIAN_WIDTH);
    }
    s.set(
        "bound",
        match p.bound {
            BoundSpec::None => "none",
            BoundSpec::Disc { .. } => "disc",
        },
    );
    for (k, v) in Summary::from_report(report).entries() {
        s.set(k, v);
    }
    if let Some((err, lambda)) = reference_error(p.test, p.nu, report) {
        s.set("error_l2", format!("{err:e}"));
        if let Some(l) = lambda {
            s.set("lambda_exact", format!("{l:.16e}"));
        }
    }
    s
}

fn write_outputs(cfg: &RunConfig, report: &SolveReport, dir: &Path) -> mfgprox::Result<()> {
    fs::create_dir_all(dir)?;
    write_history_csv(BufWriter::new(fs::File::create(dir.join("history.csv"))?), &report.history)?;
    run_summary(cfg, report).save(&dir.join("summary.txt"))?;
    fs::write(dir.join("config.ini"), cfg.to_ini())?;
    if cfg.output.dump_fields {
        save_scalar(&dir.join("m.gf1"), &report.m)?;
        save_flux(&dir.join("w.gf1"), &report.w)?;
        save_scalar(&dir.join("u.gf1"), &report.u)?;
    }
    Ok(())
}

pub fn solve(path: &Path, out: Option<PathBuf>, dry_run: bool) -> u8 {
    let mut cfg = match RunConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let problem = match cfg.build_problem() {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    let algorithm = match AlgorithmRegistry::with_builtins().get(&cfg.solver.algorithm) {
        Ok(a) => a,
        Err(e) => return fail(e),
    };
    if let Err(e) = algorithm.check_problem(&problem) {
        return fail(e);
    }
    let solver_cfg = cfg.solver_config();

    if dry_run {
        let norm = xi_norm(algorithm.as_ref(), &problem, solver_cfg.seed);
        let steps = resolve_steps(algorithm.as_ref(), &solver_cfg, norm);
        let within = check_steps(algorithm.family(), steps.gamma, steps.tau, norm);
        print!("{}", cfg.to_ini());
        println!("\n[resolved]");
        println!("xi_norm = {norm:.10e}");
        println!("gamma = {:.10e}", steps.gamma);
        println!("tau = {:.10e}", steps.tau);
        println!("theta = {}", steps.theta);
        println!("tol = {:.10e}", solver_cfg.tol.unwrap_or_else(|| problem.default_tol()));
        match within {
            Ok(()) => println!("steps_within_bound = true"),
            Err(reason) => println!("steps_within_bound = false ; {reason}"),
        }
        return EXIT_OK;
    }

    let report = match run_solver(&problem, algorithm.as_ref(), &solver_cfg) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = write_outputs(&cfg, &report, &cfg.output.dir) {
        return fail(e);
    }
    let s = run_summary(&cfg, &report);
    for (k, v) in s.entries() {
        println!("{k}={v}");
    }
    println!("wall_time_s={:.3}", report.wall_time.as_secs_f64());
    if report.converged {
        EXIT_OK
    } else {
        eprintln!("warning: no convergence within {} iterations", report.iterations);
        EXIT_INCOMPLETE
    }
}

pub fn check(dir: &Path) -> u8 {
    let missing: Vec<&str> = ARTIFACTS.iter().copied().filter(|f| !dir.join(f).is_file()).collect();
    if !missing.is_empty() {
        return fail(format!("missing artifacts in {}: {}", dir.display(), missing.join(", ")));
    }
    match certify_dir(dir) {
        Ok(cert) => {
            let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
            let k = cert.kkt;
            for (name, value) in [
                ("res_hjb", k.res_hjb),
                ("res_fp", k.res_fp),
                ("res_mass", k.res_mass),
                ("res_compl", k.res_compl),
            ] {
                println!(
                    "{name:<10} {value:.3e} <= {:.3e}  {}",
                    cert.kkt_threshold,
                    verdict(value <= cert.kkt_threshold)
                );
            }
            match cert.gap {
                Some(g) => println!(
                    "{:<10} {:.3e} <= {:.3e}  {}",
                    "gap",
                    g.abs(),
                    cert.gap_threshold,
                    verdict(cert.gap_ok())
                ),
                None => println!("{:<10} n/a (coupling has no conjugate)", "gap"),
            }
            println!("check: {}", verdict(cert.passes()));
            if cert.passes() {
                EXIT_OK
            } else {
                EXIT_INCOMPLETE
            }
        }
        Err(e) => fail(e),
    }
}

fn certify_dir(dir: &Path) -> Result<Certificate, String> {
    let cfg = RunConfig::load(&dir.join("config.ini")).map_err(|e| e.to_string())?;
    let problem = cfg.build_problem().map_err(|e| e.to_string())?;
    let summary = Summary::load(&dir.join("summary.txt")).map_err(|e| e.to_string())?;
    let lambda = summary.get_f64("lambda").map_err(|e| e.to_string())?;
    let tol = summary.get_f64("tol").map_err(|e| e.to_string())?;
    let load = |name: &str| load_gf1(&dir.join(name)).map_err(|e| format!("{name}: {e}"));
    let m = load("m.gf1")?.into_scalar().map_err(|e| e.to_string())?;
    let w = load("w.gf1")?.into_flux().map_err(|e| e.to_string())?;
    let u = load("u.gf1")?.into_scalar().map_err(|e| e.to_string())?;
    if m.grid() != problem.grid() {
        return Err(format!(
            "m.gf1 has {} nodes but the config describes {}",
            m.grid().len(),
            problem.grid().len()
        ));
    }
    certify(&problem, &m, &w, &u, lambda, tol).map_err(|e| e.to_string())
}

fn certify(
    problem: &Problem,
    m: &mfgprox::grid::ScalarField,
    w: &mfgprox::grid::FluxField,
    u: &mfgprox::grid::ScalarField,
    lambda: f64,
    tol: f64,
) -> mfgprox::Result<Certificate> {
    let kkt = kkt_residuals(m, u, lambda, problem)?;
    let primal = primal_objective(m, w, problem);
    let gap = if problem.coupling().has_conjugate() {
        Some(duality_gap(primal, dual_objective(u, lambda, None, problem)?))
    } else {
        None
    };
    Ok(Certificate::new(kkt, gap, tol))
}

pub fn norms(nh: usize, nu: f64, q: f64) -> u8 {
    let grid = match mfgprox::grid::TorusGrid::new(nh) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    if !(nu >= 0.0) {
        return fail(format!("nu must be nonnegative, got {nu}"));
    }
    let seed = SolverConfig::default().seed;
    let g_norm = estimate_norm(NormTarget::Constraint, grid, nu, seed);
    println!("N = {nh}, h = {:.6e}, nu = {nu}, q = {q}", grid.h());
    println!("|A|  = {:.10e}", estimate_norm(NormTarget::Diffusion, grid, nu, seed));
    println!("|B|  = {:.10e}", estimate_norm(NormTarget::Divergence, grid, nu, seed));
    println!("|G|  = {g_norm:.10e}");
    println!("{:<8} {:>14} {:>14} {:>14}", "algo", "|Xi|", "gamma", "tau");
    let registry = AlgorithmRegistry::with_builtins();
    for name in ALGORITHMS {
        let a = registry.get(name).expect("builtin");
        let norm = match a.splitting() {
            Splitting::Constraint => g_norm,
            _ => 1.0,
        };
        let (gamma, tau) = default_steps(a.family(), norm);
        let note = if name == "admm" && q != 2.0 { "  (requires q = 2)" } else { "" };
        println!("{name:<8} {norm:>14.6e} {gamma:>14.6e} {tau:>14.6e}{note}");
    }
    EXIT_OK
}

struct Cell {
    algorithm: String,
    exp: Experiment,
}

struct Outcome {
    report: mfgprox::Result<SolveReport>,
    cert: Option<Certificate>,
}

impl Outcome {
    fn status(&self) -> String {
        match &self.report {
            Err(e) => format!("FAILED: {}", e.to_string().replace(',', ";")),
            Ok(r) if !r.converged => "FAILED: max_iter".into(),
            Ok(_) => match self.cert {
                Some(c) if !c.passes() => "converged; certificate FAIL".into(),
                _ => "ok".into(),
            },
        }
    }

    fn ok(&self) -> bool {
        matches!(&self.report, Ok(r) if r.converged)
    }
}

fn run_cell(cell: &Cell) -> Outcome {
    let report = make_test_problem(&cell.exp).and_then(|p| {
        let registry = AlgorithmRegistry::with_builtins();
        let a = registry.get(&cell.algorithm)?;
        let mut cfg = SolverConfig::default();
        cfg.record_every = usize::MAX;
        run_solver(&p, a.as_ref(), &cfg).map(|r| (p, r))
    });
    match report {
        Ok((p, r)) => {
            let cert = certify(&p, &r.m, &r.w, &r.u, r.lambda, r.tol).ok();
            Outcome { report: Ok(r), cert }
        }
        Err(e) => Outcome { report: Err(e), cert: None },
    }
}

fn fmt_opt(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(String::new, |v| format!("{v:.digits$e}"))
}

fn emit(out: &Path, name: &str, csv: &str) -> std::io::Result<()> {
    println!("# {name}");
    print!("{csv}");
    println!();
    fs::create_dir_all(out)?;
    fs::write(out.join(name), csv)
}

pub fn bench(test: u32, algos: Option<Vec<String>>, sizes: Option<Vec<usize>>, out: &Path) -> u8 {
    let registry = AlgorithmRegistry::with_builtins();
    let default_algos: Vec<&str> = match test {
        1 => ALGORITHMS.to_vec(),
        2 => vec!["admm", "cp-u"],
        _ => vec!["cp-u"],
    };
    let algos: Vec<String> = algos
        .unwrap_or_else(|| default_algos.iter().map(|s| s.to_string()).collect())
        .into_iter()
        .map(|a| a.trim().to_ascii_lowercase())
        .collect();
    for a in &algos {
        if let Err(e) = registry.get(a) {
            return fail(e);
        }
    }
    let sizes = sizes.unwrap_or_else(|| match test {
        1 | 2 => vec![20, 40, 60],
        _ => vec![50],
    });
    if sizes.is_empty() {
        return fail("no grid sizes given");
    }
    let result = match test {
        1 => bench_rates(&algos, &sizes, out),
        2 => bench_quadratic(&algos, &sizes, out),
        3 => bench_viscosity(&algos, &sizes, out),
        _ => bench_exponent(&algos, &sizes, out),
    };
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_INCOMPLETE,
        Err(e) => fail(e),
    }
}

fn run_all(cells: &[Cell]) -> Vec<Outcome> {
    cells.par_iter().map(run_cell).collect()
}

fn bench_rates(algos: &[String], sizes: &[usize], out: &Path) -> std::io::Result<bool> {
    let cells: Vec<Cell> = algos
        .iter()
        .flat_map(|a| {
            sizes.iter().map(|&n| Cell {
                algorithm: a.clone(),
                exp: Experiment::standard(1, n),
            })
        })
        .collect();
    let outcomes = run_all(&cells);
    let mut csv = String::from("algorithm,n,h,iterations,converged,error_l2,lambda,status\n");
    let mut slopes = String::from("algorithm,slope\n");
    for a in algos {
        let mut points = Vec::new();
        for (cell, o) in cells.iter().zip(&outcomes).filter(|(c, _)| &c.algorithm == a) {
            let n = cell.exp.n;
            let h = 1.0 / n as f64;
            let (iters, conv, err, lambda) = match &o.report {
                Ok(r) => (
                    r.iterations.to_string(),
                    r.converged.to_string(),
                    reference_error(Some(1), 0.0, r).map(|e| e.0),
                    Some(r.lambda),
                ),
                Err(_) => (String::new(), String::new(), None, None),
            };
            if let (true, Some(e)) = (o.ok(), err) {
                points.push((h, e));
            }
            let _ = writeln!(
                csv,
                "{a},{n},{h:.6e},{iters},{conv},{},{},{}",
                fmt_opt(err, 6),
                fmt_opt(lambda, 8),
                o.status()
            );
        }
        let slope = fit_rate(&points).ok();
        let _ = writeln!(slopes, "{a},{}", slope.map_or("n/a".into(), |s| format!("{s:.4}")));
    }
    emit(out, "test1_rates.csv", &csv)?;
    emit(out, "test1_slopes.csv", &slopes)?;
    Ok(outcomes.iter().all(Outcome::ok))
}

fn bench_quadratic(algos: &[String], sizes: &[usize], out: &Path) -> std::io::Result<bool> {
    let finest = *sizes.iter().max().expect("nonempty");
    let mut cells: Vec<Cell> = Vec::new();
    for a in algos {
        for &n in sizes {
            cells.push(Cell {
                algorithm: a.clone(),
                exp: Experiment::standard(2, n),
            });
        }
    }
    let split = cells.len();
    for a in algos {
        for nu in [1.0, 0.1, 0.01, 0.001, 0.0] {
            cells.push(Cell {
                algorithm: a.clone(),
                exp: Experiment::standard(2, finest).with_nu(nu),
            });
        }
    }
    let outcomes = run_all(&cells);
    let row = |cell: &Cell, o: &Outcome| {
        let (iters, conv, err) = match &o.report {
            Ok(r) => (
                r.iterations.to_string(),
                r.converged.to_string(),
                reference_error(Some(2), cell.exp.nu, r).map(|e| e.0),
            ),
            Err(_) => (String::new(), String::new(), None),
        };
        format!(
            "{},{},{},{iters},{conv},{},{}",
            cell.algorithm,
            cell.exp.n,
            cell.exp.nu,
            fmt_opt(err, 6),
            o.status()
        )
    };
    let header = "algorithm,n,nu,iterations,converged,error_l2,status\n";
    let mut sizes_csv = String::from(header);
    let mut nu_csv = String::from(header);
    for (i, (cell, o)) in cells.iter().zip(&outcomes).enumerate() {
        let target = if i < split { &mut sizes_csv } else { &mut nu_csv };
        let _ = writeln!(target, "{}", row(cell, o));
    }
    emit(out, "test2_sizes.csv", &sizes_csv)?;
    emit(out, "test2_viscosity.csv", &nu_csv)?;
    Ok(outcomes.iter().all(Outcome::ok))
}

fn bench_viscosity(algos: &[String], sizes: &[usize], out: &Path) -> std::io::Result<bool> {
    let mut cells = Vec::new();
    for a in algos {
        for &n in sizes {
            for constrained in [false, true] {
                for nu in [1.0, 0.1, 0.01, 0.001] {
                    cells.push(Cell {
                        algorithm: a.clone(),
                        exp: Experiment::standard(3, n).with_nu(nu).constrained(constrained),
                    });
                }
            }
        }
    }
    let outcomes = run_all(&cells);
    let mut csv = String::from(
        "algorithm,n,nu,bound,iterations,converged,lambda,ergodic,min_m,max_m,max_violation,active_nodes,status\n",
    );
    for (cell, o) in cells.iter().zip(&outcomes) {
        let e = &cell.exp;
        let bound = if e.constrained { "disc" } else { "none" };
        let stats = match &o.report {
            Ok(r) => {
                let (viol, active) = if e.constrained {
                    let d = mfgprox::experiments::disc_bound(r.m.grid());
                    let viol = (0..d.grid().len()).map(|k| r.m[k] - d[k]).fold(f64::NEG_INFINITY, f64::max);
                    let active = (0..d.grid().len()).filter(|&k| r.m[k] >= d[k] - BOUND_SLACK).count();
                    (format!("{viol:.3e}"), active.to_string())
                } else {
                    (String::new(), String::new())
                };
                format!(
                    "{},{},{:.6},{:.6},{:.6},{:.6},{viol},{active}",
                    r.iterations,
                    r.converged,
                    r.lambda,
                    -r.lambda,
                    r.m.min(),
                    r.m.max()
                )
            }
            Err(_) => ",,,,,,,".into(),
        };
        let _ = writeln!(csv, "{},{},{},{bound},{stats},{}", cell.algorithm, e.n, e.nu, o.status());
    }
    emit(out, "test3_lambda.csv", &csv)?;
    Ok(outcomes.iter().all(Outcome::ok))
}

fn bench_exponent(algos: &[String], sizes: &[usize], out: &Path) -> std::io::Result<bool> {
    let mut cells = Vec::new();
    for a in algos {
        for &n in sizes {
            for q in [1.2, 2.0, 3.0, 10.0] {
                cells.push(Cell {
                    algorithm: a.clone(),
                    exp: Experiment::standard(4, n).with_q(q),
                });
            }
        }
    }
    let outcomes = run_all(&cells);
    let mut csv = String::from("algorithm,n,q,iterations,converged,min_m,max_m,lambda,status\n");
    for (cell, o) in cells.iter().zip(&outcomes) {
        let stats = match &o.report {
            Ok(r) => format!(
                "{},{},{:.6},{:.6},{:.6}",
                r.iterations,
                r.converged,
                r.m.min(),
                r.m.max(),
                r.lambda
            ),
            Err(_) => ",,,,".into(),
        };
        let _ = writeln!(csv, "{},{},{},{stats},{}", cell.algorithm, cell.exp.n, cell.exp.q, o.status());
    }
    emit(out, "test4_extremal.csv", &csv)?;
    Ok(outcomes.iter().all(Outcome::ok))
}
