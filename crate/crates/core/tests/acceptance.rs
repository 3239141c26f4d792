//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so every line is shown.

mod common;

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use common::dense::dense_norms;
use common::prox_oracle::compare_cases;
use mfgprox::diagnostics::Certificate;
use mfgprox::experiments::{make_test_problem, Experiment};
use mfgprox::grid::{apply_a, apply_b, apply_bstar, FluxField, ScalarField, TorusGrid};
use mfgprox::saddle::{estimate_norm, NormTarget};
use mfgprox::solvers::{solve_by_name, SolveReport, SolverConfig, ALGORITHMS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------- oracles

/// `I0(1) = sum_k (1/4)^k / (k!)^2`.
fn bessel_i0_at_one() -> f64 {
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..40 {
        term *= 0.25 / (k * k) as f64;
        sum += term;
    }
    sum
}

/// `m = exp(sin 2 pi x + sin 2 pi y) / I0(1)^2` at the nodes.
fn log_benchmark_density(n: usize) -> Vec<f64> {
    let i0 = bessel_i0_at_one();
    let h = 1.0 / n as f64;
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            m[i + n * j] = ((2.0 * PI * x).sin() + (2.0 * PI * y).sin()).exp() / (i0 * i0);
        }
    }
    m
}

/// Gaussian of width 0.1 at the centre, scaled to `h^2 sum = 1`.
fn gaussian_density(n: usize) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let mut m = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            let (x, y) = (i as f64 * h - 0.5, j as f64 * h - 0.5);
            m[i + n * j] = (-(x * x + y * y) / 0.02).exp();
        }
    }
    let mass: f64 = h * h * m.iter().sum::<f64>();
    m.iter().map(|v| v / mass).collect()
}

/// `sqrt(h^2 sum (a - b)^2)`.
fn l2(a: &[f64], b: &[f64]) -> f64 {
    let n = (a.len() as f64).sqrt();
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt() / n
}

/// Least-squares slope of `log e` against `log h`.
fn slope(points: &[(f64, f64)]) -> f64 {
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

// ------------------------------------------------------------ shared runs

type Key = (u32, usize, u64, u64, bool, &'static str);

struct Run {
    exp: Experiment,
    algo: &'static str,
    report: SolveReport,
}

static RUNS: OnceLock<Mutex<HashMap<Key, Arc<OnceLock<Arc<Run>>>>>> = OnceLock::new();

fn run(exp: Experiment, algo: &'static str) -> Arc<Run> {
    let key = (exp.id, exp.n, exp.nu.to_bits(), exp.q.to_bits(), exp.constrained, algo);
    let slot = RUNS
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(key)
        .or_default()
        .clone();
    slot.get_or_init(|| {
        let problem = make_test_problem(&exp).expect("benchmark problem");
        let cfg = SolverConfig {
            record_every: usize::MAX,
            ..SolverConfig::default()
        };
        let report = solve_by_name(&problem, algo, &cfg).unwrap_or_else(|e| panic!("{algo} on {exp:?}: {e}"));
        Arc::new(Run { exp, algo, report })
    })
    .clone()
}

fn test1(n: usize) -> Experiment {
    Experiment::standard(1, n)
}

fn test3(nu: f64, constrained: bool) -> Experiment {
    Experiment::standard(3, 50).with_nu(nu).constrained(constrained)
}

fn test4(q: f64) -> Experiment {
    Experiment::standard(4, 50).with_q(q)
}

const TEST1_SIZES: [usize; 3] = [20, 40, 60];
const TEST3_TABLE: [(f64, f64); 4] = [(1.0, 0.9786), (0.1, 1.100), (0.01, 1.1874), (0.001, 1.1922)];
const TEST4_TABLE: [(f64, f64, f64); 4] = [
    (1.2, 0.9989, 1.0012),
    (2.0, 0.9072, 1.0737),
    (3.0, 0.7348, 1.2365),
    (10.0, 0.5628, 1.3905),
];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

// -------------------------------------------------------------- criteria

fn c1_rate() -> Verdict {
    let exact: Vec<Vec<f64>> = TEST1_SIZES.iter().map(|&n| log_benchmark_density(n)).collect();
    let mut parts = Vec::new();
    let mut pass = true;
    for algo in ["cp-u", "cp-sp"] {
        let mut points = Vec::new();
        let mut errs = Vec::new();
        for (k, &n) in TEST1_SIZES.iter().enumerate() {
            let r = run(test1(n), algo);
            let e = l2(r.report.m.values(), &exact[k]);
            pass &= r.report.converged && secs(r.report.wall_time) <= 120.0;
            points.push((1.0 / n as f64, e));
            errs.push(format!("{e:.2e}"));
        }
        let s = slope(&points);
        pass &= (0.8..=1.2).contains(&s);
        parts.push(format!("{algo} errors [{}] slope {s:.3}", errs.join(", ")));
    }
    verdict(pass, format!("{} (band [0.8, 1.2])", parts.join("; ")))
}

fn c2_lambda() -> Verdict {
    let exact = 2.0 * bessel_i0_at_one().ln();
    let r = run(test1(60), "cp-u");
    let diff = (r.report.lambda - exact).abs();
    verdict(
        r.report.converged && diff <= 1e-2,
        format!("lambda {:.6} vs 2 ln I0(1) = {exact:.6}, |diff| {diff:.1e} (tol 1e-2)", r.report.lambda),
    )
}

fn c3_quadratic() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for algo in ["cp-u", "admm"] {
        for n in [20, 40] {
            let r = run(Experiment::standard(2, n), algo);
            let e = l2(r.report.m.values(), &gaussian_density(n));
            let t = secs(r.report.wall_time);
            pass &= r.report.converged && e <= 5e-4 && r.report.iterations <= 60 && t <= 60.0;
            parts.push(format!("{algo} N={n}: err {e:.2e}, {} it, {t:.1}s", r.report.iterations));
        }
    }
    verdict(pass, format!("{} (err <= 5e-4, it <= 60, <= 60 s)", parts.join("; ")))
}

fn c4_ergodic_table() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (nu, table) in TEST3_TABLE {
        let r = run(test3(nu, false), "cp-u");
        // the tabulated constant is the ergodic value, -lambda here
        let ergodic = -r.report.lambda;
        let ok = r.report.converged && (ergodic - table).abs() <= 0.02;
        pass &= ok;
        parts.push(format!(
            "nu={nu}: {ergodic:.4} vs {table} {}",
            if ok { "ok" } else { "MISS" }
        ));
    }
    verdict(pass, format!("{} (+-0.02)", parts.join("; ")))
}

fn c5_constrained() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (nu, _) in TEST3_TABLE {
        let free = run(test3(nu, false), "cp-u");
        let bounded = run(test3(nu, true), "cp-u");
        let grid = bounded.report.m.grid();
        let d = |k: usize| {
            let (x, y) = grid.position(k);
            let (dx, dy) = (x.min(1.0 - x), y.min(1.0 - y));
            if dx * dx + dy * dy <= 0.0625 {
                1.0
            } else {
                1.3
            }
        };
        let m = &bounded.report.m;
        let violation = (0..grid.len()).map(|k| m[k] - d(k)).fold(f64::NEG_INFINITY, f64::max);
        let active = (0..grid.len()).filter(|&k| m[k] >= d(k) - 1e-6).count();
        let ratio = bounded.report.iterations as f64 / free.report.iterations as f64;
        let ok = bounded.report.converged && violation <= 1e-6 && active > 0 && ratio <= 5.0;
        pass &= ok;
        parts.push(format!(
            "nu={nu}: max(m-d) {violation:.1e}, {active} active, {} vs {} it (x{ratio:.1}) {}",
            bounded.report.iterations,
            free.report.iterations,
            if ok { "ok" } else { "MISS" }
        ));
    }
    verdict(pass, format!("{} (m <= d + 1e-6, plateau, <= 5x)", parts.join("; ")))
}

fn c6_extremal() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for (q, lo, hi) in TEST4_TABLE {
        let r = run(test4(q), "cp-u");
        let (mn, mx) = (r.report.m.min(), r.report.m.max());
        let ok = r.report.converged && (mn - lo).abs() <= 0.02 && (mx - hi).abs() <= 0.02;
        pass &= ok;
        parts.push(format!(
            "q={q}: ({mn:.4}, {mx:.4}) vs ({lo}, {hi}) {}",
            if ok { "ok" } else { "MISS" }
        ));
    }
    verdict(pass, format!("{} (+-0.02)", parts.join("; ")))
}

fn c7_prox_oracle() -> Verdict {
    let start = Instant::now();
    let outcomes = compare_cases(200, 7);
    let t = secs(start.elapsed());
    let worst = outcomes.iter().map(|o| o.deviation).fold(0.0, f64::max);
    let bad = outcomes.iter().filter(|o| o.deviation > 1e-5).count();
    let mut detail = format!("200 cases, worst deviation {worst:.1e}, {bad} above 1e-5, {t:.1}s");
    if let Some(o) = outcomes.iter().find(|o| o.deviation > 1e-5) {
        detail.push_str(&format!("; first: {}", o.description));
    }
    verdict(bad == 0 && t <= 60.0, detail)
}

fn c8_operators() -> Verdict {
    let mut worst_adj: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for n in [4, 8, 16] {
            let g = TorusGrid::new(n).unwrap();
            let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect() };
            let m = ScalarField::from_vec(g, draw(g.len())).unwrap();
            let y = ScalarField::from_vec(g, draw(g.len())).unwrap();
            let wv = draw(4 * g.len());
            let w = FluxField::from_vec(g, wv.chunks(4).map(|c| [c[0], c[1], c[2], c[3]]).collect()).unwrap();
            let nu = 0.5;
            let b = (apply_b(&w).dot(&y) - w.dot(&apply_bstar(&y))).abs() / (w.norm() * y.norm());
            let a = (apply_a(&m, nu).dot(&y) - m.dot(&apply_a(&y, nu))).abs() / (m.norm() * y.norm());
            worst_adj = worst_adj.max(a).max(b);
            let sa = apply_a(&m, nu).sum().abs() / (1.0 + m.norm());
            let sb = apply_b(&w).sum().abs() / (1.0 + w.norm());
            worst_sum = worst_sum.max(sa).max(sb);
        }
    }
    let g8 = TorusGrid::new(8).unwrap();
    let mut worst_norm: f64 = 0.0;
    for nu in [0.0, 0.1, 1.0] {
        let (exact, _, _) = dense_norms(8, nu);
        let est = estimate_norm(NormTarget::Constraint, g8, nu, 0);
        worst_norm = worst_norm.max((est - exact).abs() / exact);
    }
    verdict(
        worst_adj <= 1e-12 && worst_sum <= 1e-12 && worst_norm <= 0.01,
        format!(
            "adjointness {worst_adj:.1e}, zero-sum {worst_sum:.1e} (<= 1e-12); |G| power vs SVD {:.2e} (<= 1%)",
            worst_norm
        ),
    )
}

fn c9_certificates() -> Verdict {
    let mut runs = Vec::new();
    for algo in ALGORITHMS {
        runs.push(run(test1(20), algo));
    }
    for n in TEST1_SIZES {
        runs.push(run(test1(n), "cp-u"));
        runs.push(run(test1(n), "cp-sp"));
    }
    for algo in ["cp-u", "admm"] {
        for n in [20, 40] {
            runs.push(run(Experiment::standard(2, n), algo));
        }
    }
    for (nu, _) in TEST3_TABLE {
        runs.push(run(test3(nu, false), "cp-u"));
        runs.push(run(test3(nu, true), "cp-u"));
    }
    for (q, _, _) in TEST4_TABLE {
        runs.push(run(test4(q), "cp-u"));
    }
    let mut seen = std::collections::HashSet::new();
    runs.retain(|r| seen.insert(Arc::as_ptr(r)));
    let converged: Vec<&Arc<Run>> = runs.iter().filter(|r| r.report.converged).collect();
    let mut failures = Vec::new();
    for r in &converged {
        let rep = &r.report;
        let cert = Certificate::new(rep.kkt, rep.gap, rep.tol);
        if !cert.passes() {
            failures.push(format!(
                "{} T{} N={} nu={} q={}{}: kkt {:.1e}/{:.1e}, gap {}",
                r.algo,
                r.exp.id,
                r.exp.n,
                r.exp.nu,
                r.exp.q,
                if r.exp.constrained { " bounded" } else { "" },
                rep.kkt.max(),
                cert.kkt_threshold,
                rep.gap.map_or("n/a".into(), |g| format!("{:.1e}/{:.1e}", g.abs(), cert.gap_threshold)),
            ));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{}/{} converged runs certified{}{}",
            converged.len() - failures.len(),
            converged.len(),
            if failures.is_empty() { "" } else { "; failing: " },
            failures.join("; ")
        ),
    )
}

fn c10_agreement() -> Verdict {
    let runs: Vec<Arc<Run>> = ALGORITHMS.iter().map(|a| run(test1(20), a)).collect();
    let mut worst = (0.0, "", "");
    let mut all_converged = true;
    for (i, a) in runs.iter().enumerate() {
        all_converged &= a.report.converged;
        for b in &runs[i + 1..] {
            let d = l2(a.report.m.values(), b.report.m.values());
            if d > worst.0 {
                worst = (d, a.algo, b.algo);
            }
        }
    }
    verdict(
        all_converged && worst.0 <= 1e-3,
        format!("largest pairwise L2 distance {:.2e} ({} vs {}) (<= 1e-3)", worst.0, worst.1, worst.2),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("test 1 convergence rate", c1_rate),
        ("test 1 ergodic constant", c2_lambda),
        ("test 2 exact solution", c3_quadratic),
        ("test 3 lambda table", c4_ergodic_table),
        ("test 3 density bound", c5_constrained),
        ("test 4 extremal masses", c6_extremal),
        ("prox oracle", c7_prox_oracle),
        ("operator identities and norm", c8_operators),
        ("KKT and duality certificates", c9_certificates),
        ("cross-algorithm agreement", c10_agreement),
    ];
    let verdicts: Vec<Verdict> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|(_, f)| s.spawn(f)).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|e| Verdict {
                    pass: false,
                    detail: format!("panicked: {:?}", e.downcast_ref::<String>()),
                })
            })
            .collect()
    });
    println!();
    let mut failed = 0;
    for (i, ((name, _), v)) in criteria.iter().zip(&verdicts).enumerate() {
        println!(
            "acceptance {:>2} {} {name}: {}",
            i + 1,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        failed += usize::from(!v.pass);
    }
    println!("\nacceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
