//! Reference minimiser for `prox_phi` by brute-force search on the reduced problem.
//!
//! For fixed `p` the flux minimiser is a nonnegative multiple of `P_K w`, so
//! the prox reduces to a convex problem in `(p, s)` with `v = s P_K w / |P_K w|`.

use mfgprox::coupling::{Coupling, CubicCoupling, LogCoupling, QuadraticCoupling};
use mfgprox::energies::{prox_phi, ProxSpec};
use mfgprox::grid::{norm4, project_cone, Flux, ScalarField, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case<'a> {
    m: f64,
    w: Flux,
    gamma: f64,
    q: f64,
    d: f64,
    coupling: &'a dyn Coupling,
}

fn objective(c: &Case, p: f64, s: f64, r: f64) -> f64 {
    let f = c.coupling.value(0, p);
    let kinetic = if s == 0.0 {
        0.0
    } else if p == 0.0 {
        return f64::INFINITY;
    } else {
        s.powf(c.q) / (c.q * p.powf(c.q - 1.0))
    };
    c.gamma * (f + kinetic) + 0.5 * (p - c.m).powi(2) + 0.5 * s * s - s * r
}

/// Golden-section minimum of a convex function on `[lo, hi]`.
fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-13 * (1.0 + hi.abs()) {
        let a = hi - ratio * (hi - lo);
        let b = lo + ratio * (hi - lo);
        if f(a) <= f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// Grid search over `p` with the optimal `s` for each `p`, refined by golden
/// section around the best grid point.
fn brute_force(c: &Case) -> (f64, Flux) {
    let pk = project_cone(&c.w);
    let r = norm4(&pk);
    let p_max = c.d.min(c.m.abs() + 10.0);
    let best_s = |p: f64| if r == 0.0 { 0.0 } else { golden(0.0, r, |s| objective(c, p, s, r)) };
    let reduced = |p: f64| objective(c, p, best_s(p), r);
    let steps = 400;
    let at = |i: usize| p_max * i as f64 / steps as f64;
    let i_best = (0..=steps)
        .min_by(|&a, &b| reduced(at(a)).total_cmp(&reduced(at(b))))
        .unwrap();
    let p = golden(at(i_best.saturating_sub(1)), at((i_best + 1).min(steps)), reduced);
    let s = best_s(p);
    let v = if r > 0.0 { pk.map(|x| x * s / r) } else { [0.0; 4] };
    (p, v)
}

/// One randomized comparison.
pub struct Outcome {
    pub deviation: f64,
    pub description: String,
}

/// Runs `count` seeded cases cycling through `q in {1.5, 2, 3, 10}`,
/// `d in {0.5, inf}` and log (infinite slope at zero), quadratic and cubic
/// couplings.
pub fn compare_cases(count: usize, seed: u64) -> Vec<Outcome> {
    let grid = TorusGrid::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for case in 0..count {
        let q = [1.5, 2.0, 3.0, 10.0][case % 4];
        let d = if case % 8 < 4 { 0.5 } else { f64::INFINITY };
        let level = rng.gen_range(-1.0..1.0);
        let potential = ScalarField::constant(grid, level);
        let log = LogCoupling::with_potential(&potential);
        let quad = QuadraticCoupling::new(&ScalarField::constant(grid, rng.gen_range(0.0..1.5)), 1.0).unwrap();
        let cubic = CubicCoupling::with_potential(&potential);
        let coupling: &dyn Coupling = match (case / 8) % 3 {
            0 => &log,
            1 => &quad,
            _ => &cubic,
        };
        let c = Case {
            m: rng.gen_range(-2.0..3.0),
            w: std::array::from_fn(|_| rng.gen_range(-2.0..2.0)),
            gamma: if case % 3 == 0 { 1.0 } else { 0.1 },
            q,
            d,
            coupling,
        };
        let spec = ProxSpec::new(q, c.gamma, d, coupling, 0).unwrap();
        let (p, v) = prox_phi(c.m, &c.w, &spec).unwrap();
        let (bp, bv) = brute_force(&c);
        let deviation = (p - bp).abs().max((0..4).map(|i| (v[i] - bv[i]).abs()).fold(0.0, f64::max));
        let r = norm4(&project_cone(&c.w));
        let description = format!(
            "case {case}: q = {q}, d = {d}, coupling = {}, m = {}, w = {:?}, gamma = {}: prox ({p}, {v:?}) vs brute force ({bp}, {bv:?}), objective {} vs {}",
            coupling.name(),
            c.m,
            c.w,
            c.gamma,
            objective(&c, p, norm4(&v), r),
            objective(&c, bp, norm4(&bv), r)
        );
        out.push(Outcome { deviation, description });
    }
    out
}
