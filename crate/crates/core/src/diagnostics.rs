//! KKT residuals, dual objective, duality gap and error measures.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{hat_dh, laplacian, norm4, transport, ScalarField, TorusGrid};
use crate::problem::Problem;

/// Residuals of the discrete MFG optimality system, each divided by
/// `1 + |lambda| + max|u|`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    pub res_hjb: f64,
    pub res_fp: f64,
    pub res_mass: f64,
    pub res_compl: f64,
    pub scale: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.res_hjb.max(self.res_fp).max(self.res_mass).max(self.res_compl)
    }
}

/// Relative threshold below which a density counts as zero.
pub const ACTIVE_SET_REL: f64 = 1e-8;

/// `-nu Delta_h u + |hat[D_h u]|^q' / q'` at every node.
pub fn hamiltonian_row(u: &ScalarField, problem: &Problem) -> ScalarField {
    let qc = problem.q_conj();
    let hat = hat_dh(u);
    let lap = laplacian(u);
    let values = (0..u.grid().len())
        .map(|k| -problem.nu() * lap[k] + norm4(&hat[k]).powf(qc) / qc)
        .collect();
    ScalarField::from_vec(u.grid(), values).expect("same grid")
}

/// HJB row residual `r = -nu Delta u + H(hat[D u]) - lambda - f(m)`.
fn hjb_row(m: &ScalarField, u: &ScalarField, lambda: f64, problem: &Problem) -> ScalarField {
    let ham = hamiltonian_row(u, problem);
    let c = problem.coupling();
    let values = (0..m.grid().len())
        .map(|k| {
            let f = if m[k] > 0.0 {
                c.deriv(k, m[k])
            } else {
                c.deriv_at_zero(k).unwrap_or(f64::NEG_INFINITY)
            };
            ham[k] - lambda - f
        })
        .collect();
    ScalarField::from_vec(m.grid(), values).expect("same grid")
}

/// Evaluates the optimality system at `(m, u, lambda)`.
///
/// Where `m` is (numerically) zero the HJB row is an inequality whose slack
/// is the multiplier of `m >= 0`; where `m` touches the bound the opposite
/// inequality holds and its slack is the bound multiplier.
pub fn kkt_residuals(m: &ScalarField, u: &ScalarField, lambda: f64, problem: &Problem) -> Result<KktResiduals> {
    let grid = problem.grid();
    if m.grid() != grid || u.grid() != grid {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            found: m.grid().len(),
        });
    }
    let scale = 1.0 + lambda.abs() + u.max_abs();
    let eps = ACTIVE_SET_REL * m.max().max(0.0);
    let r = hjb_row(m, u, lambda, problem);
    let mut hjb: f64 = 0.0;
    let mut compl: f64 = 0.0;
    for k in 0..grid.len() {
        let (mk, rk, d) = (m[k], r[k], problem.bound_at(k));
        let lower = mk <= eps;
        let upper = d.is_finite() && mk >= d - eps.max(1e-12 * d);
        let viol = if lower && upper {
            0.0
        } else if lower {
            compl = compl.max(mk.max(0.0) * (-rk).max(0.0));
            rk.max(0.0)
        } else if upper {
            compl = compl.max(rk.max(0.0) * (d - mk).max(0.0));
            (-rk).max(0.0)
        } else {
            rk.abs()
        };
        hjb = hjb.max(if viol.is_nan() { f64::INFINITY } else { viol });
        compl = compl.max((-mk).max(0.0)).max((mk - d).max(0.0));
    }
    let fp_raw = laplacian(m)
        .scale(-problem.nu())
        .axpy(-1.0, &transport(u, m, problem.q())?);
    Ok(KktResiduals {
        res_hjb: hjb / scale,
        res_fp: fp_raw.max_abs() / scale,
        res_mass: (m.mass() - 1.0).abs() / scale,
        res_compl: compl / scale,
        scale,
    })
}

/// Dual objective at `(u, lambda)` where `lambda` is the multiplier of the
/// HJB row.
///
/// The dual variable paired with the mass constraint is `lambda / h^2`. For
/// bounded problems a missing `p` is replaced by the minimiser
/// `p = max(eta - f(d), 0)`.
pub fn dual_objective(
    u: &ScalarField,
    lambda: f64,
    p: Option<&ScalarField>,
    problem: &Problem,
) -> Result<f64> {
    let c = problem.coupling();
    if !c.has_conjugate() {
        return Err(Error::Unsupported(format!(
            "coupling `{}` provides no conjugate",
            c.name()
        )));
    }
    let h2 = problem.grid().h().powi(2);
    let ham = hamiltonian_row(u, problem);
    let mut total = lambda / h2;
    for k in 0..problem.grid().len() {
        let eta = ham[k] - lambda;
        let d = problem.bound_at(k);
        let pk = match (p, d.is_finite()) {
            (Some(p), _) => p[k],
            (None, true) => (eta - c.deriv(k, d)).max(0.0),
            (None, false) => 0.0,
        };
        if pk < 0.0 {
            return Ok(f64::INFINITY);
        }
        total += c.conj_value(k, eta - pk).expect("checked");
        if pk > 0.0 {
            total += pk * d;
        }
    }
    Ok(total)
}

/// `primal + dual`, zero at a primal-dual solution.
pub fn duality_gap(primal: f64, dual: f64) -> f64 {
    primal + dual
}

/// Multiple of the stopping tolerance allowed for residuals and gap.
pub const CERTIFICATE_FACTOR: f64 = 100.0;

/// Pass/fail verdict on a converged state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub kkt: KktResiduals,
    /// Bound on every scaled residual.
    pub kkt_threshold: f64,
    pub gap: Option<f64>,
    pub gap_threshold: f64,
}

impl Certificate {
    /// Unscaled residuals and the gap are both held to
    /// `100 tol (1 + |lambda| + max|u|)`; the stored residuals are already
    /// divided by that scale.
    pub fn new(kkt: KktResiduals, gap: Option<f64>, tol: f64) -> Self {
        Self {
            kkt,
            kkt_threshold: CERTIFICATE_FACTOR * tol,
            gap,
            gap_threshold: CERTIFICATE_FACTOR * tol * kkt.scale,
        }
    }

    pub fn kkt_ok(&self) -> bool {
        self.kkt.max() <= self.kkt_threshold
    }

    /// `true` when no gap is available.
    pub fn gap_ok(&self) -> bool {
        self.gap.map_or(true, |g| g.abs() <= self.gap_threshold)
    }

    pub fn passes(&self) -> bool {
        self.kkt_ok() && self.gap_ok()
    }
}

/// `integral_0^1 exp(sin 2 pi x) dx` by the periodic trapezoid rule, which
/// converges geometrically for this analytic integrand.
pub fn mean_exp_sine() -> f64 {
    let n = 128;
    (0..n)
        .map(|i| (2.0 * PI * i as f64 / n as f64).sin().exp())
        .sum::<f64>()
        / n as f64
}

/// Closed-form solution of the log-coupling benchmark with potential
/// `sin 2 pi x + sin 2 pi y` and zero viscosity:
/// `u = 0`, `lambda = log integral e^S`, `m = e^(S - lambda)`.
pub fn exact_log_benchmark(grid: TorusGrid) -> (ScalarField, ScalarField, f64) {
    let lambda = 2.0 * mean_exp_sine().ln();
    let m = ScalarField::from_fn(grid, |x, y| ((2.0 * PI * x).sin() + (2.0 * PI * y).sin() - lambda).exp());
    (m, ScalarField::zeros(grid), lambda)
}

/// `sqrt(h^2 sum (a - b)^2)`.
pub fn l2_error(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::ShapeMismatch {
            expected: a.grid().len(),
            found: b.grid().len(),
        });
    }
    Ok(a.grid().h() * a.axpy(-1.0, b).norm())
}

/// Least-squares slope of `log e` against `log h`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InvalidParameter("rate fit needs at least two points".into()));
    }
    if points.iter().any(|&(h, e)| !(h > 0.0) || !(e > 0.0)) {
        return Err(Error::InvalidParameter("rate fit needs positive h and errors".into()));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct h".into()));
    }
    Ok(sxy / sxx)
}
