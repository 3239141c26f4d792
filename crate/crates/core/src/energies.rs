//! Kinetic integrand, objective values and the closed-form proximity
//! operators used by the splitting schemes.

use rayon::prelude::*;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::grid::{norm4, project_cone, project_polar, Flux, FluxField, ScalarField};
use crate::problem::Problem;
use crate::roots::{bisect_to_precision, grow_upper, safeguarded_newton};

/// `|w|^q / (q m^(q-1))` on `{m > 0, w in K}`, `0` at the origin, `+inf`
/// elsewhere.
pub fn bhat(m: f64, w: &Flux, q: f64) -> f64 {
    let in_k = w[0] >= 0.0 && w[1] <= 0.0 && w[2] >= 0.0 && w[3] <= 0.0;
    if m > 0.0 && in_k {
        norm4(w).powf(q) / (q * m.powf(q - 1.0))
    } else if m == 0.0 && w.iter().all(|&c| c == 0.0) {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Whether `alpha + |P_K beta|^q' / q' <= 0`, the domain of the conjugate of
/// [`bhat`].
pub fn in_conjugate_set(alpha: f64, beta: &Flux, q: f64) -> bool {
    let qc = q / (q - 1.0);
    alpha + norm4(&project_cone(beta)).powf(qc) / qc <= 0.0
}

/// `sum_k bhat(m_k, w_k) + F(x_k, m_k)`, `+inf` outside the density bound.
pub fn primal_objective(m: &ScalarField, w: &FluxField, problem: &Problem) -> f64 {
    let c = problem.coupling();
    let mut total = 0.0;
    for k in 0..m.grid().len() {
        let mk = m[k];
        if mk < 0.0 || mk > problem.bound_at(k) {
            return f64::INFINITY;
        }
        total += bhat(mk, &w[k], problem.q()) + c.value(k, mk);
    }
    total
}

/// Node-level data for `prox_{gamma phi}` with `phi = F + bhat (+ bound)`.
#[derive(Clone, Copy)]
pub struct ProxSpec<'a> {
    pub q: f64,
    pub gamma: f64,
    /// Upper density bound; `+inf` when absent.
    pub bound: f64,
    pub coupling: &'a dyn Coupling,
    pub node: usize,
}

impl<'a> ProxSpec<'a> {
    pub fn new(q: f64, gamma: f64, bound: f64, coupling: &'a dyn Coupling, node: usize) -> Result<Self> {
        if !(q > 1.0) || !(gamma > 0.0) || !(bound > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox needs q > 1, gamma > 0, d > 0 (q = {q}, gamma = {gamma}, d = {bound})"
            )));
        }
        Ok(Self {
            q,
            gamma,
            bound,
            coupling,
            node,
        })
    }

    fn q_conj(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    /// `gamma^(2/q) q'^(1 - 2/q)`.
    fn c(&self) -> f64 {
        self.gamma.powf(2.0 / self.q) * self.q_conj().powf(1.0 - 2.0 / self.q)
    }

    fn fprime(&self, p: f64) -> f64 {
        if p > 0.0 {
            self.coupling.deriv(self.node, p)
        } else {
            self.coupling
                .deriv_at_zero(self.node)
                .unwrap_or(f64::NEG_INFINITY)
        }
    }

    /// `p + gamma F'(p) - m + delta`.
    fn excess(&self, p: f64, delta: f64, m: f64) -> f64 {
        p + self.gamma * self.fprime(p) - m + delta
    }

    fn q_from_excess(&self, p: f64, e: f64, r: f64) -> f64 {
        let q = self.q;
        let tail = self.gamma / self.q_conj() * r.powf(q);
        if e <= 0.0 {
            return -tail;
        }
        let c = self.c();
        if q < 2.0 {
            e.powf(q - 1.0) * (p * e.powf((2.0 - q) / q) + c).powf(q) - tail
        } else {
            e * (p + c * e.powf(1.0 - 2.0 / q)).powf(q) - tail
        }
    }

    /// `(dQ/dp, dQ/ddelta)` from the excess, NaN where unbounded.
    fn q_slopes(&self, p: f64, e: f64) -> (f64, f64) {
        let q = self.q;
        let ea = self.c() * e.powf(1.0 - 2.0 / q);
        let s = p + ea;
        let s1 = s.powf(q - 1.0);
        let d_delta = s1 * (p + ea * (q - 1.0));
        let d_excess = if p > 0.0 {
            1.0 + self.gamma * self.coupling.second_deriv(self.node, p)
        } else {
            f64::NAN
        };
        (d_delta * d_excess + q * e * s1, d_delta)
    }

    /// The scalar factor `t` with `v = t P_K w`.
    fn shrink(&self, p: f64, e: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let q = self.q;
        let c = self.c();
        if q < 2.0 {
            let ep = e.max(0.0).powf((2.0 - q) / q);
            p * ep / (p * ep + c)
        } else {
            p / (p + c * e.max(0.0).powf(1.0 - 2.0 / q))
        }
    }
}

/// `Q_{m,w}(p, delta)` for `(p, delta)` with `p + gamma F'(p) + delta >= m`.
pub fn q_eval(p: f64, delta: f64, m: f64, w: &Flux, spec: &ProxSpec) -> Result<f64> {
    let fp = spec.fprime(p);
    if p < 0.0 || !fp.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "Q evaluated at p = {p} where F'(p) = {fp}"
        )));
    }
    let e = spec.excess(p, delta, m);
    if e < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "(p, delta) = ({p}, {delta}) is outside the domain for m = {m}"
        )));
    }
    Ok(spec.q_from_excess(p, e, norm4(&project_cone(w))))
}

/// `prox_{gamma phi}(m, w)` for `phi = F + bhat (+ indicator of [0, d])`.
pub fn prox_phi(m: f64, w: &Flux, spec: &ProxSpec) -> Result<(f64, Flux)> {
    let gamma = spec.gamma;
    let pk = project_cone(w);
    let r = norm4(&pk);
    let scaled = |t: f64| [t * pk[0], t * pk[1], t * pk[2], t * pk[3]];
    let f0 = spec.coupling.deriv_at_zero(spec.node);

    let below_zero_slope = f0.is_some_and(|f0| m <= gamma * f0);
    if below_zero_slope && spec.q_from_excess(0.0, spec.excess(0.0, 0.0, m), r) >= 0.0 {
        return Ok((0.0, [0.0; 4]));
    }

    let d = spec.bound;
    if d.is_finite() {
        let delta_lo = m - d - gamma * spec.fprime(d);
        if delta_lo >= 0.0 || spec.q_from_excess(d, spec.excess(d, 0.0, m), r) <= 0.0 {
            let lo = delta_lo.max(0.0);
            let delta = if r == 0.0 {
                lo
            } else {
                let q_at = |delta: f64| spec.q_from_excess(d, spec.excess(d, delta, m), r);
                let hi = grow_upper(q_at, lo, lo + 1.0)?;
                safeguarded_newton(
                    |delta| {
                        let e = spec.excess(d, delta, m);
                        (spec.q_from_excess(d, e, r), spec.q_slopes(d, e).1)
                    },
                    lo,
                    hi,
                )?
            };
            let t = spec.shrink(d, spec.excess(d, delta, m));
            return Ok((d, scaled(t)));
        }
    }

    let p_low = if below_zero_slope {
        0.0
    } else {
        crate::coupling::prox_gamma_f_scalar(m, spec.node, gamma, spec.coupling)?
    };
    if r == 0.0 {
        return Ok((p_low, [0.0; 4]));
    }
    let q_at = |p: f64| spec.q_from_excess(p, spec.excess(p, 0.0, m), r);
    let hi = if d.is_finite() {
        d
    } else {
        grow_upper(q_at, p_low, 2.0 * p_low + 1.0)?
    };
    let p = safeguarded_newton(
        |p| {
            let e = spec.excess(p, 0.0, m);
            (spec.q_from_excess(p, e, r), spec.q_slopes(p, e).0)
        },
        p_low,
        hi,
    )?;
    let t = spec.shrink(p, spec.excess(p, 0.0, m));
    Ok((p, scaled(t)))
}

/// Nodewise `prox_{gamma phi}` over whole fields (data-parallel).
pub fn prox_phi_field(
    m: &ScalarField,
    w: &FluxField,
    gamma: f64,
    problem: &Problem,
) -> Result<(ScalarField, FluxField)> {
    let coupling = problem.coupling();
    let q = problem.q();
    let out: Result<Vec<(f64, Flux)>> = (0..m.grid().len())
        .into_par_iter()
        .with_min_len(256)
        .map(|k| {
            let spec = ProxSpec::new(q, gamma, problem.bound_at(k), coupling, k)?;
            prox_phi(m[k], &w[k], &spec)
        })
        .collect();
    let (p, v): (Vec<f64>, Vec<Flux>) = out?.into_iter().unzip();
    Ok((
        ScalarField::from_vec(m.grid(), p)?,
        FluxField::from_vec(m.grid(), v)?,
    ))
}

/// `prox_{psi_k / gamma}(a0, b0, c0)` for
/// `psi_k(a, b, c) = F*(x_k, a + |P_K b|^2 / 2 + c)`.
pub fn prox_psi_admm(
    a0: f64,
    b0: &Flux,
    c0: f64,
    node: usize,
    gamma: f64,
    coupling: &dyn Coupling,
) -> Result<(f64, Flux, f64)> {
    if coupling.conj_deriv(node, 0.0).is_none() {
        return Err(Error::Unsupported(format!(
            "coupling `{}` has no conjugate derivative",
            coupling.name()
        )));
    }
    let pk = project_cone(b0);
    let r2 = norm4(&pk).powi(2);
    let threshold = coupling.deriv_at_zero(node).unwrap_or(f64::NEG_INFINITY);
    if a0 + 0.5 * r2 + c0 <= threshold {
        return Ok((a0, *b0, c0));
    }
    let conj = |s: f64| {
        coupling
            .conj_deriv(node, a0 + c0 - 2.0 * s + r2 / (2.0 * (1.0 + s).powi(2)))
            .unwrap_or(f64::NAN)
    };
    let residual = |s: f64| gamma * s - conj(s);
    let hi = grow_upper(residual, 0.0, 1.0)?;
    let s = bisect_to_precision(residual, 0.0, hi);
    let neg = project_polar(b0);
    let scale = 1.0 / (1.0 + s);
    let b = [
        pk[0] * scale + neg[0],
        pk[1] * scale + neg[1],
        pk[2] * scale + neg[2],
        pk[3] * scale + neg[3],
    ];
    Ok((a0 - s, b, c0 - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{QuadraticCoupling, ZeroCoupling};
    use crate::grid::TorusGrid;
    use approx::assert_abs_diff_eq;

    fn zero() -> ZeroCoupling {
        ZeroCoupling::new(TorusGrid::new(3).unwrap())
    }

    #[test]
    fn bhat_values() {
        assert_eq!(bhat(1.0, &[1.0, 0.0, 0.0, 0.0], 2.0), 0.5);
        assert_eq!(bhat(0.0, &[1.0, 0.0, 0.0, 0.0], 2.0), f64::INFINITY);
        assert_eq!(bhat(0.0, &[0.0; 4], 2.0), 0.0);
        assert_eq!(bhat(2.0, &[1.0, -1.0, 1.0, -1.0], 2.0), 1.0);
        assert_eq!(bhat(1.0, &[-1.0, 0.0, 0.0, 0.0], 2.0), f64::INFINITY);
        assert_eq!(bhat(-1.0, &[0.0; 4], 2.0), f64::INFINITY);
    }

    #[test]
    fn conjugate_set_membership() {
        assert!(in_conjugate_set(0.0, &[0.0; 4], 2.0));
        assert!(in_conjugate_set(-1.0, &[1.0, 0.0, 0.0, 0.0], 2.0));
        assert!(!in_conjugate_set(0.1, &[0.0, -5.0, 0.0, 0.0], 2.0));
        assert!(in_conjugate_set(0.0, &[-3.0, 2.0, -1.0, 5.0], 3.0));
    }

    #[test]
    fn q_reduces_to_cubic_at_q2() {
        let z = zero();
        let spec = ProxSpec::new(2.0, 1.0, f64::INFINITY, &z, 0).unwrap();
        assert_abs_diff_eq!(q_eval(1.0, 0.0, 1.0, &[0.0; 4], &spec).unwrap(), 0.0);
        assert_abs_diff_eq!(q_eval(0.0, 0.0, 0.0, &[1.0, 0.0, 0.0, 0.0], &spec).unwrap(), -0.5);
        let p = 0.7;
        let w = [0.3, -0.2, -4.0, 1.0];
        let r2 = 0.09 + 0.04;
        assert_abs_diff_eq!(
            q_eval(p, 0.0, 0.0, &w, &spec).unwrap(),
            p * (p + 1.0) * (p + 1.0) - r2 / 2.0,
            epsilon = 1e-14
        );
        assert!(q_eval(0.0, 0.0, 1.0, &w, &spec).is_err());
    }

    #[test]
    fn q_at_q3_matches_hand_value() {
        // q = 3, q' = 3/2, gamma = 1, m = 0, w = e1, p = 1/2:
        // c = (3/2)^(1/3), Q = 1/2 (1/2 + c (1/2)^(1/3))^3 - 2/3
        //   = 1/2 (1/2 + (3/4)^(1/3))^3 - 2/3
        let z = zero();
        let spec = ProxSpec::new(3.0, 1.0, f64::INFINITY, &z, 0).unwrap();
        let expected = 0.5 * (0.5 + 0.75f64.cbrt()).powi(3) - 2.0 / 3.0;
        assert_abs_diff_eq!(
            q_eval(0.5, 0.0, 0.0, &[1.0, 0.0, 0.0, 0.0], &spec).unwrap(),
            expected,
            epsilon = 1e-14
        );
    }

    #[test]
    fn prox_basic_branches() {
        let z = zero();
        let spec = ProxSpec::new(2.0, 1.0, f64::INFINITY, &z, 0).unwrap();
        assert_eq!(prox_phi(1.0, &[0.0; 4], &spec).unwrap(), (1.0, [0.0; 4]));
        assert_eq!(prox_phi(-1.0, &[1.0, 0.0, 0.0, 0.0], &spec).unwrap(), (0.0, [0.0; 4]));

        let (p, v) = prox_phi(0.0, &[1.0, 0.0, 0.0, 0.0], &spec).unwrap();
        assert_abs_diff_eq!(p * (p + 1.0) * (p + 1.0), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v[0], p / (p + 1.0), epsilon = 1e-12);

        let bounded = ProxSpec::new(2.0, 1.0, 0.1, &z, 0).unwrap();
        let (p, v) = prox_phi(1.0, &[0.0; 4], &bounded).unwrap();
        assert_eq!(p, 0.1);
        assert_eq!(v, [0.0; 4]);
    }

    #[test]
    fn prox_with_quadratic_coupling_at_rest() {
        // F = (m - 1)^2 / 2, w = 0: p + (p - 1) = m
        let g = TorusGrid::new(3).unwrap();
        let c = QuadraticCoupling::new(&ScalarField::constant(g, 1.0), 1.0).unwrap();
        let spec = ProxSpec::new(2.0, 1.0, f64::INFINITY, &c, 0).unwrap();
        let (p, v) = prox_phi(3.0, &[0.0; 4], &spec).unwrap();
        assert_abs_diff_eq!(p, 2.0, epsilon = 1e-12);
        assert_eq!(v, [0.0; 4]);
    }

    #[test]
    fn admm_prox_cases() {
        let g = TorusGrid::new(3).unwrap();
        let c = QuadraticCoupling::new(&ScalarField::constant(g, 1.0), 1.0).unwrap();
        let (a, b, cc) = prox_psi_admm(1.0, &[0.0; 4], 1.0, 0, 1.0, &c).unwrap();
        assert_abs_diff_eq!(a, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(cc, 0.0, epsilon = 1e-10);
        assert_eq!(b, [0.0; 4]);

        // below the threshold g'(0) = -1 the input is returned
        let b0 = [-1.0, 1.0, -1.0, 1.0];
        let out = prox_psi_admm(-1.0, &b0, -0.5, 0, 1.0, &c).unwrap();
        assert_eq!(out, (-1.0, b0, -0.5));
    }
}
