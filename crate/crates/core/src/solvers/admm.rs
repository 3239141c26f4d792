//! Alternating direction method of multipliers on the dual problem for the
//! quadratic Hamiltonian.
//!
//! Unknowns `y = (u, lambda)` with objective `lambda`; the splitting variable
//! `v = (a, b, c)` mirrors `Xi y = (-h^2 lambda 1, B* u, A u)` and carries
//! `psi(v) = sum_k F*(x_k, a_k + |P_K b_k|^2 / 2 + c_k)`. Its multiplier
//! `(s1, s2, s3)` converges to `(m, w, m)`.

use rayon::prelude::*;

use super::{Algorithm, Context, Family, Iteration, Splitting, StartPoint};
use crate::energies::prox_psi_admm;
use crate::error::{Error, Result};
use crate::grid::{apply_a, apply_b, apply_bstar, flux_from_value, project_cone, norm4, Flux, FluxField, ScalarField};
use crate::problem::Problem;
use crate::saddle::FieldPair;

#[derive(Debug, Clone, Copy)]
pub struct Admm;

struct AdmmState {
    u: ScalarField,
    lambda: f64,
    a: ScalarField,
    b: FluxField,
    c: ScalarField,
    s1: ScalarField,
    s2: FluxField,
    s3: ScalarField,
    primal: FieldPair,
}

impl Algorithm for Admm {
    fn name(&self) -> &'static str {
        "admm"
    }
    fn family(&self) -> Family {
        Family::AugmentedLagrangian
    }
    fn splitting(&self) -> Splitting {
        Splitting::Dual
    }
    fn check_problem(&self, problem: &Problem) -> Result<()> {
        if problem.q() != 2.0 {
            return Err(Error::Unsupported(format!(
                "admm requires q = 2, got q = {}",
                problem.q()
            )));
        }
        if problem.bound().is_some() {
            return Err(Error::Unsupported("admm does not handle density bounds".into()));
        }
        if !problem.coupling().has_conjugate() || problem.coupling().conj_deriv(0, 0.0).is_none() {
            return Err(Error::Unsupported(format!(
                "admm requires the conjugate of coupling `{}`",
                problem.coupling().name()
            )));
        }
        Ok(())
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        let g = ctx.problem.grid();
        let u = start.u_or_zero();
        let lambda = start.lambda_or_zero() / ctx.h2();
        let warm = start.u.is_some() || start.lambda.is_some();
        let (a, b, c) = if warm {
            (
                ScalarField::constant(g, -ctx.h2() * lambda),
                apply_bstar(&u),
                apply_a(&u, ctx.problem.nu()),
            )
        } else {
            (ScalarField::zeros(g), FluxField::zeros(g), ScalarField::zeros(g))
        };
        Ok(Box::new(AdmmState {
            u,
            lambda,
            a,
            b,
            c,
            s1: start.m.clone(),
            s2: start.w.clone(),
            s3: start.m.clone(),
            primal: start.primal(),
        }))
    }
}

impl AdmmState {
    fn recover_primal(&self, ctx: &Context) -> Result<FieldPair> {
        let coupling = ctx.problem.coupling();
        let values = (0..self.a.grid().len())
            .map(|k| {
                let eta = self.a[k] + 0.5 * norm4(&project_cone(&self.b[k])).powi(2) + self.c[k];
                coupling.conj_deriv(k, eta).expect("checked at launch")
            })
            .collect();
        let m = ScalarField::from_vec(self.a.grid(), values)?;
        let w = flux_from_value(&self.u, &m, 2.0)?;
        Ok(FieldPair::new(m, w))
    }
}

impl Iteration for AdmmState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let gamma = ctx.steps.gamma;
        let nu = ctx.problem.nu();
        let h2 = ctx.h2();
        let g = ctx.problem.grid();

        let rhs = apply_b(&self.b.axpy(-1.0 / gamma, &self.s2))
            .axpy(1.0, &apply_a(&self.c.axpy(-1.0 / gamma, &self.s3), nu));
        self.u = ctx.op.solve_saddle(&rhs)?;
        self.lambda = (self.s1.sum() - g.len() as f64 - gamma * self.a.sum()) / gamma;

        let bu = apply_bstar(&self.u);
        let au = apply_a(&self.u, nu);
        let coupling = ctx.problem.coupling();
        let out: Result<Vec<(f64, Flux, f64)>> = (0..g.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|k| {
                let a0 = self.s1[k] / gamma - h2 * self.lambda;
                let s2 = self.s2[k];
                let b0 = std::array::from_fn(|i| s2[i] / gamma + bu[k][i]);
                let c0 = self.s3[k] / gamma + au[k];
                prox_psi_admm(a0, &b0, c0, k, gamma, coupling)
            })
            .collect();
        let out = out?;
        for (k, (a, b, c)) in out.into_iter().enumerate() {
            self.a[k] = a;
            self.b[k] = b;
            self.c[k] = c;
        }

        self.s1 = self.s1.axpy(-gamma, &self.a.add_scalar(h2 * self.lambda));
        self.s2 = self.s2.axpy(gamma, &bu.axpy(-1.0, &self.b));
        self.s3 = self.s3.axpy(gamma, &au.axpy(-1.0, &self.c));
        self.primal = self.recover_primal(ctx)?;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.primal
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        Ok((self.u.zero_mean(), ctx.h2() * self.lambda))
    }
}
