//! Schemes with `Xi = G` and `psi` the indicator of `{(0, 1)}`. The dual
//! variable is `(u, lambda)` directly and no linear system is solved; the
//! density is projected back onto unit mass after each primal prox.
//!
//! In the forward-backward-forward and predictor-corrector variants the
//! constant removed by that projection is also credited to the mass
//! multiplier, so that a fixed point has `prox output = iterate` and
//! satisfies the optimality system.

use super::{project_pair_mass, Algorithm, Context, Family, Iteration, Splitting, StartPoint, Steps};
use crate::error::Result;
use crate::grid::ScalarField;
use crate::saddle::FieldPair;

/// Dual variable `(u, lambda)` of the split formulation.
#[derive(Debug, Clone)]
struct Multiplier {
    u: ScalarField,
    lambda: f64,
}

impl Multiplier {
    fn from_start(ctx: &Context, start: &StartPoint) -> Self {
        Self {
            u: start.u_or_zero().scale(-1.0),
            lambda: start.lambda_or_zero() / ctx.h2(),
        }
    }

    /// `self + gamma (G y - (0, 1))`.
    fn ascend(&self, ctx: &Context, y: &FieldPair, gamma: f64) -> Self {
        let (first, mass) = ctx.op.apply_g(&y.m, &y.w);
        Self {
            u: self.u.axpy(gamma, &first),
            lambda: self.lambda + gamma * (mass - 1.0),
        }
    }

    /// Projects the prox output `p` onto unit mass and credits the removed
    /// constant `c` to the mass multiplier, `lambda += c / (gamma h^2)`.
    fn absorb_mass(&mut self, ctx: &Context, p: &FieldPair, gamma: f64) -> FieldPair {
        let c = p.m.mass() - 1.0;
        self.lambda += c / (gamma * ctx.h2());
        project_pair_mass(p)
    }

    fn adjoint(&self, ctx: &Context) -> FieldPair {
        ctx.op.apply_gstar(&self.u, self.lambda)
    }

    fn to_hjb(&self, ctx: &Context) -> (ScalarField, f64) {
        (self.u.scale(-1.0).zero_mean(), ctx.h2() * self.lambda)
    }
}

/// Primal-dual scheme with the projection onto unit mass.
#[derive(Debug, Clone, Copy)]
pub struct CpSplit;

struct CpSplitState {
    y: FieldPair,
    ybar: FieldPair,
    sigma: Multiplier,
}

impl Algorithm for CpSplit {
    fn name(&self) -> &'static str {
        "cp-sp"
    }
    fn family(&self) -> Family {
        Family::ChambollePock
    }
    fn splitting(&self) -> Splitting {
        Splitting::Constraint
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        let y = start.primal();
        Ok(Box::new(CpSplitState {
            ybar: y.clone(),
            sigma: Multiplier::from_start(ctx, start),
            y,
        }))
    }
}

impl Iteration for CpSplitState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let Steps { gamma, tau, theta } = ctx.steps;
        self.sigma = self.sigma.ascend(ctx, &self.ybar, gamma);
        let p = ctx.prox(&self.y.axpy(-tau, &self.sigma.adjoint(ctx)), tau)?;
        let next = project_pair_mass(&p);
        self.ybar = next.axpy(theta, &p.axpy(-1.0, &self.y));
        self.y = next;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.y
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        Ok(self.sigma.to_hjb(ctx))
    }
}

/// Forward-backward-forward scheme with the projection onto unit mass.
#[derive(Debug, Clone, Copy)]
pub struct MsSplit;

struct MsSplitState {
    y: FieldPair,
    sigma: Multiplier,
}

impl Algorithm for MsSplit {
    fn name(&self) -> &'static str {
        "ms-sp"
    }
    fn family(&self) -> Family {
        Family::MonotoneSkew
    }
    fn splitting(&self) -> Splitting {
        Splitting::Constraint
    }
    fn empirical(&self) -> bool {
        true
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        Ok(Box::new(MsSplitState {
            y: start.primal(),
            sigma: Multiplier::from_start(ctx, start),
        }))
    }
}

impl Iteration for MsSplitState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let gamma = ctx.steps.gamma;
        let mut eta = self.sigma.ascend(ctx, &self.y, gamma);
        let raw = ctx.prox(&self.y.axpy(-gamma, &self.sigma.adjoint(ctx)), gamma)?;
        let shift = self.sigma.lambda;
        let p = self.sigma.absorb_mass(ctx, &raw, gamma);
        eta.lambda += self.sigma.lambda - shift;
        let (first, mass) = ctx.op.apply_g(&p.m.axpy(-1.0, &self.y.m), &p.w.axpy(-1.0, &self.y.w));
        let sigma = Multiplier {
            u: eta.u.axpy(gamma, &first),
            lambda: eta.lambda + gamma * mass,
        };
        let back = ctx
            .op
            .apply_gstar(&eta.u.axpy(-1.0, &self.sigma.u), eta.lambda - self.sigma.lambda);
        self.y = project_pair_mass(&p.axpy(-gamma, &back));
        self.sigma = sigma;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.y
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        Ok(self.sigma.to_hjb(ctx))
    }
}

/// Predictor-corrector scheme with the projection onto unit mass.
#[derive(Debug, Clone, Copy)]
pub struct PcpmSplit;

struct PcpmSplitState {
    y: FieldPair,
    sigma: Multiplier,
}

impl Algorithm for PcpmSplit {
    fn name(&self) -> &'static str {
        "pcpm-sp"
    }
    fn family(&self) -> Family {
        Family::PredictorCorrector
    }
    fn splitting(&self) -> Splitting {
        Splitting::Constraint
    }
    fn empirical(&self) -> bool {
        true
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        Ok(Box::new(PcpmSplitState {
            y: start.primal(),
            sigma: Multiplier::from_start(ctx, start),
        }))
    }
}

impl Iteration for PcpmSplitState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let gamma = ctx.steps.gamma;
        let predicted = self.sigma.ascend(ctx, &self.y, gamma);
        let raw = ctx.prox(&self.y.axpy(-gamma, &predicted.adjoint(ctx)), gamma)?;
        let mut sigma = self.sigma.ascend(ctx, &raw, gamma);
        let y = sigma.absorb_mass(ctx, &raw, gamma);
        self.sigma = sigma;
        self.y = y;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.y
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        Ok(self.sigma.to_hjb(ctx))
    }
}
