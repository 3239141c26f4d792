//! Schemes with `Xi = Id`: the mass and transport constraints live in the
//! indicator of `V`, handled through `(G G*)^{-1}`.

use super::{Algorithm, Context, Family, Iteration, Splitting, StartPoint, Steps};
use crate::error::Result;
use crate::grid::ScalarField;
use crate::saddle::FieldPair;

/// Primal-dual extrapolated scheme.
#[derive(Debug, Clone, Copy)]
pub struct CpUnsplit;

struct CpUnsplitState {
    y: FieldPair,
    ybar: FieldPair,
    sigma: FieldPair,
}

impl Algorithm for CpUnsplit {
    fn name(&self) -> &'static str {
        "cp-u"
    }
    fn family(&self) -> Family {
        Family::ChambollePock
    }
    fn splitting(&self) -> Splitting {
        Splitting::Identity
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        let y = start.primal();
        Ok(Box::new(CpUnsplitState {
            ybar: y.clone(),
            sigma: ctx.unsplit_dual(&start.u_or_zero(), start.lambda_or_zero()),
            y,
        }))
    }
}

impl Iteration for CpUnsplitState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let Steps { gamma, tau, theta } = ctx.steps;
        self.sigma = ctx.op.prox_psistar(&self.sigma.axpy(gamma, &self.ybar), gamma)?;
        let next = ctx.prox(&self.y.axpy(-tau, &self.sigma), tau)?;
        self.ybar = next.axpy(theta, &next.axpy(-1.0, &self.y));
        self.y = next;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.y
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        ctx.unsplit_multipliers(&self.sigma)
    }
}

/// Predictor-corrector proximal multiplier method.
#[derive(Debug, Clone, Copy)]
pub struct PcpmUnsplit;

struct PcpmUnsplitState {
    y: FieldPair,
    v: FieldPair,
    sigma: FieldPair,
}

impl Algorithm for PcpmUnsplit {
    fn name(&self) -> &'static str {
        "pcpm-u"
    }
    fn family(&self) -> Family {
        Family::PredictorCorrector
    }
    fn splitting(&self) -> Splitting {
        Splitting::Identity
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        let y = start.primal();
        Ok(Box::new(PcpmUnsplitState {
            v: y.clone(),
            sigma: ctx.unsplit_dual(&start.u_or_zero(), start.lambda_or_zero()),
            y,
        }))
    }
}

impl Iteration for PcpmUnsplitState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let gamma = ctx.steps.gamma;
        let predicted = self.sigma.axpy(gamma, &self.y.axpy(-1.0, &self.v));
        let y = ctx.prox(&self.y.axpy(-gamma, &predicted), gamma)?;
        let v = ctx.op.project_v(&self.v.axpy(gamma, &predicted))?;
        self.sigma = self.sigma.axpy(gamma, &y.axpy(-1.0, &v));
        self.y = y;
        self.v = v;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.y
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        ctx.unsplit_multipliers(&self.sigma)
    }
}

/// Forward-backward-forward scheme on the monotone + skew inclusion.
#[derive(Debug, Clone, Copy)]
pub struct MsUnsplit;

struct MsUnsplitState {
    y: FieldPair,
    sigma: FieldPair,
}

impl Algorithm for MsUnsplit {
    fn name(&self) -> &'static str {
        "ms-u"
    }
    fn family(&self) -> Family {
        Family::MonotoneSkew
    }
    fn splitting(&self) -> Splitting {
        Splitting::Identity
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>> {
        Ok(Box::new(MsUnsplitState {
            y: start.primal(),
            sigma: ctx.unsplit_dual(&start.u_or_zero(), start.lambda_or_zero()),
        }))
    }
}

impl Iteration for MsUnsplitState {
    fn step(&mut self, ctx: &Context) -> Result<()> {
        let gamma = ctx.steps.gamma;
        let eta = ctx.op.prox_psistar(&self.sigma.axpy(gamma, &self.y), gamma)?;
        let p = ctx.prox(&self.y.axpy(-gamma, &self.sigma), gamma)?;
        let sigma = eta.axpy(gamma, &p.axpy(-1.0, &self.y));
        self.y = p.axpy(-gamma, &eta.axpy(-1.0, &self.sigma));
        self.sigma = sigma;
        Ok(())
    }
    fn primal(&self) -> &FieldPair {
        &self.y
    }
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)> {
        ctx.unsplit_multipliers(&self.sigma)
    }
}
