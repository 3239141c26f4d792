//! Iterative splitting algorithms behind a common [`Algorithm`] trait, a
//! name-keyed registry and the run driver that applies the stopping rule and
//! records history.

mod admm;
mod split;
mod unsplit;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

pub use admm::Admm;
pub use split::{CpSplit, MsSplit, PcpmSplit};
pub use unsplit::{CpUnsplit, MsUnsplit, PcpmUnsplit};

use crate::diagnostics::{dual_objective, duality_gap, kkt_residuals, KktResiduals};
use crate::energies::{primal_objective, prox_phi_field};
use crate::error::{Error, Result};
use crate::grid::{project_mass, FluxField, ScalarField};
use crate::problem::Problem;
use crate::saddle::{
    estimate_norm, ConstraintOperator, FieldPair, LinearOptions, LinearSolverRegistry, NormTarget,
};

/// Step-size rule an algorithm obeys.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `gamma tau |Xi|^2 < 1`.
    ChambollePock,
    /// `gamma < min(1, 1/|Xi|) / 2`.
    PredictorCorrector,
    /// `gamma |Xi| < 1`.
    MonotoneSkew,
    /// Any `gamma > 0`.
    AugmentedLagrangian,
}

/// Whether the linear constraint is kept in the prox of an indicator
/// (`Xi = Id`) or exposed as the coupling operator (`Xi = G`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Splitting {
    Identity,
    Constraint,
    /// The dual formulation used by the augmented Lagrangian scheme.
    Dual,
}

/// How to react when configured steps violate the convergence bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepPolicy {
    #[default]
    Enforce,
    Warn,
}

/// Resolved step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Steps {
    pub gamma: f64,
    pub tau: f64,
    pub theta: f64,
}

/// Initial point; multipliers use the HJB convention (`u` value function,
/// `lambda` ergodic constant).
#[derive(Debug, Clone)]
pub struct StartPoint {
    pub m: ScalarField,
    pub w: FluxField,
    pub u: Option<ScalarField>,
    pub lambda: Option<f64>,
}

impl StartPoint {
    /// `m = 1`, `w = 0`, zero multipliers.
    pub fn uniform(problem: &Problem) -> Self {
        let g = problem.grid();
        Self {
            m: ScalarField::constant(g, 1.0),
            w: FluxField::zeros(g),
            u: None,
            lambda: None,
        }
    }

    pub fn primal(&self) -> FieldPair {
        FieldPair::new(self.m.clone(), self.w.clone())
    }

    pub fn u_or_zero(&self) -> ScalarField {
        self.u.clone().unwrap_or_else(|| ScalarField::zeros(self.m.grid()))
    }

    pub fn lambda_or_zero(&self) -> f64 {
        self.lambda.unwrap_or(0.0)
    }
}

/// Solver options. `None` steps and tolerance resolve to the defaults of the
/// chosen algorithm and grid.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub theta: f64,
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub record_every: usize,
    pub linear_solver: String,
    pub linear: LinearOptions,
    pub seed: u64,
    pub step_policy: StepPolicy,
    pub start: Option<StartPoint>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            tau: None,
            theta: 1.0,
            tol: None,
            max_iter: 200_000,
            record_every: 1,
            linear_solver: "fft".into(),
            linear: LinearOptions::default(),
            seed: 0,
            step_policy: StepPolicy::Enforce,
            start: None,
        }
    }
}

/// Everything an iteration needs besides its own state.
pub struct Context<'a> {
    pub problem: &'a Problem,
    pub op: &'a ConstraintOperator,
    pub steps: Steps,
}

impl Context<'_> {
    pub fn h2(&self) -> f64 {
        self.problem.grid().h().powi(2)
    }

    /// `prox_{gamma phi}` on a pair.
    pub fn prox(&self, x: &FieldPair, gamma: f64) -> Result<FieldPair> {
        let (m, w) = prox_phi_field(&x.m, &x.w, gamma, self.problem)?;
        Ok(FieldPair::new(m, w))
    }

    /// Maps the dual variable of the unsplit formulation (a point of the
    /// range of `G*`) to HJB multipliers.
    pub fn unsplit_multipliers(&self, sigma: &FieldPair) -> Result<(ScalarField, f64)> {
        let (u, lambda) = self.op.pullback(sigma)?;
        Ok((u.scale(-1.0).zero_mean(), self.h2() * lambda))
    }

    /// Inverse of [`Self::unsplit_multipliers`].
    pub fn unsplit_dual(&self, u: &ScalarField, lambda: f64) -> FieldPair {
        self.op.apply_gstar(&u.scale(-1.0), lambda / self.h2())
    }
}

/// A running instance of an algorithm.
pub trait Iteration {
    fn step(&mut self, ctx: &Context) -> Result<()>;
    /// Current primal iterate `(m, w)`.
    fn primal(&self) -> &FieldPair;
    /// Current `(u, lambda)` in the HJB convention, `u` zero-mean.
    fn multipliers(&self, ctx: &Context) -> Result<(ScalarField, f64)>;
}

/// A splitting scheme selectable by name.
pub trait Algorithm: Send + Sync {
    fn name(&self) -> &'static str;
    fn family(&self) -> Family;
    fn splitting(&self) -> Splitting;
    /// Schemes without a convergence theorem for this projection recipe.
    fn empirical(&self) -> bool {
        false
    }
    fn check_problem(&self, _problem: &Problem) -> Result<()> {
        Ok(())
    }
    fn start(&self, ctx: &Context, start: &StartPoint) -> Result<Box<dyn Iteration>>;
}

impl fmt::Debug for dyn Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Algorithms constructible by name.
#[derive(Clone)]
pub struct AlgorithmRegistry {
    entries: BTreeMap<String, Arc<dyn Algorithm>>,
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl fmt::Debug for AlgorithmRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.entries.keys()).finish()
    }
}

/// Canonical names in presentation order.
pub const ALGORITHMS: [&str; 7] = ["admm", "pcpm-u", "cp-u", "ms-u", "cp-sp", "ms-sp", "pcpm-sp"];

impl AlgorithmRegistry {
    pub fn with_builtins() -> Self {
        let mut reg = Self {
            entries: BTreeMap::new(),
        };
        reg.register(Arc::new(Admm));
        reg.register(Arc::new(PcpmUnsplit));
        reg.register(Arc::new(CpUnsplit));
        reg.register(Arc::new(MsUnsplit));
        reg.register(Arc::new(CpSplit));
        reg.register(Arc::new(MsSplit));
        reg.register(Arc::new(PcpmSplit));
        reg
    }

    pub fn register(&mut self, algorithm: Arc<dyn Algorithm>) {
        self.entries.insert(algorithm.name().to_string(), algorithm);
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Algorithm>> {
        self.entries
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| Error::UnknownName {
                kind: "algorithm",
                name: name.to_string(),
                available: self.names().join(", "),
            })
    }
}

/// One recorded iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub primal_change: f64,
    pub res_hjb: f64,
    pub res_fp: f64,
    pub res_mass: f64,
    pub res_compl: f64,
    /// NaN when the coupling has no conjugate.
    pub gap: f64,
    pub lambda: f64,
}

/// Outcome of a run.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub algorithm: String,
    pub m: ScalarField,
    pub w: FluxField,
    pub u: ScalarField,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_change: f64,
    pub tol: f64,
    pub steps: Steps,
    /// Operator norm used for the step rule (`1` for the unsplit schemes).
    pub xi_norm: f64,
    /// False when the steps broke the convergence bound under
    /// [`StepPolicy::Warn`].
    pub steps_within_bound: bool,
    pub empirical: bool,
    pub linear_solver: String,
    pub linear_solves: usize,
    pub kkt: KktResiduals,
    pub primal_value: f64,
    pub dual_value: Option<f64>,
    pub gap: Option<f64>,
    pub history: Vec<HistoryRow>,
    pub wall_time: Duration,
}

/// Operator norm entering the step bound of `algorithm`.
pub fn xi_norm(algorithm: &dyn Algorithm, problem: &Problem, seed: u64) -> f64 {
    match algorithm.splitting() {
        Splitting::Identity | Splitting::Dual => 1.0,
        Splitting::Constraint => estimate_norm(NormTarget::Constraint, problem.grid(), problem.nu(), seed),
    }
}

/// Default steps for `family` given `|Xi|`.
pub fn default_steps(family: Family, norm: f64) -> (f64, f64) {
    match family {
        Family::ChambollePock => (0.95 / norm, 0.95 / norm),
        Family::PredictorCorrector => {
            let g = 0.475 * (1.0f64).min(1.0 / norm);
            (g, g)
        }
        Family::MonotoneSkew => (0.95 / norm, 0.95 / norm),
        Family::AugmentedLagrangian => (1.0, 1.0),
    }
}

/// `Ok` when the steps satisfy the convergence bound, else the reason.
pub fn check_steps(family: Family, gamma: f64, tau: f64, norm: f64) -> std::result::Result<(), String> {
    if !(gamma > 0.0) || !(tau > 0.0) {
        return Err(format!("steps must be positive (gamma = {gamma}, tau = {tau})"));
    }
    match family {
        Family::ChambollePock if gamma * tau * norm * norm >= 1.0 => Err(format!(
            "gamma * tau * |Xi|^2 = {} must be < 1",
            gamma * tau * norm * norm
        )),
        Family::PredictorCorrector if gamma >= 0.5 * (1.0f64).min(1.0 / norm) => Err(format!(
            "gamma = {gamma} must be < min(1, 1/|Xi|)/2 = {}",
            0.5 * (1.0f64).min(1.0 / norm)
        )),
        Family::MonotoneSkew if gamma * norm >= 1.0 => {
            Err(format!("gamma * |Xi| = {} must be < 1", gamma * norm))
        }
        _ => Ok(()),
    }
}

/// Resolves steps from the configuration.
pub fn resolve_steps(algorithm: &dyn Algorithm, cfg: &SolverConfig, norm: f64) -> Steps {
    let (g0, t0) = default_steps(algorithm.family(), norm);
    let gamma = cfg.gamma.unwrap_or(g0);
    let tau = match algorithm.family() {
        Family::ChambollePock => cfg.tau.unwrap_or(match cfg.gamma {
            Some(g) => 0.95 * 0.95 / (norm * norm * g),
            None => t0,
        }),
        _ => gamma,
    };
    Steps {
        gamma,
        tau,
        theta: cfg.theta,
    }
}

/// `true` iff `|next - prev| <= tol` on the stacked `(m, w)` vector.
pub fn stopping_check(prev: &FieldPair, next: &FieldPair, tol: f64) -> bool {
    prev.distance(next) <= tol
}

/// Mass projection on the density block.
pub(crate) fn project_pair_mass(x: &FieldPair) -> FieldPair {
    FieldPair::new(project_mass(&x.m), x.w.clone())
}

fn diagnostics_row(
    ctx: &Context,
    state: &dyn Iteration,
    iter: usize,
    change: f64,
) -> Result<(HistoryRow, KktResiduals, f64, Option<f64>, ScalarField, f64)> {
    let (u, lambda) = state.multipliers(ctx)?;
    let y = state.primal();
    let kkt = kkt_residuals(&y.m, &u, lambda, ctx.problem)?;
    let primal = primal_objective(&y.m, &y.w, ctx.problem);
    let dual = if ctx.problem.coupling().has_conjugate() {
        Some(dual_objective(&u, lambda, None, ctx.problem)?)
    } else {
        None
    };
    let row = HistoryRow {
        iter,
        primal_change: change,
        res_hjb: kkt.res_hjb,
        res_fp: kkt.res_fp,
        res_mass: kkt.res_mass,
        res_compl: kkt.res_compl,
        gap: dual.map_or(f64::NAN, |d| duality_gap(primal, d)),
        lambda,
    };
    Ok((row, kkt, primal, dual, u, lambda))
}

/// Runs `algorithm` on `problem`.
pub fn solve(problem: &Problem, algorithm: &dyn Algorithm, cfg: &SolverConfig) -> Result<SolveReport> {
    let started = Instant::now();
    algorithm.check_problem(problem)?;
    if cfg.record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    if !(cfg.theta >= 0.0 && cfg.theta <= 1.0) {
        return Err(Error::InvalidParameter(format!("theta = {} must lie in [0, 1]", cfg.theta)));
    }
    let norm = xi_norm(algorithm, problem, cfg.seed);
    let steps = resolve_steps(algorithm, cfg, norm);
    let within = check_steps(algorithm.family(), steps.gamma, steps.tau, norm);
    if let (Err(reason), StepPolicy::Enforce) = (&within, cfg.step_policy) {
        return Err(Error::StepSize(reason.clone()));
    }
    let tol = cfg.tol.unwrap_or_else(|| problem.default_tol());

    let solver = LinearSolverRegistry::with_builtins().build(
        &cfg.linear_solver,
        problem.grid(),
        problem.nu(),
        &cfg.linear,
    )?;
    let op = ConstraintOperator::new(problem.grid(), problem.nu(), solver);
    let ctx = Context {
        problem,
        op: &op,
        steps,
    };
    let start = cfg.start.clone().unwrap_or_else(|| StartPoint::uniform(problem));
    if start.m.grid() != problem.grid() || start.w.grid() != problem.grid() {
        return Err(Error::ShapeMismatch {
            expected: problem.grid().len(),
            found: start.m.grid().len(),
        });
    }
    let mut state = algorithm.start(&ctx, &start)?;

    let mut history = Vec::new();
    let mut prev = state.primal().clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut change = f64::INFINITY;
    for k in 1..=cfg.max_iter {
        state.step(&ctx)?;
        iterations = k;
        let next = state.primal();
        if !next.is_finite() {
            return Err(Error::NonFinite(k));
        }
        change = prev.distance(next);
        converged = change <= tol;
        if k % cfg.record_every == 0 || converged || k == cfg.max_iter {
            history.push(diagnostics_row(&ctx, state.as_ref(), k, change)?.0);
        }
        if converged {
            break;
        }
        prev = next.clone();
    }

    let (_, kkt, primal_value, dual_value, u, lambda) =
        diagnostics_row(&ctx, state.as_ref(), iterations, change)?;
    let y = state.primal().clone();
    Ok(SolveReport {
        algorithm: algorithm.name().to_string(),
        m: y.m,
        w: y.w,
        u,
        lambda,
        iterations,
        converged,
        final_change: change,
        tol,
        steps,
        xi_norm: norm,
        steps_within_bound: within.is_ok(),
        empirical: algorithm.empirical(),
        linear_solver: op.solver_name().to_string(),
        linear_solves: op.solve_count(),
        kkt,
        primal_value,
        dual_value,
        gap: dual_value.map(|d| duality_gap(primal_value, d)),
        history,
        wall_time: started.elapsed(),
    })
}

/// Runs the algorithm registered under `name`.
pub fn solve_by_name(problem: &Problem, name: &str, cfg: &SolverConfig) -> Result<SolveReport> {
    let algorithm = AlgorithmRegistry::with_builtins().get(name)?;
    solve(problem, algorithm.as_ref(), cfg)
}
