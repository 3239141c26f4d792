//! The constraint operator `G(m, w) = (A m + B w, h^2 sum m)`, solves with
//! `M = A A* + B B*` on zero-mean fields, the projection onto
//! `V = {G(m, w) = (0, 1)}` and operator-norm estimation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{apply_a, apply_b, apply_bstar, FluxField, ScalarField, TorusGrid};

/// A point `(m, w)` of the primal space, also used for dual variables living
/// in the same space.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    pub m: ScalarField,
    pub w: FluxField,
}

impl FieldPair {
    pub fn new(m: ScalarField, w: FluxField) -> Self {
        Self { m, w }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::new(ScalarField::zeros(grid), FluxField::zeros(grid))
    }

    /// Uniform unit density with zero flux.
    pub fn uniform(grid: TorusGrid) -> Self {
        Self::new(ScalarField::constant(grid, 1.0), FluxField::zeros(grid))
    }

    pub fn axpy(&self, alpha: f64, other: &FieldPair) -> Self {
        Self::new(self.m.axpy(alpha, &other.m), self.w.axpy(alpha, &other.w))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::new(self.m.scale(alpha), self.w.scale(alpha))
    }

    pub fn dot(&self, other: &FieldPair) -> f64 {
        self.m.dot(&other.m) + self.w.dot(&other.w)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Euclidean norm of `self - other` on the stacked vector.
    pub fn distance(&self, other: &FieldPair) -> f64 {
        self.axpy(-1.0, other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.m.is_finite() && self.w.is_finite()
    }
}

/// Solver for `M x = r` on zero-mean fields.
pub trait SaddleSolve: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, rhs: &ScalarField) -> Result<ScalarField>;
}

/// `M x = nu^2 Delta^2 x - 2 Delta x`, assembled from the operators.
pub fn apply_m(x: &ScalarField, nu: f64) -> ScalarField {
    apply_a(&apply_a(x, nu), nu).axpy(1.0, &apply_b(&apply_bstar(x)))
}

/// Diagonalises `M` with the 2-D DFT; exact up to roundoff.
pub struct FftSolver {
    grid: TorusGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    inv_symbol: Vec<f64>,
}

impl FftSolver {
    pub fn new(grid: TorusGrid, nu: f64) -> Self {
        let n = grid.n();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let inv_h2 = (n * n) as f64;
        let theta = |k: usize| 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        let inv_symbol = (0..grid.len())
            .map(|idx| {
                let (k, l) = grid.coords(idx);
                if k == 0 && l == 0 {
                    return 0.0;
                }
                let mu = (4.0 - 2.0 * theta(k).cos() - 2.0 * theta(l).cos()) * inv_h2;
                1.0 / (nu * nu * mu * mu + 2.0 * mu)
            })
            .collect();
        Self {
            grid,
            forward,
            inverse,
            inv_symbol,
        }
    }

    fn transform(&self, data: &mut [Complex<f64>], fft: &dyn Fft<f64>) {
        let n = self.grid.n();
        for row in data.chunks_mut(n) {
            fft.process(row);
        }
        let mut column = vec![Complex::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                column[j] = data[i + n * j];
            }
            fft.process(&mut column);
            for j in 0..n {
                data[i + n * j] = column[j];
            }
        }
    }
}

impl SaddleSolve for FftSolver {
    fn name(&self) -> &'static str {
        "fft"
    }

    fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let mut data: Vec<Complex<f64>> = rhs.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut data, self.forward.as_ref());
        for (z, s) in data.iter_mut().zip(&self.inv_symbol) {
            *z *= *s;
        }
        self.transform(&mut data, self.inverse.as_ref());
        let scale = 1.0 / self.grid.len() as f64;
        ScalarField::from_vec(self.grid, data.iter().map(|z| z.re * scale).collect())
    }
}

/// Cholesky factorisation of `M + alpha 1 1^T`, whose restriction to
/// zero-mean right-hand sides solves the singular system.
pub struct DenseSolver {
    grid: TorusGrid,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl DenseSolver {
    pub fn new(grid: TorusGrid, nu: f64) -> Result<Self> {
        let len = grid.len();
        let mut mat = DMatrix::<f64>::zeros(len, len);
        let mut unit = ScalarField::zeros(grid);
        for col in 0..len {
            unit[col] = 1.0;
            let image = apply_m(&unit, nu);
            for (row, &v) in image.values().iter().enumerate() {
                mat[(row, col)] = v;
            }
            unit[col] = 0.0;
        }
        let shift = mat.diagonal().mean() / len as f64;
        mat.add_scalar_mut(shift);
        let factor = mat.cholesky().ok_or(Error::LinearSolver {
            residual: f64::NAN,
            iterations: 0,
        })?;
        Ok(Self { grid, factor })
    }
}

impl SaddleSolve for DenseSolver {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let b = DVector::from_column_slice(rhs.zero_mean().values());
        let x = self.factor.solve(&b);
        Ok(ScalarField::from_vec(self.grid, x.as_slice().to_vec())?.zero_mean())
    }
}

/// Matrix-free conjugate gradients with a Jacobi (constant diagonal)
/// preconditioner, iterating on zero-mean fields.
pub struct CgSolver {
    nu: f64,
    diag: f64,
    tol: f64,
    max_iter: usize,
}

impl CgSolver {
    pub fn new(grid: TorusGrid, nu: f64, tol: f64, max_iter: usize) -> Self {
        let inv_h2 = (grid.n() * grid.n()) as f64;
        Self {
            nu,
            diag: nu * nu * 20.0 * inv_h2 * inv_h2 + 8.0 * inv_h2,
            tol,
            max_iter,
        }
    }
}

impl SaddleSolve for CgSolver {
    fn name(&self) -> &'static str {
        "cg"
    }

    fn solve(&self, rhs: &ScalarField) -> Result<ScalarField> {
        let b = rhs.zero_mean();
        let bnorm = b.norm();
        let mut x = ScalarField::zeros(rhs.grid());
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b;
        let mut z = r.scale(1.0 / self.diag);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        for it in 0..self.max_iter {
            let ap = apply_m(&p, self.nu);
            let alpha = rz / p.dot(&ap);
            x = x.axpy(alpha, &p);
            r = r.axpy(-alpha, &ap).zero_mean();
            let rnorm = r.norm();
            if rnorm <= self.tol * bnorm {
                return Ok(x.zero_mean());
            }
            if it + 1 == self.max_iter {
                return Err(Error::LinearSolver {
                    residual: rnorm / bnorm,
                    iterations: self.max_iter,
                });
            }
            z = r.scale(1.0 / self.diag);
            let rz_next = r.dot(&z);
            p = z.axpy(rz_next / rz, &p);
            rz = rz_next;
        }
        Ok(x.zero_mean())
    }
}

/// Options forwarded to linear-solver factories.
#[derive(Debug, Clone, Copy)]
pub struct LinearOptions {
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for LinearOptions {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            cg_max_iter: 5000,
        }
    }
}

type LinearFactory =
    Arc<dyn Fn(TorusGrid, f64, &LinearOptions) -> Result<Box<dyn SaddleSolve>> + Send + Sync>;

/// Linear solvers constructible by name.
#[derive(Clone)]
pub struct LinearSolverRegistry {
    factories: BTreeMap<String, LinearFactory>,
}

impl fmt::Debug for LinearSolverRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for LinearSolverRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl LinearSolverRegistry {
    pub fn with_builtins() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("fft", |g, nu, _| Ok(Box::new(FftSolver::new(g, nu))));
        reg.register("dense", |g, nu, _| Ok(Box::new(DenseSolver::new(g, nu)?)));
        reg.register("cg", |g, nu, o| {
            Ok(Box::new(CgSolver::new(g, nu, o.cg_tol, o.cg_max_iter)))
        });
        reg
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(TorusGrid, f64, &LinearOptions) -> Result<Box<dyn SaddleSolve>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Arc::new(factory));
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn build(&self, name: &str, grid: TorusGrid, nu: f64, opts: &LinearOptions) -> Result<Box<dyn SaddleSolve>> {
        let f = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: "linear solver",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        f(grid, nu, opts)
    }
}

/// `G`, its adjoint and the projections built from `(G G*)^{-1}`.
pub struct ConstraintOperator {
    grid: TorusGrid,
    nu: f64,
    solver: Box<dyn SaddleSolve>,
    solves: AtomicUsize,
}

impl fmt::Debug for ConstraintOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintOperator")
            .field("n", &self.grid.n())
            .field("nu", &self.nu)
            .field("solver", &self.solver.name())
            .finish()
    }
}

impl ConstraintOperator {
    pub fn new(grid: TorusGrid, nu: f64, solver: Box<dyn SaddleSolve>) -> Self {
        Self {
            grid,
            nu,
            solver,
            solves: AtomicUsize::new(0),
        }
    }

    /// Operator backed by the spectral solver.
    pub fn with_fft(grid: TorusGrid, nu: f64) -> Self {
        Self::new(grid, nu, Box::new(FftSolver::new(grid, nu)))
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn solver_name(&self) -> &'static str {
        self.solver.name()
    }

    /// Number of linear solves performed so far.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// `G(m, w) = (A m + B w, h^2 sum m)`.
    pub fn apply_g(&self, m: &ScalarField, w: &FluxField) -> (ScalarField, f64) {
        (apply_a(m, self.nu).axpy(1.0, &apply_b(w)), m.mass())
    }

    /// `G*(u, lambda) = (A u + h^2 lambda 1, B* u)`.
    pub fn apply_gstar(&self, u: &ScalarField, lambda: f64) -> FieldPair {
        let h2 = self.grid.h().powi(2);
        FieldPair::new(apply_a(u, self.nu).add_scalar(h2 * lambda), apply_bstar(u))
    }

    /// Solves `M x = rhs` (rhs is projected to zero mean first).
    pub fn solve_saddle(&self, rhs: &ScalarField) -> Result<ScalarField> {
        self.solves.fetch_add(1, Ordering::Relaxed);
        self.solver.solve(&rhs.zero_mean())
    }

    /// `(G G*)^{-1} G (y, z)`.
    pub fn pullback(&self, x: &FieldPair) -> Result<(ScalarField, f64)> {
        let (first, mass) = self.apply_g(&x.m, &x.w);
        let h2 = self.grid.h().powi(2);
        Ok((self.solve_saddle(&first)?, mass / h2))
    }

    /// Orthogonal projection onto the range of `G*`.
    pub fn project_range(&self, x: &FieldPair) -> Result<FieldPair> {
        let (u, lambda) = self.pullback(x)?;
        Ok(self.apply_gstar(&u, lambda))
    }

    /// Orthogonal projection onto `V = {G(m, w) = (0, 1)}`.
    pub fn project_v(&self, x: &FieldPair) -> Result<FieldPair> {
        let offset = x.axpy(-1.0, &FieldPair::uniform(self.grid));
        Ok(x.axpy(-1.0, &self.project_range(&offset)?))
    }

    /// `prox_{gamma psi*}(x) = x - gamma P_V(x / gamma)` for `psi` the
    /// indicator of `V`.
    pub fn prox_psistar(&self, x: &FieldPair, gamma: f64) -> Result<FieldPair> {
        self.project_range(&x.axpy(-gamma, &FieldPair::uniform(self.grid)))
    }
}

/// Which linear map to measure with [`estimate_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormTarget {
    /// `G` on `(m, w)`.
    Constraint,
    Identity,
    /// `B` on fluxes.
    Divergence,
    /// `A` on scalars.
    Diffusion,
}

pub const NORM_REL_TOL: f64 = 1e-6;
pub const NORM_MAX_ITER: usize = 500;

/// Spectral norm by power iteration on `X* X` from a seeded start vector.
pub fn estimate_norm(target: NormTarget, grid: TorusGrid, nu: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = grid.len();
    let mut draw = || rng.gen_range(-1.0..1.0);
    let m = ScalarField::from_vec(grid, (0..len).map(|_| draw()).collect()).expect("len");
    let w = FluxField::from_vec(grid, (0..len).map(|_| std::array::from_fn(|_| draw())).collect())
        .expect("len");
    let op = ConstraintOperator::with_fft(grid, nu);
    match target {
        NormTarget::Identity => 1.0,
        NormTarget::Constraint => power_iteration(FieldPair::new(m, w), |x| {
            let (first, mass) = op.apply_g(&x.m, &x.w);
            op.apply_gstar(&first, mass)
        }, |x| x.norm(), |x, s| x.scale(s), |a, b| a.dot(b)),
        NormTarget::Divergence => power_iteration(w, |x| apply_bstar(&apply_b(x)), |x| x.norm(), |x, s| x.scale(s), |a, b| a.dot(b)),
        NormTarget::Diffusion => power_iteration(m, |x| apply_a(&apply_a(x, nu), nu), |x| x.norm(), |x, s| x.scale(s), |a, b| a.dot(b)),
    }
}

fn power_iteration<T>(
    start: T,
    normal: impl Fn(&T) -> T,
    norm: impl Fn(&T) -> f64,
    scale: impl Fn(&T, f64) -> T,
    dot: impl Fn(&T, &T) -> f64,
) -> f64 {
    let n0 = norm(&start);
    if n0 == 0.0 {
        return 0.0;
    }
    let mut x = scale(&start, 1.0 / n0);
    let mut estimate = 0.0;
    for _ in 0..NORM_MAX_ITER {
        let y = normal(&x);
        let next = dot(&x, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            return 0.0;
        }
        x = scale(&y, 1.0 / ny);
        if (next - estimate).abs() <= NORM_REL_TOL * next.abs() {
            estimate = next;
            break;
        }
        estimate = next;
    }
    estimate.max(0.0).sqrt()
}
