//! The four benchmark problems.

use std::sync::Arc;

use crate::coupling::{CubicCoupling, LogCoupling, QuadraticCoupling};
use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};
use crate::problem::Problem;

/// Default width of the Gaussian reference density for benchmark 2.
pub const GAUSSIAN_WIDTH: f64 = 0.1;
/// Bound inside the congested disc.
pub const DISC_BOUND: f64 = 1.0;
/// Bound outside the congested disc.
pub const OUTER_BOUND: f64 = 1.3;
/// Radius of the congested disc centred at the origin.
pub const DISC_RADIUS: f64 = 0.25;

/// Parameters selecting one benchmark configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Experiment {
    /// 1: log coupling with known solution; 2: quadratic coupling around a
    /// Gaussian; 3: cubic coupling, optionally with a density bound;
    /// 4: cubic coupling with a general Hamiltonian exponent.
    pub id: u32,
    pub n: usize,
    pub nu: f64,
    pub q: f64,
    pub constrained: bool,
}

impl Experiment {
    /// The benchmark with its default viscosity and exponent.
    pub fn standard(id: u32, n: usize) -> Self {
        let nu = if id == 4 { 1.0 } else { 0.0 };
        Self {
            id,
            n,
            nu,
            q: 2.0,
            constrained: false,
        }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_q(mut self, q: f64) -> Self {
        self.q = q;
        self
    }

    pub fn constrained(mut self, on: bool) -> Self {
        self.constrained = on;
        self
    }
}

/// Bound field equal to `DISC_BOUND` within periodic distance
/// `DISC_RADIUS` of the origin and `OUTER_BOUND` elsewhere.
pub fn disc_bound(grid: TorusGrid) -> ScalarField {
    disc_bound_with(grid, DISC_RADIUS, DISC_BOUND, OUTER_BOUND)
}

/// Bound field equal to `inner` within periodic distance `radius` of the
/// origin and `outer` elsewhere.
pub fn disc_bound_with(grid: TorusGrid, radius: f64, inner: f64, outer: f64) -> ScalarField {
    ScalarField::from_fn(grid, |x, y| {
        let dx = x.min(1.0 - x);
        let dy = y.min(1.0 - y);
        if dx * dx + dy * dy <= radius * radius {
            inner
        } else {
            outer
        }
    })
}

/// Assembles the problem for `exp`.
pub fn make_test_problem(exp: &Experiment) -> Result<Problem> {
    let grid = TorusGrid::new(exp.n)?;
    let problem = match exp.id {
        1 => Problem::new(grid, exp.nu, exp.q, Arc::new(LogCoupling::sinusoidal(grid)))?,
        2 => {
            let reference = QuadraticCoupling::gaussian_reference(grid, GAUSSIAN_WIDTH);
            Problem::new(grid, exp.nu, exp.q, Arc::new(QuadraticCoupling::new(&reference, 1.0)?))?
        }
        3 | 4 => Problem::new(grid, exp.nu, exp.q, Arc::new(CubicCoupling::trigonometric(grid)))?,
        other => {
            return Err(Error::UnknownName {
                kind: "benchmark",
                name: other.to_string(),
                available: "1, 2, 3, 4".into(),
            })
        }
    };
    if exp.constrained {
        if exp.id != 3 {
            return Err(Error::Unsupported(format!(
                "benchmark {} has no density bound",
                exp.id
            )));
        }
        return problem.with_bound(disc_bound(grid));
    }
    Ok(problem)
}
