//! Problem data shared by every solver.

use std::fmt;
use std::sync::Arc;

use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::grid::{check_exponent, ScalarField, TorusGrid};

/// A discrete stationary MFG: viscosity, Hamiltonian exponent, coupling and
/// an optional upper bound on the density.
#[derive(Clone)]
pub struct Problem {
    grid: TorusGrid,
    nu: f64,
    q: f64,
    coupling: Arc<dyn Coupling>,
    bound: Option<ScalarField>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("n", &self.grid.n())
            .field("nu", &self.nu)
            .field("q", &self.q)
            .field("coupling", &self.coupling.name())
            .field("bounded", &self.bound.is_some())
            .finish()
    }
}

impl Problem {
    pub fn new(grid: TorusGrid, nu: f64, q: f64, coupling: Arc<dyn Coupling>) -> Result<Self> {
        if !(nu >= 0.0) || !nu.is_finite() {
            return Err(Error::InvalidParameter(format!("viscosity nu = {nu} must be >= 0")));
        }
        check_exponent(q)?;
        if coupling.nodes() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: coupling.nodes(),
            });
        }
        Ok(Self {
            grid,
            nu,
            q,
            coupling,
            bound: None,
        })
    }

    /// Adds the density constraint `m <= d` nodewise.
    pub fn with_bound(mut self, bound: ScalarField) -> Result<Self> {
        if bound.grid() != self.grid {
            return Err(Error::ShapeMismatch {
                expected: self.grid.len(),
                found: bound.grid().len(),
            });
        }
        if bound.values().iter().any(|&d| !(d > 0.0)) {
            return Err(Error::InvalidParameter("density bound must be positive".into()));
        }
        self.bound = Some(bound);
        Ok(self)
    }

    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Conjugate exponent `q' = q / (q - 1)`.
    pub fn q_conj(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    pub fn coupling(&self) -> &dyn Coupling {
        self.coupling.as_ref()
    }

    pub fn coupling_arc(&self) -> Arc<dyn Coupling> {
        self.coupling.clone()
    }

    pub fn bound(&self) -> Option<&ScalarField> {
        self.bound.as_ref()
    }

    /// Bound at `node`, `+inf` when unconstrained.
    pub fn bound_at(&self, node: usize) -> f64 {
        self.bound.as_ref().map_or(f64::INFINITY, |d| d[node])
    }

    /// Default stopping threshold `h^3 / 5`.
    pub fn default_tol(&self) -> f64 {
        self.grid.h().powi(3) / 5.0
    }
}
