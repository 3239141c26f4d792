//! Local couplings `F(x, m)` and their conjugates, with a name-keyed registry.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, TorusGrid};
use crate::roots::{grow_upper, safeguarded_newton};

/// A convex local cost `F(x_k, m)` on `m >= 0`, node by node.
pub trait Coupling: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Number of grid nodes this coupling is sampled on.
    fn nodes(&self) -> usize;

    /// `F(x_k, m)`; `+inf` for `m < 0`.
    fn value(&self, node: usize, m: f64) -> f64;

    /// `f(x_k, m) = dF/dm` for `m > 0`.
    fn deriv(&self, node: usize, m: f64) -> f64;

    /// `d^2F/dm^2` for `m > 0`.
    fn second_deriv(&self, node: usize, m: f64) -> f64;

    /// The right derivative at zero, `None` when it is `-inf`.
    fn deriv_at_zero(&self, node: usize) -> Option<f64>;

    /// `(F*)'(x_k, eta)`, the inverse of `f` extended by zero.
    fn conj_deriv(&self, _node: usize, _eta: f64) -> Option<f64> {
        None
    }

    /// `F*(x_k, eta)`.
    fn conj_value(&self, _node: usize, _eta: f64) -> Option<f64> {
        None
    }

    fn has_conjugate(&self) -> bool {
        self.nodes() > 0 && self.conj_value(0, 0.0).is_some() && self.conj_deriv(0, 0.0).is_some()
    }
}

/// `f` evaluated on a density field.
pub fn eval_deriv_field(coupling: &dyn Coupling, m: &ScalarField) -> ScalarField {
    let values = m
        .values()
        .iter()
        .enumerate()
        .map(|(k, &mk)| {
            if mk > 0.0 {
                coupling.deriv(k, mk)
            } else {
                coupling.deriv_at_zero(k).unwrap_or(f64::NEG_INFINITY)
            }
        })
        .collect();
    ScalarField::from_vec(m.grid(), values).expect("same grid")
}

/// `prox_{gamma F}(m)`: the `z >= 0` with `z + gamma F'(z) = m`, or `0` when
/// `m <= gamma F'(0)`.
pub fn prox_gamma_f_scalar(m: f64, node: usize, gamma: f64, coupling: &dyn Coupling) -> Result<f64> {
    if let Some(f0) = coupling.deriv_at_zero(node) {
        if m <= gamma * f0 {
            return Ok(0.0);
        }
    }
    let g = |z: f64| {
        if z <= 0.0 {
            match coupling.deriv_at_zero(node) {
                Some(f0) => gamma * f0 - m,
                None => f64::NEG_INFINITY,
            }
        } else {
            z + gamma * coupling.deriv(node, z) - m
        }
    };
    let hi = grow_upper(g, 0.0, m.abs().max(1.0))?;
    safeguarded_newton(
        |z| {
            let d = if z > 0.0 {
                1.0 + gamma * coupling.second_deriv(node, z)
            } else {
                f64::NAN
            };
            (g(z), d)
        },
        0.0,
        hi,
    )
}

fn sample(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    ScalarField::from_fn(grid, f).into_vec()
}

/// `F(x, m) = m log m - m - m S(x)`, so `f = log m - S` and `F* = exp(eta + S)`.
#[derive(Debug, Clone)]
pub struct LogCoupling {
    potential: Vec<f64>,
}

impl LogCoupling {
    /// Potential `S(x, y) = sin 2 pi x + sin 2 pi y`.
    pub fn sinusoidal(grid: TorusGrid) -> Self {
        Self {
            potential: sample(grid, |x, y| (2.0 * PI * x).sin() + (2.0 * PI * y).sin()),
        }
    }

    pub fn with_potential(potential: &ScalarField) -> Self {
        Self {
            potential: potential.values().to_vec(),
        }
    }
}

impl Coupling for LogCoupling {
    fn name(&self) -> &str {
        "log"
    }
    fn nodes(&self) -> usize {
        self.potential.len()
    }
    fn value(&self, node: usize, m: f64) -> f64 {
        if m < 0.0 {
            f64::INFINITY
        } else if m == 0.0 {
            0.0
        } else {
            m * m.ln() - m - m * self.potential[node]
        }
    }
    fn deriv(&self, node: usize, m: f64) -> f64 {
        m.ln() - self.potential[node]
    }
    fn second_deriv(&self, _node: usize, m: f64) -> f64 {
        1.0 / m
    }
    fn deriv_at_zero(&self, _node: usize) -> Option<f64> {
        None
    }
    fn conj_deriv(&self, node: usize, eta: f64) -> Option<f64> {
        Some((eta + self.potential[node]).exp())
    }
    fn conj_value(&self, node: usize, eta: f64) -> Option<f64> {
        Some((eta + self.potential[node]).exp())
    }
}

/// `F(x, m) = r (m - mbar(x))^2 / 2` on `m >= 0`.
#[derive(Debug, Clone)]
pub struct QuadraticCoupling {
    stiffness: f64,
    reference: Vec<f64>,
}

impl QuadraticCoupling {
    pub fn new(reference: &ScalarField, stiffness: f64) -> Result<Self> {
        if !(stiffness > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic stiffness r = {stiffness} must be positive"
            )));
        }
        Ok(Self {
            stiffness,
            reference: reference.values().to_vec(),
        })
    }

    /// Gaussian bump of width `s` centred at `(1/2, 1/2)`, normalised to
    /// unit discrete mass.
    pub fn gaussian_reference(grid: TorusGrid, width: f64) -> ScalarField {
        let raw = ScalarField::from_fn(grid, |x, y| {
            (-((x - 0.5).powi(2) + (y - 0.5).powi(2)) / (2.0 * width * width)).exp()
        });
        let mass = raw.mass();
        raw.scale(1.0 / mass)
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }
}

impl Coupling for QuadraticCoupling {
    fn name(&self) -> &str {
        "quadratic"
    }
    fn nodes(&self) -> usize {
        self.reference.len()
    }
    fn value(&self, node: usize, m: f64) -> f64 {
        if m < 0.0 {
            f64::INFINITY
        } else {
            0.5 * self.stiffness * (m - self.reference[node]).powi(2)
        }
    }
    fn deriv(&self, node: usize, m: f64) -> f64 {
        self.stiffness * (m - self.reference[node])
    }
    fn second_deriv(&self, _node: usize, _m: f64) -> f64 {
        self.stiffness
    }
    fn deriv_at_zero(&self, node: usize) -> Option<f64> {
        Some(-self.stiffness * self.reference[node])
    }
    fn conj_deriv(&self, node: usize, eta: f64) -> Option<f64> {
        Some((self.reference[node] + eta / self.stiffness).max(0.0))
    }
    fn conj_value(&self, node: usize, eta: f64) -> Option<f64> {
        let (r, mbar) = (self.stiffness, self.reference[node]);
        Some(if eta >= -r * mbar {
            eta * eta / (2.0 * r) + eta * mbar
        } else {
            -0.5 * r * mbar * mbar
        })
    }
}

/// `F(x, m) = m^3 / 3 - m H(x)`, with `H = sin 2 pi y + sin 2 pi x + cos 4 pi x`
/// by default.
#[derive(Debug, Clone)]
pub struct CubicCoupling {
    potential: Vec<f64>,
}

impl CubicCoupling {
    pub fn trigonometric(grid: TorusGrid) -> Self {
        Self {
            potential: sample(grid, |x, y| {
                (2.0 * PI * y).sin() + (2.0 * PI * x).sin() + (4.0 * PI * x).cos()
            }),
        }
    }

    pub fn with_potential(potential: &ScalarField) -> Self {
        Self {
            potential: potential.values().to_vec(),
        }
    }
}

impl Coupling for CubicCoupling {
    fn name(&self) -> &str {
        "cubic"
    }
    fn nodes(&self) -> usize {
        self.potential.len()
    }
    fn value(&self, node: usize, m: f64) -> f64 {
        if m < 0.0 {
            f64::INFINITY
        } else {
            m * m * m / 3.0 - m * self.potential[node]
        }
    }
    fn deriv(&self, node: usize, m: f64) -> f64 {
        m * m - self.potential[node]
    }
    fn second_deriv(&self, _node: usize, m: f64) -> f64 {
        2.0 * m
    }
    fn deriv_at_zero(&self, node: usize) -> Option<f64> {
        Some(-self.potential[node])
    }
    fn conj_deriv(&self, node: usize, eta: f64) -> Option<f64> {
        Some((eta + self.potential[node]).max(0.0).sqrt())
    }
    fn conj_value(&self, node: usize, eta: f64) -> Option<f64> {
        let s = (eta + self.potential[node]).max(0.0);
        Some(2.0 / 3.0 * s * s.sqrt())
    }
}

/// `F = 0` on `m >= 0`.
#[derive(Debug, Clone)]
pub struct ZeroCoupling {
    nodes: usize,
}

impl ZeroCoupling {
    pub fn new(grid: TorusGrid) -> Self {
        Self { nodes: grid.len() }
    }
}

impl Coupling for ZeroCoupling {
    fn name(&self) -> &str {
        "zero"
    }
    fn nodes(&self) -> usize {
        self.nodes
    }
    fn value(&self, _node: usize, m: f64) -> f64 {
        if m < 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
    fn deriv(&self, _node: usize, _m: f64) -> f64 {
        0.0
    }
    fn second_deriv(&self, _node: usize, _m: f64) -> f64 {
        0.0
    }
    fn deriv_at_zero(&self, _node: usize) -> Option<f64> {
        Some(0.0)
    }
    fn conj_value(&self, _node: usize, eta: f64) -> Option<f64> {
        Some(if eta <= 0.0 { 0.0 } else { f64::INFINITY })
    }
}

/// Named numeric parameters passed to a coupling factory.
pub type CouplingParams = BTreeMap<String, f64>;

type Factory = Arc<dyn Fn(TorusGrid, &CouplingParams) -> Result<Arc<dyn Coupling>> + Send + Sync>;

/// Couplings constructible by name.
#[derive(Clone)]
pub struct CouplingRegistry {
    factories: BTreeMap<String, (Vec<&'static str>, Factory)>,
}

impl fmt::Debug for CouplingRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.factories.keys()).finish()
    }
}

impl Default for CouplingRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl CouplingRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register("log", &[], |g, _| Ok(Arc::new(LogCoupling::sinusoidal(g))));
        reg.register("quadratic", &["r", "width"], |g, p| {
            let r = p.get("r").copied().unwrap_or(1.0);
            let width = p.get("width").copied().unwrap_or(0.1);
            if !(width > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "quadratic width = {width} must be positive"
                )));
            }
            let reference = QuadraticCoupling::gaussian_reference(g, width);
            Ok(Arc::new(QuadraticCoupling::new(&reference, r)?))
        });
        reg.register("cubic", &[], |g, _| Ok(Arc::new(CubicCoupling::trigonometric(g))));
        reg.register("zero", &[], |g, _| Ok(Arc::new(ZeroCoupling::new(g))));
        reg
    }

    /// Registers a factory that accepts the listed parameter names.
    pub fn register<F>(&mut self, name: &str, params: &[&'static str], factory: F)
    where
        F: Fn(TorusGrid, &CouplingParams) -> Result<Arc<dyn Coupling>> + Send + Sync + 'static,
    {
        self.factories
            .insert(name.to_string(), (params.to_vec(), Arc::new(factory)));
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn build(&self, name: &str, grid: TorusGrid, params: &CouplingParams) -> Result<Arc<dyn Coupling>> {
        let (accepted, factory) = self.factories.get(name).ok_or_else(|| Error::UnknownName {
            kind: "coupling",
            name: name.to_string(),
            available: self.names().join(", "),
        })?;
        if let Some(bad) = params.keys().find(|k| !accepted.contains(&k.as_str())) {
            return Err(Error::InvalidParameter(format!(
                "coupling `{name}` has no parameter `{bad}`"
            )));
        }
        factory(grid, params)
    }
}
