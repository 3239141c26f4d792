//! Periodic grid, discrete fields and the finite-difference operators on the
//! unit 2-torus.
//!
//! Node `(i, j)` sits at `x = i h`, `y = j h` with `h = 1 / n`. Field storage
//! is i-fastest (`index = i + n j`). All neighbour lookups wrap modulo `n`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// The four upwind slots of a flux: `(w1, w2, w3, w4)`.
pub type Flux = [f64; 4];

/// Uniform periodic `n x n` grid with step `h = 1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TorusGrid {
    n: usize,
}

impl TorusGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(n));
        }
        Ok(Self { n })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n * j
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    /// Physical position of node `k`.
    #[inline]
    pub fn position(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.coords(k);
        (i as f64 * self.h(), j as f64 * self.h())
    }

    #[inline]
    fn ip(&self, i: usize) -> usize {
        if i + 1 == self.n {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    fn im(&self, i: usize) -> usize {
        if i == 0 {
            self.n - 1
        } else {
            i - 1
        }
    }

    /// Index of `(i+1, j)`.
    #[inline]
    pub fn east(&self, k: usize) -> usize {
        let (i, j) = self.coords(k);
        self.index(self.ip(i), j)
    }

    /// Index of `(i-1, j)`.
    #[inline]
    pub fn west(&self, k: usize) -> usize {
        let (i, j) = self.coords(k);
        self.index(self.im(i), j)
    }

    /// Index of `(i, j+1)`.
    #[inline]
    pub fn north(&self, k: usize) -> usize {
        let (i, j) = self.coords(k);
        self.index(i, self.ip(j))
    }

    /// Index of `(i, j-1)`.
    #[inline]
    pub fn south(&self, k: usize) -> usize {
        let (i, j) = self.coords(k);
        self.index(i, self.im(j))
    }
}

/// One real value per node (density, value function, bound, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_vec(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x, y)` at the nodes.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.position(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `h^2 * sum(values)`, the discrete integral.
    pub fn mass(&self) -> f64 {
        let h = self.grid.h();
        h * h * self.sum()
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &ScalarField) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        self.map(|v| alpha * v)
    }

    pub fn add_scalar(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    /// Subtracts the arithmetic mean.
    pub fn zero_mean(&self) -> Self {
        let mean = self.sum() / self.values.len() as f64;
        self.add_scalar(-mean)
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

/// One `R^4` flux per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    grid: TorusGrid,
    values: Vec<Flux>,
}

impl FluxField {
    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            values: vec![[0.0; 4]; grid.len()],
        }
    }

    pub fn from_vec(grid: TorusGrid, values: Vec<Flux>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn grid(&self) -> TorusGrid {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[Flux] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [Flux] {
        &mut self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Whether every node flux lies in `K = R+ x R- x R+ x R-`.
    pub fn is_admissible(&self) -> bool {
        self.values.iter().all(|w| in_cone(w))
    }

    pub fn dot(&self, other: &FluxField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| dot4(a, b))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn axpy(&self, alpha: f64, other: &FluxField) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| {
                    [
                        a[0] + alpha * b[0],
                        a[1] + alpha * b[1],
                        a[2] + alpha * b[2],
                        a[3] + alpha * b[3],
                    ]
                })
                .collect(),
        }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|a| [alpha * a[0], alpha * a[1], alpha * a[2], alpha * a[3]])
                .collect(),
        }
    }
}

impl Index<usize> for FluxField {
    type Output = Flux;
    fn index(&self, k: usize) -> &Flux {
        &self.values[k]
    }
}

impl IndexMut<usize> for FluxField {
    fn index_mut(&mut self, k: usize) -> &mut Flux {
        &mut self.values[k]
    }
}

#[inline]
pub fn dot4(a: &Flux, b: &Flux) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
pub fn norm4(a: &Flux) -> f64 {
    dot4(a, a).sqrt()
}

#[inline]
pub fn in_cone(w: &Flux) -> bool {
    w[0] >= 0.0 && w[1] <= 0.0 && w[2] >= 0.0 && w[3] <= 0.0
}

/// Projection onto `K = R+ x R- x R+ x R-`.
#[inline]
pub fn project_cone(w: &Flux) -> Flux {
    [w[0].max(0.0), w[1].min(0.0), w[2].max(0.0), w[3].min(0.0)]
}

/// Projection onto the polar cone `K^-`; `w = P_K w + P_{K^-} w`.
#[inline]
pub fn project_polar(w: &Flux) -> Flux {
    [w[0].min(0.0), w[1].max(0.0), w[2].min(0.0), w[3].max(0.0)]
}

#[inline]
fn pos(a: f64) -> f64 {
    a.max(0.0)
}

#[inline]
fn neg(a: f64) -> f64 {
    a.max(0.0) - a
}

fn check_grids(a: TorusGrid, b: TorusGrid) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Forward differences `(D1 y)_{i,j}` and `(D2 y)_{i,j}` at every node.
fn forward_differences(y: &ScalarField) -> (Vec<f64>, Vec<f64>) {
    let g = y.grid();
    let inv_h = g.n() as f64;
    let v = y.values();
    let d1 = (0..g.len()).map(|k| (v[g.east(k)] - v[k]) * inv_h).collect();
    let d2 = (0..g.len()).map(|k| (v[g.north(k)] - v[k]) * inv_h).collect();
    (d1, d2)
}

/// `[D_h y]_{i,j} = ((D1 y)_{i,j}, (D1 y)_{i-1,j}, (D2 y)_{i,j}, (D2 y)_{i,j-1})`.
pub fn dh_stencil(y: &ScalarField) -> FluxField {
    let g = y.grid();
    let (d1, d2) = forward_differences(y);
    let values = (0..g.len())
        .map(|k| [d1[k], d1[g.west(k)], d2[k], d2[g.south(k)]])
        .collect();
    FluxField { grid: g, values }
}

/// Upwind gradient `((D1 y)^-, -(D1 y)^+_{i-1}, (D2 y)^-, -(D2 y)^+_{j-1})`.
pub fn hat_dh(y: &ScalarField) -> FluxField {
    let g = y.grid();
    let (d1, d2) = forward_differences(y);
    let values = (0..g.len())
        .map(|k| {
            [
                neg(d1[k]),
                -pos(d1[g.west(k)]),
                neg(d2[k]),
                -pos(d2[g.south(k)]),
            ]
        })
        .collect();
    FluxField { grid: g, values }
}

/// Five-point periodic Laplacian.
pub fn laplacian(y: &ScalarField) -> ScalarField {
    let g = y.grid();
    let inv_h2 = (g.n() * g.n()) as f64;
    let v = y.values();
    let values = (0..g.len())
        .map(|k| {
            -(4.0 * v[k] - v[g.east(k)] - v[g.west(k)] - v[g.north(k)] - v[g.south(k)]) * inv_h2
        })
        .collect();
    ScalarField { grid: g, values }
}

/// `(A m) = -nu Delta_h m`. Self-adjoint.
pub fn apply_a(m: &ScalarField, nu: f64) -> ScalarField {
    laplacian(m).scale(-nu)
}

/// Discrete divergence
/// `(Bw)_{i,j} = (D1 w1)_{i-1,j} + (D1 w2)_{i,j} + (D2 w3)_{i,j-1} + (D2 w4)_{i,j}`.
pub fn apply_b(w: &FluxField) -> ScalarField {
    let g = w.grid();
    let inv_h = g.n() as f64;
    let v = w.values();
    let values = (0..g.len())
        .map(|k| {
            let (e, wst, n, s) = (g.east(k), g.west(k), g.north(k), g.south(k));
            ((v[k][0] - v[wst][0]) + (v[e][1] - v[k][1]) + (v[k][2] - v[s][2])
                + (v[n][3] - v[k][3]))
                * inv_h
        })
        .collect();
    ScalarField { grid: g, values }
}

/// `B* y = -[D_h y]`.
pub fn apply_bstar(y: &ScalarField) -> FluxField {
    dh_stencil(y).scale(-1.0)
}

/// Nodewise projection onto `K`.
pub fn project_k(w: &FluxField) -> FluxField {
    FluxField {
        grid: w.grid(),
        values: w.values().iter().map(project_cone).collect(),
    }
}

/// Orthogonal projection onto `{h^2 sum m = 1}`: `m + (1 - h^2 sum m) 1`.
pub fn project_mass(m: &ScalarField) -> ScalarField {
    let shift = 1.0 - m.mass();
    m.add_scalar(shift)
}

/// `|hat[D_h u]|^{(2-q)/(q-1)}`, set to zero wherever the upwind gradient
/// vanishes.
#[inline]
pub(crate) fn feedback_factor(hat: &Flux, q: f64) -> f64 {
    let norm = norm4(hat);
    if norm == 0.0 {
        0.0
    } else {
        norm.powf((2.0 - q) / (q - 1.0))
    }
}

/// Discrete transport term `T_{i,j}(u, m)` (the left side of the stencil
/// divided by `h`).
pub fn transport(u: &ScalarField, m: &ScalarField, q: f64) -> Result<ScalarField> {
    check_grids(u.grid(), m.grid())?;
    check_exponent(q)?;
    let g = u.grid();
    let inv_h = g.n() as f64;
    let (d1, d2) = forward_differences(u);
    let hat = hat_dh(u);
    let mv = m.values();
    // mk[k] = m_k |hat_k|^{(2-q)/(q-1)}
    let mk: Vec<f64> = (0..g.len())
        .map(|k| mv[k] * feedback_factor(&hat[k], q))
        .collect();
    let values = (0..g.len())
        .map(|k| {
            let (e, wst, n, s) = (g.east(k), g.west(k), g.north(k), g.south(k));
            let t = -mk[k] * neg(d1[k]) + mk[wst] * neg(d1[wst]) + mk[e] * pos(d1[k])
                - mk[k] * pos(d1[wst])
                - mk[k] * neg(d2[k])
                + mk[s] * neg(d2[s])
                + mk[n] * pos(d2[k])
                - mk[k] * pos(d2[s]);
            t * inv_h
        })
        .collect();
    Ok(ScalarField { grid: g, values })
}

/// Feedback flux `w = m |hat[D_h u]|^{(2-q)/(q-1)} hat[D_h u]`.
pub fn flux_from_value(u: &ScalarField, m: &ScalarField, q: f64) -> Result<FluxField> {
    check_grids(u.grid(), m.grid())?;
    check_exponent(q)?;
    if let Some(k) = m.values().iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeDensity {
            node: k,
            value: m[k],
        });
    }
    let hat = hat_dh(u);
    let values = hat
        .values()
        .iter()
        .zip(m.values())
        .map(|(d, &mk)| {
            let c = mk * feedback_factor(d, q);
            [c * d[0], c * d[1], c * d[2], c * d[3]]
        })
        .collect();
    Ok(FluxField {
        grid: u.grid(),
        values,
    })
}

pub(crate) fn check_exponent(q: f64) -> Result<()> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("exponent q = {q} must be > 1")));
    }
    Ok(())
}
