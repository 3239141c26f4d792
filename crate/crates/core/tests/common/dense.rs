//! Dense assembly of the grid operators for spectral checks.

use mfgprox::grid::{apply_a, apply_b, FluxField, ScalarField, TorusGrid};
use mfgprox::saddle::ConstraintOperator;
use nalgebra::DMatrix;

/// Dense matrix of a linear map given by its action on unit vectors.
pub fn assemble(rows: usize, cols: usize, apply: impl Fn(usize) -> Vec<f64>) -> DMatrix<f64> {
    let mut mat = DMatrix::zeros(rows, cols);
    for j in 0..cols {
        for (i, v) in apply(j).into_iter().enumerate() {
            mat[(i, j)] = v;
        }
    }
    mat
}

pub fn largest_singular_value(mat: DMatrix<f64>) -> f64 {
    mat.singular_values().max()
}

pub fn scalar_unit(g: TorusGrid, j: usize) -> ScalarField {
    let mut e = ScalarField::zeros(g);
    e[j] = 1.0;
    e
}

pub fn flux_unit(g: TorusGrid, j: usize) -> FluxField {
    let mut e = FluxField::zeros(g);
    e[j / 4][j % 4] = 1.0;
    e
}

/// Largest singular values of `(G, B, A)` on an `n x n` grid.
pub fn dense_norms(n: usize, nu: f64) -> (f64, f64, f64) {
    let g = TorusGrid::new(n).unwrap();
    let len = g.len();
    let op = ConstraintOperator::with_fft(g, nu);
    // columns: m first, then the four flux components nodewise
    let gmat = assemble(len + 1, 5 * len, |j| {
        let (first, mass) = if j < len {
            op.apply_g(&scalar_unit(g, j), &FluxField::zeros(g))
        } else {
            op.apply_g(&ScalarField::zeros(g), &flux_unit(g, j - len))
        };
        let mut col = first.into_vec();
        col.push(mass);
        col
    });
    let bmat = assemble(len, 4 * len, |j| apply_b(&flux_unit(g, j)).into_vec());
    let amat = assemble(len, len, |j| apply_a(&scalar_unit(g, j), nu).into_vec());
    (
        largest_singular_value(gmat),
        largest_singular_value(bmat),
        largest_singular_value(amat),
    )
}
