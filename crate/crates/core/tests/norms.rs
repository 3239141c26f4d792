mod common;

use common::dense::dense_norms;
use mfgprox::grid::TorusGrid;
use mfgprox::saddle::{estimate_norm, NormTarget};

#[test]
fn power_iteration_matches_dense_svd() {
    let g = TorusGrid::new(8).unwrap();
    for nu in [0.0, 0.1, 1.0] {
        let (gn, bn, an) = dense_norms(8, nu);
        for (target, exact) in [
            (NormTarget::Constraint, gn),
            (NormTarget::Divergence, bn),
            (NormTarget::Diffusion, an),
        ] {
            let est = estimate_norm(target, g, nu, 0);
            let rel = if exact == 0.0 { est.abs() } else { (est - exact).abs() / exact };
            assert!(rel <= 0.01, "{target:?} nu = {nu}: power {est} vs svd {exact}");
        }
    }
}

#[test]
fn estimate_is_reproducible_for_a_seed() {
    let g = TorusGrid::new(8).unwrap();
    let a = estimate_norm(NormTarget::Constraint, g, 0.3, 11);
    let b = estimate_norm(NormTarget::Constraint, g, 0.3, 11);
    assert_eq!(a.to_bits(), b.to_bits());
}
