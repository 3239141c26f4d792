//! Proximal splitting solvers for stationary mean field games with local
//! couplings on the discrete 2-torus.
//!
//! The discrete problem minimises a kinetic energy plus a local coupling
//! over densities `m` and upwind fluxes `w` subject to the stationary
//! Fokker-Planck equation and unit mass. Seven first-order schemes are
//! provided behind [`solvers::Algorithm`], selectable by name through
//! [`solvers::AlgorithmRegistry`].

pub mod coupling;
pub mod diagnostics;
pub mod energies;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod io;
pub mod problem;
pub mod roots;
pub mod saddle;
pub mod solvers;

pub use error::{Error, Result};
