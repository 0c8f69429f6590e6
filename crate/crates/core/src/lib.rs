//! Isospectral design of one-dimensional Schrödinger potentials.
//!
//! Units: ħ²/2m = 1, so the Hamiltonian is `−d²/dx² + V(x)`.

pub mod bands;
pub mod checks;
pub mod corpus;
pub mod darboux;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod potential;
pub mod solver;

pub use bands::{zones, PeriodicSystem, Zone};
pub use error::{Error, Result};
pub use grid::{integrate, Grid, SampledFn};
pub use lattice::{LatticeBc, LatticeState, LatticeSystem};
pub use potential::{BcKind, BoundState, Delta, Potential, ScatteringResult};
pub use solver::{
    band_discriminant, bound_states, scattering, transfer_determinant, transfer_matrix,
};
