//! Parameterized linear-optical circuits and their Fock-space action.

mod circuit;
mod evolution;
mod light_cone;
mod permanent;

pub use circuit::{unitarity_deviation, Angle, BoundCircuit, BoundComponent, Component, ParamCircuit};
pub use evolution::{compose_unitary, evolve_fock_state, fock_evolve, fock_matrix, output_distribution, ModeUnitary};
pub use light_cone::{light_cone_photon_bound, photon_bound_at};
pub use permanent::{permanent, permanent_capped, DEFAULT_MAX_DIM};
