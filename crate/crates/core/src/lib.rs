//! Exact and sampled simulation of parameterized linear-optical circuits,
//! analytic gradients by photon-number shift rules, and variational
//! experiments built on them.

// NaN must fail these checks, so `!(x > 0.0)` is deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod fock;
pub mod instances;
pub mod interferometer;
pub mod losses;
pub mod optimizers;
pub mod sampling;
pub mod shift_rules;

pub use error::{Error, Result};
pub use fock::{Caps, FockBasis, FockState, StateVector};
pub use interferometer::{BoundCircuit, Component, ModeUnitary, ParamCircuit};
pub use sampling::{Estimate, MeasuredTerm, NoiseModel, Observable, Shots};
