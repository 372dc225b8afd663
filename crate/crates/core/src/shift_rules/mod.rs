//! Photon-number parameter-shift rules, gradient estimators and sample-complexity bounds.

pub(crate) mod gradient;
mod hoeffding;
mod rule;
mod spsa;

pub use gradient::{
    commutator_gradient_oracle, fd_gradient, psr_gradient, ExpectationProblem, FiniteDifference, GradientResult,
};
pub use hoeffding::{
    coefficient_norm_scaling, hoeffding_failure_bound, hoeffding_report, HoeffdingReport, NormScaling,
};
pub use rule::{canonical_shift_rule, general_shift_rule, ShiftRule, RESIDUAL_TOL};
pub use spsa::{spsa_estimate, spsa_gradient, SpsaGains};
