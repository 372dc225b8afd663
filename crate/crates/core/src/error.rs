use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} exceeds the configured cap of {cap}")]
    CapExceeded {
        what: &'static str,
        value: usize,
        cap: usize,
    },
    #[error("mode index {mode} out of range for {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParameterCount { expected: usize, got: usize },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("parameter `{name}` tags {count} phase shifters; a single occurrence is required here")]
    AmbiguousParameter { name: String, count: usize },
    #[error("photon number mismatch: expected {expected}, got {got}")]
    PhotonMismatch { expected: usize, got: usize },
    #[error("state has {got} modes, expected {expected}")]
    ModeMismatch { expected: usize, got: usize },
    #[error("matrix is not unitary (deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
    #[error("HOM visibility {0} outside [0, 1]")]
    InvalidVisibility(f64),
    #[error("sampling mode requires a diagonalized observable (rotation + outcome values)")]
    NotDiagonalized,
    #[error("dense observables are only defined for fully indistinguishable photons (V = 1)")]
    DenseUnderDistinguishability,
    #[error("post-selection retained zero of {shots} shots")]
    PostSelectionStarved { shots: u64 },
    #[error("shift-rule system infeasible for the given angles (residual {residual:.3e})")]
    InfeasibleShiftRule { residual: f64 },
    #[error("shift-rule coefficients are not real (imaginary part {imag:.3e})")]
    ComplexCoefficients { imag: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("target distribution vanishes at outcome {index} where the model has mass")]
    ZeroTarget { index: usize },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: usize },
}
