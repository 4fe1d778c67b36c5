use alloc::string::String;

/// Errors raised by the simulator and verifier.
///
/// Validation variants carry the measured deviation so callers can report
/// how far an input is from satisfying the violated invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not Hermitian: max |m - m^dag| = {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("trace is not one: trace = {trace}")]
    TraceNotOne { trace: f64 },
    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("state is not normalized: squared norm = {norm_sq}")]
    NotNormalized { norm_sq: f64 },
    #[error("matrix is not unitary: max |U^dag U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },
    #[error("state is not pure: purity = {purity}")]
    NotPure { purity: f64 },
    #[error("entries must be finite")]
    NonFinite,
    #[error("shape error: {0}")]
    Shape(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid channel spec: {0}")]
    InvalidSpec(String),
    #[error("noise parameter {gamma} outside [0, 1]")]
    GammaOutOfRange { gamma: f64 },
    #[error("finite-difference step {step} outside (0, 1e-2]")]
    StepTooLarge { step: f64 },
    #[error("pre- and postselected states are orthogonal: overlap = {overlap:e}")]
    OrthogonalStates { overlap: f64 },
    #[error("postselected state is orthogonal to the noisy preselected state: overlap = {overlap:e}")]
    OrthogonalStatesAfterNoise { overlap: f64 },
    #[error("probe grid too coarse: spacing {spacing} exceeds {max_spacing}")]
    GridTooCoarse { spacing: f64, max_spacing: f64 },
    #[error("invalid probe grid: {0}")]
    InvalidGrid(String),
    #[error("postselection probability is zero")]
    ZeroPostselectProbability,
    #[error("parameter {name} = {value} is excluded from this family")]
    ExcludedParameter { name: &'static str, value: f64 },
    #[error("channel does not belong to the class required by {0}")]
    ChannelClassMismatch(&'static str),
    #[error("invalid noise-parameter grid: {0}")]
    InvalidGammaGrid(String),
    #[error("cannot fit a slope: fewer than two errors above the floor")]
    DegenerateFit,
    #[error("relative Lindblad rate {rate} outside (0, 1] or maximum rate differs from one")]
    RateOutOfRange { rate: f64 },
    #[error("theory mean of the bias is zero; Chebyshev bound undefined")]
    MeanZero,
    #[error("{0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
