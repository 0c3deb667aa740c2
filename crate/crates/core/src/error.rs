use thiserror::Error;

/// Failure modes of the scattering pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScatError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The trajectory did not leave the interaction region within the time
    /// budget; the energy is trapping (or nearly so) along this ray.
    #[error("time budget {budget:.6e} exhausted before the trajectory left B(0, R0)")]
    TimeBudgetExhausted { budget: f64 },

    #[error("integrator step size underflow at t = {t:.6e}")]
    StepFailure { t: f64 },

    #[error("free-flight segment intersects the support of the potential")]
    SegmentIntersectsSupport,

    #[error("trajectory did not terminate outgoing")]
    NotOutgoing,

    #[error("angular density shows no sign change or threshold crossing on the segment")]
    NoSignChange,

    #[error("branch continuation failed near a degenerate direction pair")]
    BranchContinuationFailed,

    #[error("position-block determinant vanishes on an interval near t = {t:.6e}")]
    TangentZero { t: f64 },

    #[error("branch {index} is degenerate (sigma_hat = {sigma_hat:.3e})")]
    DegenerateBranchPresent { index: usize, sigma_hat: f64 },

    #[error("direction pair admits a degenerate continuum of trajectories")]
    DegenerateFamily,

    #[error("oracle declines: orbiting regime at impact parameter {b}")]
    OrbitingRegime { b: f64 },

    #[error("oracle requires a single centred bump")]
    NotCentral,

    #[error("interference fit diverged: {0}")]
    FitDiverged(String),
}

pub type Result<T> = std::result::Result<T, ScatError>;
