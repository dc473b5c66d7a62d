use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    // space construction / generation
    #[error("graph is disconnected: point {0} is unreachable")]
    DisconnectedGraph(usize),
    #[error("edge ({0}, {1}) has nonpositive length {2}")]
    NonpositiveLength(usize, usize, f64),
    #[error("point {0} has nonpositive measure {1}")]
    NonpositiveMeasure(usize, f64),
    #[error("unknown space kind `{0}`")]
    UnknownKind(String),
    #[error("bad generator parameters: {0}")]
    BadParams(String),
    #[error("comparison triangle perimeter {perimeter} exceeds 2*pi/sqrt(k) = {limit}")]
    PerimeterTooLarge { perimeter: f64, limit: f64 },

    // persistence
    #[error("space file violates schema: {0}")]
    SchemaViolation(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),

    // field / measure operations
    #[error("operands live on different spaces ({0} vs {1} points)")]
    SpaceMismatch(usize, usize),
    #[error("space has {0} points, above the dense solver cap {1}")]
    SizeCap(usize, usize),
    #[error("eigendecomposition failed: {0}")]
    EigFailure(String),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("resolvent requires alpha > 0, got {0}")]
    NonpositiveAlpha(f64),

    // transport
    #[error("marginal totals differ: {0} vs {1}")]
    MarginalMismatch(f64, f64),
    #[error("transport solver failed: {0}")]
    SolverFailure(String),
    #[error("sinkhorn did not converge within {0} iterations (residual {1:.3e})")]
    NoConvergence(usize, f64),
    #[error("time grid too coarse: need at least {0} points, got {1}")]
    GridTooCoarse(usize, usize),
    #[error("index {0} is on the trajectory boundary")]
    BoundaryIndex(usize),
    #[error("density vanishes at point {0}")]
    ZeroDensity(usize),

    // jko
    #[error("inner solver failed: {0}")]
    InnerSolverFailure(String),
    #[error("inner problem infeasible")]
    Infeasible,

    // verification
    #[error("test function must be nonnegative (entry {0} is {1})")]
    NegativeTestFunction(usize, f64),
    #[error("all Gamma values below threshold {0:.3e}; sweep is degenerate")]
    DegenerateGamma(f64),
    #[error("eigenfunction {0} is constant; Lipschitz quotient undefined")]
    ConstantEigenfunction(usize),
    #[error("alpha = {alpha} too small; need alpha > {required}")]
    AlphaTooSmall { alpha: f64, required: f64 },
    #[error("refinement family mismatch: {0}")]
    FamilyMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
