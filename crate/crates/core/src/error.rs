use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

/// Failures shared by every numerical stage.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-negative spectral parameter {0}: lambda must lie below the essential spectrum [0, +inf)")]
    NonNegativeSpectralParameter(f64),
    #[error("kernel evaluated at non-positive distance {0}")]
    NonPositiveDistance(f64),
    #[error("unsupported dimension {0}; expected 1, 2 or 3")]
    UnsupportedDimension(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid needs {required} bytes, budget is {budget}")]
    MemoryBudget { required: u64, budget: u64 },
    #[error("grid too coarse: {nodes} nodes across the support diameter, need at least 8")]
    UnresolvedSupport { nodes: usize },
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
    #[error("kernel is not symmetric: |L(x,y) - L(y,x)| = {defect:e}")]
    AsymmetricKernel { defect: f64 },
    #[error("supports of wells {0} and {1} overlap")]
    OverlappingSupports(usize, usize),
    #[error("support of well {0} leaves the box")]
    SupportOutsideBox(usize),
    #[error("iteration did not converge: {what}, best residual {residual:e}")]
    NonConvergence { what: String, residual: f64 },
    #[error("lambda = {lambda} lies within {distance:e} of the spectrum; resolvent refused")]
    NearSpectrum { lambda: f64, distance: f64 },
    #[error("operator is not positive definite at shift {0}")]
    Indefinite(f64),
    #[error("ambiguous clustering: levels {0} and {1} are closer than 3 cluster tolerances")]
    AmbiguousCluster(f64, f64),
    #[error("multiplicity pattern mismatch: {0}")]
    PatternMismatch(String),
    #[error("tail window: {0}")]
    TailWindow(String),
    #[error("rate fit refused: {0}")]
    FitRefused(String),
    #[error("expression error at {pos}: {msg}")]
    Expression { pos: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}
