use thiserror::Error;

/// Everything that can go wrong while building, solving or simulating a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("characteristic polynomial is not depressed (trace = {trace:e})")]
    NotDepressed { trace: f64 },

    #[error("cubic coefficients are complex (p = {p}, q = {q}); use the numeric solver")]
    ComplexCoefficients { p: String, q: String },

    #[error("flat-band condition violated: |gamma - J sin(phi)| = {residual:e}")]
    FlatBandCondition { residual: f64 },

    #[error("operation requires chiral symmetry (cos(phi) = 0)")]
    NotChiral,

    #[error("compact localized state rejected: {0}")]
    InvalidCls(String),

    #[error("eigensolver failed to converge")]
    NoConvergence,

    #[error("non-finite amplitude at t = {time}")]
    NonFinite { time: f64 },

    #[error("dimension {dim} exceeds dense budget {budget}")]
    OverBudget { dim: usize, budget: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NoConvergence | Error::NonFinite { .. } | Error::OverBudget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
