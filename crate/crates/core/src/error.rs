use thiserror::Error;

/// Errors raised by the curvature, jet and solver layers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate bilinear form")]
    DegenerateForm,

    #[error("bilinear form is not symmetric at ({0},{1})")]
    AsymmetricForm(usize, usize),

    #[error("singular matrix")]
    SingularMatrix,

    #[error("invalid curvature tensor: {0}")]
    InvalidCurvature(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("incompatible signature ({p},{q}) for {kind}")]
    IncompatibleSignature { p: usize, q: usize, kind: String },

    #[error("no rational orthonormal basis: norm {0} is not a signed rational square")]
    IrrationalNorm(String),

    #[error("frame is not adapted: {0}")]
    NotAdapted(String),

    #[error("model is not conformally flat")]
    NotConformallyFlat,

    #[error("dimension {m} too small: need m >= {min}")]
    DimensionTooSmall { m: usize, min: usize },

    #[error("truncation order {found} too small: need at least {min}")]
    OrderTooSmall { found: usize, min: usize },

    #[error("series has zero constant term")]
    ZeroConstantTerm,

    #[error("matrix square root requires identity constant term")]
    SqrtConstantTerm,

    #[error("variable index {index} out of range for {nvars} variables")]
    BadIndex { index: usize, nvars: usize },

    #[error("series variable count mismatch: {0} vs {1}")]
    VariableMismatch(usize, usize),

    #[error("singular linear block at recursion step {step}")]
    SingularStep { step: usize },

    #[error("residual is not affine in the active block at recursion step {step}")]
    NonAffine { step: usize },

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
