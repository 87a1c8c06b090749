use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolyhamError {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite sample at flat index {0}")]
    NonFinite(usize),

    #[error("coefficients are not Hermitian (max asymmetry {0:e}); refusing real output")]
    NotHermitian(f64),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("singular Lagrangian: {0}")]
    SingularLagrangian(String),

    #[error("alpha = {alpha} lies outside the growth window (0, pi/(sqrt(p)*max T) = {upper})")]
    AlphaWindow { alpha: f64, upper: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mode system singular at k = {k:?}")]
    SingularMode { k: Vec<i64> },

    #[error("unknown Hamiltonian family `{0}`")]
    UnknownFamily(String),

    #[error("MTHF format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PolyhamError>;
