use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed call: wrong dimension, index out of range, point outside the domain.
    #[error("argument error: {0}")]
    Argument(String),

    /// Weight or operator parameter outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// Evaluation at (or within the singularity threshold of) the boundary.
    #[error("boundary singularity: {0}")]
    BoundarySingularity(String),

    /// Request exceeds what the built objects can resolve.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Orthonormalization lost accuracy at the named level.
    #[error("precision error at level {level}: Gram residual {residual:.3e} exceeds {tolerance:.1e}")]
    Precision {
        level: usize,
        residual: f64,
        tolerance: f64,
    },

    /// Spectral truncation cannot reach the requested tail under the basis cap.
    #[error("under-resolved: t = {t} is below the resolvable range for this basis; use t >= {t_needed:.4e}")]
    UnderResolved { t: f64, t_needed: f64 },

    /// Monte Carlo or fit did not reach the required accuracy.
    #[error("insufficient accuracy: {0}")]
    Accuracy(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
