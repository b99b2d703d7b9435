use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    /// A factorization failed while orthonormalizing the given node (tree) or site (chain).
    #[error("factorization did not converge at {location}")]
    NonConvergence { location: String },
    #[error("memory cap exceeded: {requested} complex entries requested, cap is {cap}")]
    MemoryCapExceeded { requested: usize, cap: usize },
    #[error("{qubits} qubits exceeds the dense contraction cap of {cap}")]
    TooManyQubits { qubits: usize, cap: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Parse(#[from] serde_json::Error),
}

impl SimError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SimError::Invalid(msg.into())
    }

    pub(crate) fn at(location: impl Into<String>) -> impl FnOnce(TensorError) -> SimError {
        let location = location.into();
        move |e| match e {
            TensorError::NoConvergence { .. } | TensorError::NonFinite => {
                SimError::NonConvergence { location }
            }
            other => SimError::Tensor(other),
        }
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;
