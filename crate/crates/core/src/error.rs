use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |a - a†| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (eigenvalue {eigenvalue:e})")]
    NotPositive { eigenvalue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("state corrupted at t = {t}: {quantity} = {value:e} violates bound {bound:e}")]
    StateCorrupted {
        t: f64,
        quantity: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("jump applied to a state with zero emission amplitude")]
    ZeroNorm,

    #[error("initial state is not pure (second eigenvalue {second_eigenvalue:e})")]
    NotPure { second_eigenvalue: f64 },

    #[error("unknown figure id `{0}`")]
    UnknownFigure(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sweep failed at {axis} = {axis_value}: {source}")]
    Sweep {
        axis: &'static str,
        axis_value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
