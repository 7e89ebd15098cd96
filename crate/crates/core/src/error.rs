use thiserror::Error;

/// Errors produced by the simulator and estimators.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported constellation: {0}")]
    UnsupportedConstellation(String),

    #[error("moment order {0} is not an even integer")]
    OddMomentOrder(usize),

    #[error("moment order {order} exceeds configured maximum {max}")]
    MomentOrderTooLarge { order: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("polynomial order not supported here: {0}")]
    UnsupportedOrder(String),

    #[error("zero input power at antenna {0}")]
    ZeroInputPower(usize),

    #[error("distorted pilot of UE {0} has zero energy")]
    ZeroEnergyPilot(usize),

    #[error("pilot book is not orthogonal")]
    NonOrthogonalPilots,

    #[error("matrix is not Hermitian positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("distortion correlation is not PSD at diagonal {index}: residue {residue:e}")]
    NotPsd { index: usize, residue: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("training diverged at epoch {epoch}: validation loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing model file: {0}")]
    MissingModel(String),

    #[error("output {path} was written by a different configuration ({found} != {expected})")]
    ConfigMismatch {
        path: String,
        found: String,
        expected: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
