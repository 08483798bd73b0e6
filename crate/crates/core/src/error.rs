use crate::batch::SpaceDescriptor;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("transition #{index}: {reason}")]
    InvalidTransition { index: usize, reason: String },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("space descriptor mismatch: {left:?} vs {right:?}")]
    SpaceMismatch {
        left: SpaceDescriptor,
        right: SpaceDescriptor,
    },
    #[error("density fit failed for action {action}: {reason}")]
    DensityFit { action: usize, reason: String },
    #[error("no fitted density for action {0}")]
    UnfittedAction(usize),
    #[error("transition model row ({state}, {action}) sums to {sum}")]
    NotNormalized { state: usize, action: usize, sum: f64 },
    #[error("unknown environment `{0}`")]
    UnknownEnv(String),
    #[error("unknown transformation `{name}` for environment `{env}`")]
    UnknownTransform { env: String, name: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
