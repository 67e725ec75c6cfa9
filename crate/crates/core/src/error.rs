use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("segment `{segment}` has {rows} rows, need at least {needed}")]
    SegmentTooShort {
        segment: &'static str,
        rows: usize,
        needed: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("non-finite gradient in tensor `{0}`")]
    NonFiniteGradient(String),
    #[error("training aborted at epoch {epoch}: validation RMSE is {value}")]
    TrainingDiverged { epoch: usize, value: f64 },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
}

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
