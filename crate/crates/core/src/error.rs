use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial axis {axis} has size {size}, need at least {min}")]
    DimensionTooSmall { axis: usize, size: usize, min: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("mode mask retains no Fourier modes on a {nx}x{ny}x{nz} grid")]
    EmptyMask { nx: usize, ny: usize, nz: usize },

    #[error("upsampling target {target} on axis {axis} is not 2*{input} or 2*{input}-1")]
    TargetSize { axis: usize, input: usize, target: usize },

    #[error("backward called without a recorded forward pass")]
    NoForward,

    #[error("optimizer step requested before gradients were populated")]
    StepBeforeBackward,

    #[error("epoch {epoch} outside schedule range 0..={total}")]
    EpochOutOfRange { epoch: usize, total: usize },

    #[error("resampling factor must be >= 1, got {0}")]
    InvalidFactor(usize),

    #[error("label {label} outside alphabet of size {alphabet}")]
    LabelOutOfRange { label: u8, alphabet: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("non-finite loss {value} at epoch {epoch}, sample {sample}")]
    NonFiniteLoss { epoch: usize, sample: String, value: f64 },

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
