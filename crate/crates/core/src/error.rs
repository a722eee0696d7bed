use std::path::PathBuf;

/// Errors produced anywhere in the calibration and upsampling pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("assignment needs rows <= cols, got {rows}x{cols}")]
    InfeasibleShape { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("image too small: {width}x{height}, need at least {min} px per side")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("pixel ({u}, {v}) lies outside the {width}x{height} grid")]
    OutOfBounds { u: f64, v: f64, width: usize, height: usize },
    #[error("no usable motion samples in any frame pair")]
    NoMotion,
    #[error("objective returned a non-finite value at vertex {vertex}")]
    NonFiniteObjective { vertex: usize },
    #[error("frame {frame}: {reason}")]
    SyncViolation { frame: usize, reason: String },
    #[error("sparse depth map has no supported pixels")]
    EmptySupport,
    #[error("scene has neither moving objects nor ego-motion")]
    StaticScene,
    #[error("{}: malformed at byte/line {offset}: {reason}", path.display())]
    MalformedFile {
        path: PathBuf,
        offset: usize,
        reason: String,
    },
    #[error("{}: missing key `{key}`", path.display())]
    MissingKey { path: PathBuf, key: String },
    #[error("rotation is not orthonormal (max deviation {deviation:e})")]
    NonOrthonormal { deviation: f64 },
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
