use thiserror::Error;

/// Errors raised by the estimation, planning and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("path is empty")]
    EmptyPath,
    #[error("cell ({row}, {col}) is outside a {rows}x{cols} raster")]
    OutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("kernel of size {kernel} does not fit a {rows}x{cols} raster")]
    KernelTooLarge {
        kernel: usize,
        rows: usize,
        cols: usize,
    },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no measurement noise configured for source `{0}`")]
    UnknownSource(String),
    #[error("measurement at t={got} arrived after t={last}")]
    OutOfOrder { last: f64, got: f64 },
    #[error("invalid boundary conditions: {0}")]
    InvalidBoundary(String),
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("{file}: {message}")]
    Config { file: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
