use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{op}: dimension mismatch between {left_rows}x{left_cols} and {right_rows}x{right_cols}")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric (max relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("rank {rank} out of range 1..={max}")]
    RankOutOfRange { rank: usize, max: usize },

    #[error("singular Hessian, increase dampening")]
    SingularHessian,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("truncated stream: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("bad magic: expected \"{}\", found \"{}\"", .expected.escape_ascii(), .found.escape_ascii())]
    BadMagic { expected: &'static [u8; 4], found: Vec<u8> },

    #[error("unsupported {what}: {value}")]
    Unsupported { what: &'static str, value: u64 },

    #[error("undefined normalization: weight delta is zero")]
    UndefinedNormalization,

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("mapping indices differ between the two sketches")]
    IndicesDiffer,

    #[error("thread pool: {0}")]
    ThreadPool(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            op,
            left_rows: left.0,
            left_cols: left.1,
            right_rows: right.0,
            right_cols: right.1,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
