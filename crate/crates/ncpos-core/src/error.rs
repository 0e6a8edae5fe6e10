use alloc::string::String;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("not hermitian: {0}")]
    NotHermitian(String),
    #[error("size {size} exceeds the configured cap {cap}")]
    SizeCap { size: usize, cap: usize },
    #[error("pencil is not monic")]
    NotMonic,
    #[error("not monicizable at (T, b): constant term deviates from identity by {0:e}")]
    NotMonicizable(f64),
    #[error("input not a degree-{0} polynomial image (re-evaluation error {1:e})")]
    NotPolynomialImage(usize, f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("significantly indefinite matrix (lambda_min = {0:e})")]
    Indefinite(f64),
    #[error("scaling factor fell below 2^-40")]
    PathologicalScaling,
    #[error("no point found after {0} tries")]
    SamplingFailed(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = core::result::Result<T, Error>;
