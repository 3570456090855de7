use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file is empty: {}", .0.display())]
    EmptyFile(PathBuf),
    #[error("missing column: {0}")]
    MissingColumn(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("no SNPs retained after harmonizing exposure and outcome")]
    NoOverlap,
    #[error("invalid instrument {snp_id}: {reason}")]
    InvalidInstrument { snp_id: String, reason: String },
    #[error("duplicate snp_id in instrument set: {0}")]
    DuplicateSnp(String),
    #[error("every instrument was dropped while forming ratio estimates")]
    AllInstrumentsDropped,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} values vs {right} weights")]
    LengthMismatch { left: usize, right: usize },
    #[error("weight at index {index} is not strictly positive and finite ({value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("{method} needs at least {needed} instruments, got {got}")]
    TooFewInstruments {
        method: &'static str,
        needed: usize,
        got: usize,
    },
    #[error("bootstrap needs at least 2 replicates, got {0}")]
    RequiresBge2(usize),
    #[error("{failed} of {total} bootstrap replicates failed (cap is 5%)")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("bootstrap is not defined for method {0}")]
    UnsupportedBootstrap(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Numerical failures map to exit code 3, everything else to 2.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::DegenerateFit(_) | Error::TooManyFailedReplicates { .. } => 3,
            _ => 2,
        }
    }
}
