use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("keys are not sorted ascending at position {0}")]
    UnsortedKeys(usize),

    #[error("key {key} at position {pos} lies outside the domain [{lo}, {hi}]")]
    KeyOutsideDomain { pos: usize, key: f64, lo: f64, hi: f64 },

    #[error("key at position {0} is NaN")]
    NanKey(usize),

    #[error("invalid domain [{lo}, {hi}]: lower bound must be below upper bound")]
    InvalidDomain { lo: f64, hi: f64 },

    #[error("degenerate data: all keys are equal")]
    DegenerateData,

    #[error("search window [{lo}, {hi}] is invalid for an array of {n} keys")]
    WindowViolation { lo: usize, hi: usize, n: usize },

    #[error("index {index} is out of range for an array of {n} keys")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("distribution declares no finite density bound")]
    UnboundedPdf,

    #[error("degenerate interval [{a_i}, {a_j}] for conditional CDF")]
    DegenerateInterval { a_i: f64, a_j: f64 },

    #[error("input is empty")]
    EmptyInput,

    #[error("invalid range [{lo}, {hi}]")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("bad key-file header: {0}")]
    BadHeader(String),

    #[error("key file truncated: header announces {expected} keys, found {found}")]
    TruncatedFile { expected: u64, found: u64 },

    #[error("requested {requested} keys but only {available} are available (need n >= 2)")]
    NTooLarge { requested: usize, available: usize },

    #[error("piece count {requested} exceeds the cap of {cap}")]
    PieceCapExceeded { requested: u64, cap: u64 },

    #[error("unsupported index format version {found} (expected {expected})")]
    VersionMismatch { found: u64, expected: u64 },

    #[error("corrupt index data: {0}")]
    CorruptIndex(String),

    #[error("cannot parse distribution spec `{spec}`: {reason}")]
    SpecParse { spec: String, reason: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "{method} returned rank {got} for query {query} on array {array}, oracle says {expected}"
    )]
    ExactnessViolation {
        method: String,
        array: usize,
        query: f64,
        got: usize,
        expected: usize,
    },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV failure: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
