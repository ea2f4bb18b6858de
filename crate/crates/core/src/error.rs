use std::path::PathBuf;

/// Errors produced by the core library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix is rank deficient: pivot {pivot:e} at column {column}")]
    RankDeficient { column: usize, pivot: f64 },

    #[error("{method} did not converge after {sweeps} sweeps")]
    NoConvergence { method: &'static str, sweeps: usize },

    #[error("matrix is not symmetric: max |a - a^T| = {deviation:e}")]
    NotSymmetric { deviation: f64 },

    #[error("matrix is not orthogonal: max |W^T W - I| = {deviation:e}")]
    NotOrthogonal { deviation: f64 },

    #[error("invalid layer shape {n_in} -> {n_out}")]
    InvalidShape { n_in: usize, n_out: usize },

    #[error("vector is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("zero vector cannot be renormalized ({context})")]
    ZeroVector { context: &'static str },

    #[error("state is not the ground state |0...0>")]
    StateNotGround,

    #[error("wire {wire} out of range for {n_qubits} qubits")]
    WireOutOfRange { wire: usize, n_qubits: usize },

    #[error("{requested} qubits exceeds the simulator cap of {cap}")]
    QubitCap { requested: usize, cap: usize },

    #[error("sign links unresolved, affected indices {indices:?}")]
    UnresolvedSigns { indices: Vec<usize> },

    #[error("every shot was discarded by post-selection")]
    AllShotsDiscarded,

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("class index {index} out of range for {classes} outputs")]
    ClassOutOfRange { index: usize, classes: usize },

    #[error("dataset is empty ({context})")]
    EmptyDataset { context: &'static str },

    #[error("row {row} has zero norm")]
    ZeroNormRow { row: usize },

    #[error("bad IDX magic in {path}: expected {expected}, found {found}")]
    BadMagic {
        path: PathBuf,
        expected: u32,
        found: u32,
    },

    #[error("truncated IDX file {path}: need {needed} bytes, have {available}")]
    Truncated {
        path: PathBuf,
        needed: usize,
        available: usize,
    },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed CSV: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn dim_mismatch(op: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
