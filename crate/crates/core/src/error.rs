use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },

    #[error("face {face} references vertex {index} but the mesh has {n_vertices} vertices")]
    IndexOutOfRange {
        face: usize,
        index: usize,
        n_vertices: usize,
    },

    #[error("face {face} repeats a vertex index")]
    RepeatedIndex { face: usize },

    #[error("vertex {0} has no incident face")]
    IsolatedVertex(usize),

    #[error("non-finite cotangent weight in face {face}")]
    NonFiniteCotangent { face: usize },

    #[error("requested {k} eigenpairs but the mesh has {n} vertices")]
    KTooLarge { k: usize, n: usize },

    #[error("eigensolver failed: {0}")]
    EigensolveFailure(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix has negative spectrum (min eigenvalue {min:e}, scale {scale:e})")]
    NegativeSpectrum { min: f64, scale: f64 },

    #[error("matrix is not diagonalizable (eigenvector condition number {cond:e})")]
    NonDiagonalizable { cond: f64 },

    #[error("logarithm leaves the real branch (imaginary magnitude {imag:e})")]
    ComplexBranch { imag: f64 },

    #[error("functional map is singular and pseudo-inverse fallback is disabled")]
    SingularMap,

    #[error("meshes do not share connectivity")]
    ConnectivityMismatch,

    #[error("channel layout mismatch: {0}")]
    ShapeMismatch(String),

    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable numeric code, also used across the C interface.
    pub fn code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Parse { .. } => 2,
            Error::DegenerateFace { .. } => 3,
            Error::IndexOutOfRange { .. } => 4,
            Error::RepeatedIndex { .. } => 5,
            Error::IsolatedVertex(_) => 6,
            Error::NonFiniteCotangent { .. } => 7,
            Error::KTooLarge { .. } => 8,
            Error::EigensolveFailure(_) => 9,
            Error::DimensionMismatch(_) => 10,
            Error::NegativeSpectrum { .. } => 11,
            Error::NonDiagonalizable { .. } => 12,
            Error::ComplexBranch { .. } => 13,
            Error::SingularMap => 14,
            Error::ConnectivityMismatch => 15,
            Error::ShapeMismatch(_) => 16,
            Error::NonFiniteLoss { .. } => 17,
            Error::EmptyDataset => 18,
            Error::InvalidArgument(_) => 19,
        }
    }

    /// Variant name, e.g. `KTooLarge`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Parse { .. } => "Parse",
            Error::DegenerateFace { .. } => "DegenerateFace",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::RepeatedIndex { .. } => "RepeatedIndex",
            Error::IsolatedVertex(_) => "IsolatedVertex",
            Error::NonFiniteCotangent { .. } => "NonFiniteCotangent",
            Error::KTooLarge { .. } => "KTooLarge",
            Error::EigensolveFailure(_) => "EigensolveFailure",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::NegativeSpectrum { .. } => "NegativeSpectrum",
            Error::NonDiagonalizable { .. } => "NonDiagonalizable",
            Error::ComplexBranch { .. } => "ComplexBranch",
            Error::SingularMap => "SingularMap",
            Error::ConnectivityMismatch => "ConnectivityMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
