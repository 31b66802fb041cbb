use std::path::PathBuf;

/// Errors produced by the hypergraph, diffusion and training routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("vertex index {index} out of range for {num_vertices} vertices (hyperedge {edge})")]
    IndexOutOfRange {
        index: usize,
        num_vertices: usize,
        edge: usize,
    },
    #[error("vertex {index} out of range for {num_vertices} vertices")]
    VertexOutOfRange { index: usize, num_vertices: usize },
    #[error("hyperedge {0} is empty")]
    EmptyHyperedge(usize),
    #[error("hyperedge {edge} lists vertex {vertex} more than once")]
    DuplicateVertex { edge: usize, vertex: usize },
    #[error("weight {value} out of range [0, 1] ({what})")]
    WeightOutOfRange { value: f64, what: String },
    #[error("all pairwise feature distances are zero")]
    DegenerateFeatures,
    #[error("vertex count mismatch: expected {expected}, found {found}")]
    VertexCountMismatch { expected: usize, found: usize },
    #[error("rho(delta) is not finite for hyperedge {edge} (delta = {delta}, sigma = {sigma})")]
    NonFiniteRho { edge: usize, delta: f64, sigma: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dense size cap exceeded: n = {n}, cap = {cap}")]
    SizeCapExceeded { n: usize, cap: usize },
    #[error("empty mask: no labeled vertices selected")]
    EmptyMask,
    #[error("polynomial order {0} exceeds the supported maximum of 60")]
    KTooLarge(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("{what} bound violated: empirical {empirical} > bound {bound}")]
    BoundViolation {
        what: String,
        empirical: f64,
        bound: f64,
    },
    #[error("parse error in {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse error category, used by the command line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => ErrorCategory::Config,
            Error::NonFinite(_)
            | Error::NonFiniteRho { .. }
            | Error::BoundViolation { .. }
            | Error::DegenerateFeatures => ErrorCategory::Numerical,
            _ => ErrorCategory::Data,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
