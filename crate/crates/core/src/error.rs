use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("edge ({source_index}, {target}) out of range for a {n_prev}x{n_next} layer")]
    EdgeOutOfRange {
        source_index: usize,
        target: usize,
        n_prev: usize,
        n_next: usize,
    },

    #[error("duplicate edge ({source_index}, {target})")]
    DuplicateEdge { source_index: usize, target: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss is not finite")]
    Divergence { epoch: usize, batch: usize },

    #[error("similarity matrix has no positive mass")]
    DegenerateSimilarity,

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
