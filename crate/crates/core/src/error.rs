use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A dimension inequality that defines a regime or guarantees existence
    /// does not hold.
    #[error("dimension condition violated: {0}")]
    DimensionCondition(String),

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// A lineage grew past the configured population cap; the replicate is
    /// flagged rather than dropped.
    #[error("population cap of {cap} individuals exceeded")]
    PopulationCap { cap: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
