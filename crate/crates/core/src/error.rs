use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid experiment plan: {0}")]
    InvalidPlan(String),

    #[error("diversity fit needs at least {needed} points in the fit window, found {found}")]
    InsufficientPoints { needed: usize, found: usize },

    #[error("curve `{label}` never crosses outage {target:e}")]
    NoCrossing { label: String, target: f64 },

    #[error("Jain index is undefined for an empty or all-zero allocation")]
    ZeroAllocation,
}
