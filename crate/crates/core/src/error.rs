use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("partition failed: {0}")]
    PartitionFailure(String),

    #[error("divergence at iteration {iteration}: non-finite value in {what}")]
    Divergence { iteration: usize, what: String },

    #[error("theory violation: {0}")]
    TheoryViolation(String),

    #[error("horizon T = {given} is below the corollary minimum {required}")]
    HorizonTooShort { given: u64, required: u64 },

    #[error("unknown corollary id {0}")]
    UnknownCorollary(u32),
}
