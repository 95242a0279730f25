use std::path::Path;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("diverged at iteration {iteration}: {what}")]
    Divergence { iteration: usize, what: String },
    #[error("{0}")]
    Io(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Divergence { .. } => 3,
            Self::Io(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io(format!("{}: {err}", path.display()))
    }
}

impl From<dse_core::Error> for HarnessError {
    fn from(e: dse_core::Error) -> Self {
        match e {
            dse_core::Error::Divergence { iteration, what } => Self::Divergence { iteration, what },
            other => Self::Config(other.to_string()),
        }
    }
}
