use npns_core::NpnsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),

    /// A trajectory produced non-finite values; partial output was written.
    #[error("{0}")]
    BlowUp(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Self::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::BlowUp(_) => 3,
            HarnessError::Io { .. } => 4,
        }
    }
}

impl From<NpnsError> for HarnessError {
    fn from(e: NpnsError) -> Self {
        match e {
            NpnsError::BlowUp { .. } => HarnessError::BlowUp(e.to_string()),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
