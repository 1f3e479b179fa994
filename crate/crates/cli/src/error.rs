use graphaudit::audit::AuditError;
use graphaudit::embedding::EmbeddingError;
use graphaudit::graph::GraphError;
use graphaudit::mgnan::ModelError;
use graphaudit::retrieval::RetrievalError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
    /// Some queries failed; their outputs are absent and the rest were written.
    #[error("{} of {total} queries failed:\n{}", failures.len(), list(failures))]
    Partial {
        total: usize,
        failures: Vec<(String, CliError)>,
    },
}

fn list(failures: &[(String, CliError)]) -> String {
    failures
        .iter()
        .map(|(qid, e)| format!("  {qid}: {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Partial { failures, .. } => failures
                .iter()
                .map(|(_, e)| e.exit_code())
                .max()
                .unwrap_or(2),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFinite(_) | ModelError::Diverged(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

data_error!(GraphError, EmbeddingError, RetrievalError, AuditError);

pub fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn json_error(path: &std::path::Path) -> impl FnOnce(serde_json::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}
