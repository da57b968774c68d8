use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input file or arguments, detected before contacting the service.
    #[error("{0}")]
    Invalid(String),
    /// The service answered with a 4xx status.
    #[error("rejected ({status}): {detail}")]
    Rejected { status: u16, detail: String },
    #[error("cannot reach service: {0}")]
    Connectivity(String),
}

impl CliError {
    /// 1 for validation failures, 2 for connectivity failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Rejected { .. } => 1,
            CliError::Connectivity(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}
