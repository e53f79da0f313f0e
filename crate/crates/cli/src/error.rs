/// Command failure, mapped to the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    /// A verification command found a mismatch.
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    /// 1 configuration, 2 data, 3 numerical or failed check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) | CliError::Check(_) => 3,
        }
    }
}

impl From<decompkan::Error> for CliError {
    fn from(e: decompkan::Error) -> Self {
        use decompkan::Error as E;
        match &e {
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            _ if e.is_data() => CliError::Data(e.to_string()),
            E::Checkpoint(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
