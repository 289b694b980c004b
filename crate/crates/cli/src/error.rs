use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(mewls::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 for configuration or input errors, 3 for solver failures, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<mewls::Error> for CliError {
    fn from(e: mewls::Error) -> Self {
        use mewls::Error as E;
        match e {
            E::InvalidConfig(_) | E::Domain { .. } | E::InvalidInput(_) => CliError::Config(e.to_string()),
            E::Io(_) | E::Csv(_) | E::Image(_) => CliError::Io(e.to_string()),
            other => CliError::Solver(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
