use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, bad config files or parameters outside a theorem's regime.
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Experiment(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for configuration errors, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Experiment(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<collabsgd::Error> for CliError {
    fn from(e: collabsgd::Error) -> Self {
        match e {
            collabsgd::Error::Csv(msg) => CliError::Experiment(msg),
            collabsgd::Error::VacuousWga { .. } => CliError::Config(format!(
                "{e}; the WGA guarantee needs alpha < 1/sqrt(m)"
            )),
            collabsgd::Error::StepTooLarge { .. } => CliError::Config(format!(
                "{e}; the bound only holds for step sizes up to the stated limit"
            )),
            other => CliError::Config(other.to_string()),
        }
    }
}
