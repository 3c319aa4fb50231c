use std::process::ExitCode;

/// Failure of a command, carrying its stable exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unknown columns or an invalid config: exit 2.
    Usage(String),
    /// The embedder found no embedding; the payload is printed as JSON: exit 3.
    Embedding(serde_json::Value),
    /// An embedding failed validation: exit 4.
    Validation(String),
    /// Reading or writing files failed, or an input file is malformed: exit 5.
    Io(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Embedding(_) => 3,
            CliError::Validation(_) => 4,
            CliError::Io(_) => 5,
        }
    }

    pub fn report(&self) -> ExitCode {
        match self {
            CliError::Embedding(doc) => println!("{doc}"),
            CliError::Usage(m) | CliError::Validation(m) | CliError::Io(m) => eprintln!("error: {m}"),
        }
        ExitCode::from(self.code())
    }
}

impl From<qaembed::Error> for CliError {
    fn from(e: qaembed::Error) -> Self {
        use qaembed::Error as E;
        match e {
            E::InvalidParameter(_) | E::Config(_) | E::Capacity { .. } | E::TooLarge { .. } => {
                CliError::Usage(e.to_string())
            }
            E::UnknownTargetNode(_) | E::DomainMismatch(_) | E::InvalidEmbedding(_) => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(format!("JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(format!("CSV: {e}"))
    }
}
