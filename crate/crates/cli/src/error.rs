use channelscope::Error;

/// Failure of a command, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Parse(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("certification failed: {0}")]
    Certify(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io(_) => 1,
            Self::Parse(_) => 2,
            Self::Numerical(_) => 3,
            Self::Params(_) => 4,
            Self::Certify(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::BadParams(_)
            | Error::BadSimplex(_)
            | Error::BadRate(_)
            | Error::CurveOutOfRange(_)
            | Error::DampingSaturated { .. } => Self::Params(e.to_string()),
            Error::InvalidArgument(_) | Error::DimensionMismatch(_) | Error::BadDimension(_) => {
                Self::Parse(e.to_string())
            }
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}
