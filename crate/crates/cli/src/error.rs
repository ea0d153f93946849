use thiserror::Error;

/// Failure category, which also determines the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Numerical,
    Data,
    Output,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Data => 4,
            ErrorKind::Output => 1,
        }
    }
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, message)
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Numerical, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl From<lovegp::Error> for CliError {
    fn from(e: lovegp::Error) -> Self {
        use lovegp::Error as E;
        let kind = match &e {
            E::NotPositiveDefinite { .. } | E::Divergence { .. } | E::Numerical(_) => {
                ErrorKind::Numerical
            }
            E::DimensionMismatch { .. } | E::OutOfRange { .. } | E::Io(_) => ErrorKind::Data,
            _ => ErrorKind::Config,
        };
        Self::new(kind, e.to_string())
    }
}

/// Prefixes errors with the phase that produced them.
pub trait Phase<T> {
    fn phase(self, name: &str) -> Result<T>;
}

impl<T, E: Into<CliError>> Phase<T> for std::result::Result<T, E> {
    fn phase(self, name: &str) -> Result<T> {
        self.map_err(|e| {
            let e = e.into();
            CliError::new(e.kind, format!("{name}: {}", e.message))
        })
    }
}
