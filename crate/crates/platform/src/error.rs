use std::fmt;

use serde::Serialize;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A message tied to a (dotted) config field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),

    #[error("config error: {}", join(.0))]
    Config(Vec<FieldError>),

    #[error("data error: {0}")]
    Data(String),

    #[error("run {0} not found")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    #[error("integrity check failed for `{artifact}` in run {run_id}: {detail}")]
    Integrity { run_id: String, artifact: String, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Internal(String),
}

fn join(errs: &[FieldError]) -> String {
    errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config(vec![FieldError { field: field.into(), message: message.into() }])
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Self {
        let context = context.into();
        move |source| Error::Io { context, source }
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Data(_) | Error::NotFound(_) | Error::Integrity { .. } | Error::Conflict(_) => 3,
            Error::Io { .. } | Error::Internal(_) => 1,
        }
    }
}

/// The message of a core error without its category prefix.
pub fn core_message(e: &careflow_core::Error) -> String {
    use careflow_core::Error as E;
    match e {
        E::Config(m) | E::InvalidInput(m) | E::Precondition(m) => m.clone(),
        other => other.to_string(),
    }
}

impl From<careflow_core::Error> for Error {
    fn from(e: careflow_core::Error) -> Self {
        use careflow_core::Error as E;
        match e {
            E::Config(m) => Error::config("", m),
            E::Io(source) => Error::Io { context: "I/O".into(), source },
            other => Error::Data(other.to_string()),
        }
    }
}
