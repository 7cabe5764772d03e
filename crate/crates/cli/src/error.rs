use std::fmt;
use std::process::ExitCode;

/// A failed command, classified by exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad input data: malformed corpus, unannotated dialogues, empty inputs.
    Validation(anyhow::Error),
    /// Bad flags, config file or environment.
    Config(anyhow::Error),
    /// A CRS or LLM endpoint could not be used.
    Connector(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Validation(_) => 1,
            Failure::Config(_) => 2,
            Failure::Connector(_) => 3,
        })
    }

    fn label(&self) -> &'static str {
        match self {
            Failure::Validation(_) => "validation error",
            Failure::Config(_) => "configuration error",
            Failure::Connector(_) => "connector error",
        }
    }

    fn inner(&self) -> &anyhow::Error {
        match self {
            Failure::Validation(e) | Failure::Config(e) | Failure::Connector(e) => e,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:#}", self.label(), self.inner())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub trait Classify<T> {
    fn validation(self, context: impl fmt::Display) -> CmdResult<T>;
    fn config(self, context: impl fmt::Display) -> CmdResult<T>;
}

impl<T, E> Classify<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn validation(self, context: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Validation(e.into().context(context.to_string())))
    }

    fn config(self, context: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Config(e.into().context(context.to_string())))
    }
}

pub fn config_error(message: impl fmt::Display) -> Failure {
    Failure::Config(anyhow::anyhow!("{message}"))
}

pub fn validation_error(message: impl fmt::Display) -> Failure {
    Failure::Validation(anyhow::anyhow!("{message}"))
}
