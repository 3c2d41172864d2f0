use std::fmt;
use std::process::ExitCode;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Bad config, flags or input files (exit 2).
    Invalid(anyhow::Error),
    /// A resource cap was hit (exit 3).
    Cap(anyhow::Error),
    /// Anything else (exit 1).
    Runtime(anyhow::Error),
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl Failure {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Self::Invalid(anyhow::anyhow!("{msg}"))
    }

    pub fn cap(msg: impl fmt::Display) -> Self {
        Self::Cap(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Invalid(_) => ExitCode::from(2),
            Self::Cap(_) => ExitCode::from(3),
            Self::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, err) = match self {
            Self::Invalid(e) => ("invalid input", e),
            Self::Cap(e) => ("resource cap", e),
            Self::Runtime(e) => ("error", e),
        };
        write!(f, "{kind}: {err:#}")
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::Runtime(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::Runtime(e.into())
    }
}

pub trait Classify<T> {
    fn invalid(self) -> CmdResult<T>;
    fn invalid_ctx(self, ctx: impl fmt::Display) -> CmdResult<T>;
}

impl<T, E> Classify<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn invalid(self) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into()))
    }

    fn invalid_ctx(self, ctx: impl fmt::Display) -> CmdResult<T> {
        self.map_err(|e| Failure::Invalid(e.into().context(ctx.to_string())))
    }
}
