use std::fmt;
use std::process::ExitCode;

/// What kind of failure ended the command; each maps to its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, config file, or model name.
    Config,
    /// Missing, unreadable, or malformed input data.
    Data,
    /// A verification command found a mismatch.
    Verification,
    /// Training diverged or otherwise failed.
    Training,
}

impl Kind {
    pub fn code(self) -> u8 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Verification => 4,
            Kind::Training => 5,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(kind: Kind, error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            error: error.into(),
        }
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Config, anyhow::anyhow!("{msg}"))
    }

    pub fn verification(msg: impl fmt::Display) -> Self {
        Self::new(Kind::Verification, anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.kind.code())
    }
}

fn classify(e: &harbench::Error) -> Kind {
    use harbench::Error::*;
    match e {
        InFile { source, .. } => classify(source),
        InvalidConfig(_) | InvalidSpec(_) | UnknownModel(_) | Json(_) => Kind::Config,
        NonFinite { .. } => Kind::Training,
        ParamMismatch(_) => Kind::Verification,
        _ => Kind::Data,
    }
}

impl From<harbench::Error> for Failure {
    fn from(e: harbench::Error) -> Self {
        Self::new(classify(&e), e)
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Attaches a message while keeping the failure kind.
pub trait Context<T> {
    fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> CliResult<T>;
}

impl<T> Context<T> for Result<T, harbench::Error> {
    fn context(self, msg: impl fmt::Display + Send + Sync + 'static) -> CliResult<T> {
        self.map_err(|e| {
            let f = Failure::from(e);
            Failure::new(f.kind, f.error.context(msg))
        })
    }
}
