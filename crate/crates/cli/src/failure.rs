use std::fmt;
use std::io;

use pomdp_lambda::{ModelError, OptimError, ParseError, SamplerError, SolverError};

/// Command failure, classified by exit code: 1 for domain failures, 2 for
/// usage or parse errors, 3 for I/O.
#[derive(Debug)]
pub enum Failure {
    Domain(anyhow::Error),
    Usage(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn usage(msg: impl fmt::Display) -> Self {
        Failure::Usage(anyhow::anyhow!("{msg}"))
    }

    pub fn domain(msg: impl fmt::Display) -> Self {
        Failure::Domain(anyhow::anyhow!("{msg}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Domain(e) | Failure::Usage(e) | Failure::Io(e)) = self;
        write!(f, "{e:#}")
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.into())
        } else {
            Failure::Usage(e.into())
        }
    }
}

impl From<ParseError> for Failure {
    fn from(e: ParseError) -> Self {
        Failure::Usage(e.into())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Domain(e.into())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        Failure::Domain(e.into())
    }
}

impl From<OptimError> for Failure {
    fn from(e: OptimError) -> Self {
        let mut inner = &e;
        while let OptimError::Stage { source, .. } = inner {
            inner = source;
        }
        match inner {
            OptimError::Config(_) | OptimError::UnsupportedNorm(_) => Failure::Usage(e.into()),
            _ => Failure::Domain(e.into()),
        }
    }
}

impl From<SamplerError> for Failure {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Config(_) | SamplerError::UnsupportedNorm(_) => Failure::Usage(e.into()),
            SamplerError::Io(_) => Failure::Io(e.into()),
            other => Failure::Domain(other.into()),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;
