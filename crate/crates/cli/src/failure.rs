use std::fmt;
use std::process::ExitCode;

use pyramidnet_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Check,
}

/// An error that ends the process with a kind-specific exit code.
#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Config,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Data,
            message: message.into(),
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Check,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self.kind {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Check => 4,
        })
    }

    /// Library errors raised while reading or interpreting input data.
    pub fn from_data(context: &str, e: Error) -> Self {
        Self::data(format!("{context}: {e}"))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

// Anything the library rejects without a more specific context is a bad setting.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_)
            | Error::BadMagic { .. }
            | Error::Truncated { .. }
            | Error::CountMismatch { .. }
            | Error::EmptyDataset { .. }
            | Error::ZeroNormRow { .. }
            | Error::Csv(_) => Self::data(e.to_string()),
            _ => Self::config(e.to_string()),
        }
    }
}
