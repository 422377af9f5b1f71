use std::fmt;

use serde::Serialize;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Validation,
    Input,
    Numeric,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub class: Class,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            class: Class::Input,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            class: Class::Validation,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self.class {
            Class::Validation => 1,
            Class::Input => 2,
            Class::Numeric => 3,
        }
    }

    /// One-line JSON object written to stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a Class,
            code: u8,
            message: &'a str,
        }
        serde_json::to_string(&Body {
            error: &self.class,
            code: self.exit_code(),
            message: &self.message,
        })
        .expect("error body serializes")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<sepcore::Error> for CliError {
    fn from(e: sepcore::Error) -> Self {
        use sepcore::Error::*;
        let class = match &e {
            DimensionMismatch { .. }
            | InsufficientSamples { .. }
            | IncompatibleParameters(_)
            | InvalidParameter(_)
            | ConfigMismatch(_)
            | Unavailable(_)
            | Table(_) => Class::Input,
            NotPositiveDefinite { .. }
            | NegativeEigenvalue { .. }
            | Convergence { .. }
            | SingularIterate { .. }
            | SingularSample { .. } => Class::Numeric,
            ReplicateFailed { source, .. } => CliError::from((**source).clone()).class,
        };
        CliError {
            class,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
