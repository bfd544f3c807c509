use std::fmt;

use pgf_clt::ErrorClass;

/// Exit status 1 for bad input, 2 for numerical or I/O trouble.
#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn precondition(message: impl Into<String>) -> Self {
        Self { class: ErrorClass::Precondition, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { class: ErrorClass::Internal, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.class {
            ErrorClass::Precondition => 1,
            ErrorClass::Internal => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(&self.message)
    }
}

macro_rules! from_lib {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self { class: e.class(), message: e.to_string() }
            }
        }
    )*};
}

from_lib!(
    pgf_clt::pgf::PgfError,
    pgf_clt::dist::DistError,
    pgf_clt::cumulants::CumulantError,
    pgf_clt::harmonic::HarmonicError,
    pgf_clt::brownian::BrownianError,
    pgf_clt::clt::CltError,
    pgf_clt::constructions::ConstructionError,
    pgf_clt::multivariate::MultiError
);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::internal(format!("I/O: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::internal(format!("CSV: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::internal(format!("JSON: {e}"))
    }
}
