use std::fmt;

use edgelab_core::EdgeError;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DOMAIN: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl fmt::Display) -> Self {
        Self { code: EXIT_CONFIG, message: msg.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<EdgeError> for CliError {
    fn from(e: EdgeError) -> Self {
        let code = match e {
            EdgeError::InvalidProfile(_) | EdgeError::InvalidInput(_) | EdgeError::DegenerateGapless => EXIT_CONFIG,
            EdgeError::NoMidGapState | EdgeError::DegenerateExtent(..) | EdgeError::NotAZeroMode { .. } => EXIT_DOMAIN,
            EdgeError::StepTooLarge { .. } | EdgeError::NotConical { .. } => EXIT_NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self { code: EXIT_IO, message: e.to_string() }
    }
}
