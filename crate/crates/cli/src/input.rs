//! JSON input with path and position diagnostics.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

/// Failure that maps onto a process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input; exit code 2.
    Input(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => f.write_str(msg),
        }
    }
}

pub fn input_err(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))
}

/// Deserializes `text`, reporting the failing field path with line and
/// column on error.
pub fn parse_str<T: DeserializeOwned>(text: &str, origin: &Path) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        let location = format!("{}:{}:{}", origin.display(), inner.line(), inner.column());
        if field == "." || field.is_empty() {
            input_err(format!("{location}: {inner}"))
        } else {
            input_err(format!("{location}: field `{field}`: {inner}"))
        }
    })
}

pub fn parse_file<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    parse_str(&read_text(path)?, path)
}
