//! Orchestration behind the `amx` executable: configuration, run drivers,
//! and text emission. Every driver returns its output as a string so the
//! caller decides where it goes.

pub mod commands;
pub mod config;
pub mod validate;

use std::fmt::Write as _;

use thiserror::Error;

pub use commands::{run_emt, run_mode, run_spectrum, EmtRun, RefineReport};
pub use config::RunConfig;
pub use validate::run_validate;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<amx_core::Error> for CliError {
    fn from(e: amx_core::Error) -> Self {
        match e {
            amx_core::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Shortest round-trip text for a float (`{:?}` switches to exponent form
/// for very large or small magnitudes, unlike `{}`).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Builds CSV text from a header and numeric rows.
pub struct CsvText {
    text: String,
}

impl CsvText {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        CsvText { text }
    }

    pub fn row(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            let _ = write!(self.text, "{v:?}");
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}
