//! Batch front end: one JSON run configuration, five commands, and
//! deterministic CSV/JSON artifacts under the configured output directory.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 solver
//! divergence, 4 invalid curve.

pub mod commands;
pub mod config;
pub mod report;

use std::fmt;

pub use config::{Overrides, RunConfig};

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_CURVE: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn divergence(message: impl Into<String>) -> Self {
        Self { code: EXIT_DIVERGENCE, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<maggeo::Error> for CliError {
    fn from(e: maggeo::Error) -> Self {
        use maggeo::Error as E;
        let code = match &e {
            E::InvalidArgument(_) => EXIT_INPUT,
            E::DegenerateCurve(_) | E::IrregularCurve { .. } | E::PoleProximity { .. } | E::PoleSingularity(_) => {
                EXIT_CURVE
            }
            _ => EXIT_DIVERGENCE,
        };
        Self { code, message: e.to_string() }
    }
}
