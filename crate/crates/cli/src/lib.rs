//! Driver for crossover sweeps, trap-frequency scans and validation reports.

pub mod commands;
pub mod config;
pub mod curve;
pub mod lab;
pub mod validate;

use std::fmt;

/// Failures mapped onto process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Io(String),
    Solver(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Validation(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Solver(m) => write!(f, "solver failure: {m}"),
            CliError::Validation(m) => write!(f, "validation failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Tags a core error with the crossover point it occurred at.
pub fn solver_error(inv_kfa: f64, e: sfprobe::Error) -> CliError {
    CliError::Solver(format!("1/k_F a = {inv_kfa}: {e}"))
}
