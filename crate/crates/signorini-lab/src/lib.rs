//! Batch laboratory around the thin obstacle solver: scenario configs,
//! family/field file formats, content-addressed run directories, and
//! consolidated reports with per-invariant pass/fail flags.

pub mod config;
pub mod error;
pub mod family_io;
pub mod field_io;
pub mod reports;
pub mod runner;

/// Output format of consolidated summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}
