//! Command-line front end: specification documents, scans, figure data and
//! certification reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod certify;
pub mod commands;
pub mod error;
pub mod output;

pub use args::Cli;
pub use error::CliError;

/// Caps the global thread pool from `CHANNELSCOPE_THREADS`.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("CHANNELSCOPE_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("CHANNELSCOPE_THREADS='{value}' is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Parse(e.to_string()))
}
