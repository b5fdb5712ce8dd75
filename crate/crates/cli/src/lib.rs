//! Command-line frontend, file formats, and experiment orchestration
//! for the watermarking laboratory in `wmforge-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod report;

pub use error::{CliError, Result};
