//! Command-line front end: JSON configuration, commands, and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, Flags};
pub use config::RunConfig;
pub use error::CliError;
