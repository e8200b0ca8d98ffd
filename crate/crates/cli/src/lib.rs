//! Command-line front end: configuration, CSV output and subcommands.

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;

pub use commands::{execute, main_with_args, Cli, Command, RunArgs};
pub use config::{parse_config, parse_partial, OutputFormat, PartialConfig, RunConfig};
pub use csv::{emit_trace_csv, error_csv, format_sig12, parse_trace_csv, trace_csv, TraceRow};
pub use error::CliError;
