//! Experiment driver for the `stablesketch` library.
//!
//! The binary wraps three layers that are usable on their own: flat
//! `key=value` configuration ([`config`]), plain-text matrix/selection/CSV
//! files ([`files`]), and the subcommand drivers ([`commands`]).

pub mod commands;
pub mod config;
pub mod files;

pub use commands::Outcome;
pub use config::{Config, ConfigError};
