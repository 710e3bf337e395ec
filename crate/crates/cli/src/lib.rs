//! Experiment runner for the hypkit library.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod models;
pub mod output;

pub use error::{CliError, Result};
