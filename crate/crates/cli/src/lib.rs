//! Batch driver for the fracheat verification suite.

pub mod acceptance;
pub mod commands;
pub mod config;

pub use commands::{Command, RunOptions};
pub use config::RunConfig;
