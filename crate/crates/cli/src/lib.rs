//! Command implementations and run configuration behind the `hetspec` binary.

pub mod commands;
pub mod config;
