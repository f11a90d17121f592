//! Library surface of the command-line driver: configuration ingestion,
//! field serialization, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod io;
