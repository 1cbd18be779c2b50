//! Command-line front end and HTTP service for structured report conversion,
//! analysis and retrieval.

pub mod cli;
pub mod commands;
pub mod config;
pub mod engine;
pub mod error;
pub mod server;
