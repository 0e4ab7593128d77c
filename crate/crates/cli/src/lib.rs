//! Command-line harness for running and comparing exploration episodes.

pub mod commands;
pub mod config;
pub mod output;
pub mod summary;
pub mod svg;
