//! Command-line front end for `cejulia`: run configuration, file formats
//! and the report-producing commands.

pub mod commands;
pub mod config;
pub mod formats;
