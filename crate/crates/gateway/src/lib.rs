//! HTTP service and command line over the crisisflow core.

pub mod api;
pub mod cli;
pub mod config;
