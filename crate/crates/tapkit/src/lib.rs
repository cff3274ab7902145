//! The `tapkit` command line and annotation server.

pub mod cli;
pub mod controls;
pub mod server;
