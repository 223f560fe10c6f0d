//! Library side of the `weakclose` binary: configuration handling, the
//! subcommands and the SVG writer.

pub mod commands;
pub mod config;
pub mod svg;
