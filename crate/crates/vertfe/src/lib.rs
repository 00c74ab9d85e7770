//! File formats, batch execution and the command-line front end for
//! `vertfe-core`.

pub mod commands;
pub mod error;
pub mod mesh_text;
pub mod tables;
pub mod vgrid;

pub use error::{CliError, FormatError};
