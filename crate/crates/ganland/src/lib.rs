//! File formats, experiment pipeline and CLI support for `ganland-core`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod io;
pub mod manifest;
pub mod pipeline;
pub mod svg;

pub use error::{CliError, Result};
