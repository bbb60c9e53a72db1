//! File formats, command implementations and CLI plumbing around `scenelift-core`.

pub mod app;
pub mod client;
pub mod error;
pub mod files;
pub mod frames;
pub mod mesh_io;
pub mod raster_io;

pub use error::{Error, Result};
