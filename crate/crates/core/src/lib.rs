//! Kernels for recovering a metric, gravity-aligned scene description from one RGB-D view
//! and for compositing rendered frames over the real background.
//!
//! The crate is `no_std` (with `alloc`); file formats, networking and the command line
//! live in the `scenelift` companion crate.

#![no_std]
// Float math comes from `num_traits::Float` (libm); when std is linked its inherent
// methods shadow it, so those imports are individually allowed to go unused.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod align;
pub mod background;
pub mod camera;
pub mod cloud;
pub mod composite;
pub mod error;
pub mod geometry;
pub mod hull;
pub mod mesh;
pub mod pipeline;
pub mod placement;
pub mod primitives;
pub mod properties;
pub mod raster;
pub mod registration;
pub mod render;
pub mod roundtrip;
pub mod scene;
pub mod spatial;
pub mod synth;
pub mod unproject;

pub use error::{Error, Result};
