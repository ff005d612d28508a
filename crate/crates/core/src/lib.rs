//! Point-cloud kernels, a masked-point-modeling transformer with hand-written
//! reverse-mode gradients, and a test-time engine that aligns unseen-domain
//! features with dual-level source prototypes.
//!
//! The crate is `no_std` + `alloc`. File formats, the CLI and parallel
//! execution live in the `dgpic` companion crate.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod data;
pub mod engine;
mod error;
pub mod geometry;
pub mod math;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use geometry::{Point3, PointCloud};
