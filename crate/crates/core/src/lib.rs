//! Reconstruction of occluded crop canopies from partial point clouds.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece
//! of the pipeline:
//!
//! - [`geom`]: points, meshes, bounding boxes, BVH, farthest point sampling,
//!   exact k-nearest neighbours and voxel occupancy.
//! - [`occlusion`]: ray-traced surface/occluded labelling against a camera rig.
//! - [`popsim`]: assembly of virtual plot populations from single-plant assets
//!   and extraction of completion samples.
//! - [`metrics`]: Chamfer distance, the multi-stage completion loss, the
//!   adversarial terms, SSIM3D and least-squares regression.
//! - [`autodiff`]: a small tape-based reverse-mode engine with Adam.
//! - [`cppcn`]: the completion network (dynamic graph encoder, point pyramid
//!   decoder, discriminator), its training loop and block-wise inference.
//! - [`traits_yield`]: silique layering, volume and efficiency index.
//!
//! File formats, configuration and the command line live in the `cppcn`
//! companion crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod autodiff;
pub mod cppcn;
pub mod geom;
pub mod metrics;
pub mod occlusion;
pub mod popsim;
pub mod rng;
pub mod traits_yield;

pub use error::{Error, Result};
