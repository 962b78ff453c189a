//! File formats, dataset generation and the command line around
//! [`cppcn_core`].

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod manifest;
pub mod obj;
pub mod ply;
pub mod svg;

pub use error::{Error, Result};
