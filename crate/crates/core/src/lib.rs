//! Graph growth prediction from heat-kernel-signature descriptors.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod data;
pub mod descriptor;
pub mod error;
pub mod features;
pub mod graph;
pub mod linalg;
pub mod nn;
pub mod pipeline;
pub mod spectral;

pub use error::{Error, Result};
