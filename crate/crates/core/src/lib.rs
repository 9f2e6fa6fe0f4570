//! Truncated REM Metropolis dynamics.
//!
//! Everything here is `no_std` with `alloc`: the random landscape, the
//! percolation cloud of deep vertices, the jump chain with its clock books,
//! exact spectral data of trap components, and the limit objects used to
//! judge finite-n behaviour.

#![no_std]

extern crate alloc;

pub mod cloud;
pub mod env;
pub mod error;
pub mod kinetics;
pub mod limits;
pub mod linalg;
pub mod params;
pub mod rng;
pub mod special;
pub mod spectral;

pub use cloud::{decompose, CloudDecomposition, Component, Site};
pub use env::Environment;
pub use error::{Error, Result};
pub use kinetics::{ClockRecord, KernelView};
pub use params::{ModelParams, ScalingTable};
pub use rng::RngStream;
pub use spectral::{AbsorbingChain, SpectralReport};
