//! Higher-order process tomography for the two-party quantum switch.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod causal;
pub mod choi;
pub mod conic;
pub mod error;
pub mod metrics;
pub mod procmat;
pub mod qsys;
pub mod recon;
pub mod simlab;
pub mod tomoset;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
