//! Allocation-only core of `wxnas`: a multi-objective architecture search
//! toolkit for compact hourly weather forecasters.
//!
//! Everything in this crate is pure computation over in-memory buffers. File
//! formats, network access, reports and the command line live in the `wxnas`
//! companion crate.

#![no_std]

extern crate alloc;

#[cfg(any(feature = "std", test))]
extern crate std;

pub mod calendar;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nas;
pub mod nn;
pub mod rng;
pub mod robustness;
pub mod schema;
pub mod series;
pub mod stats;
pub mod synthetic;
pub mod transfer;

pub use error::{Error, Result};
pub use schema::{Feature, LOOKBACK, N_FEATURES};
