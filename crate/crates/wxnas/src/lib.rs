//! Data acquisition, artifact formats, reporting and the command-line
//! pipeline around the `wxnas-core` numerics.

pub mod bench;
pub mod binio;
pub mod cache;
pub mod cities;
pub mod cli;
pub mod dataset_file;
pub mod error;
pub mod executor;
pub mod ingest;
pub mod manifest;
pub mod model_file;
pub mod pipeline;
pub mod report;
pub mod svg;

pub use error::{AppError, Result};
