//! IO, formats, model loading, the experiment service and the run pipeline.

pub mod error;
pub mod files;
pub mod journal;
pub mod loader;
pub mod pipeline;
pub mod report;
pub mod scoring;
pub mod server;

pub use error::{Error, Result};
