//! Std companion to `twinreg-core`: CSV ingestion and export, model files,
//! the experiment runner and result tables.

pub mod dataset_io;
mod error;
pub mod experiment;
pub mod model_io;
pub mod results;

pub use error::{Error, Result};
pub use twinreg_core as core;
