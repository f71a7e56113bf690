//! File formats, nuScenes-layout ingest and the `tsmnet` command line on
//! top of [`tsmnet_core`].
//!
//! - [`scene_io`]: scene JSON and track CSV, plus data directories of both
//! - [`image`]: PNG export of raster chunks and figures
//! - [`manifest`]: the sample manifest table
//! - [`checkpoint`]: versioned binary model checkpoints
//! - [`config`]: flat `key = value` training configuration
//! - [`report`]: evaluation report and training log CSV
//! - [`nuscenes`]: maps and annotation tables in the nuScenes layout
//! - [`workflow`]: synthetic data directories and sample building

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod image;
pub mod manifest;
pub mod nuscenes;
pub mod report;
pub mod scene_io;
pub mod workflow;

pub use error::{Error, Result};
