//! Map-conditioned trajectory prediction.
//!
//! A vehicle's observed motion (velocity, acceleration, yaw) and a sequence of
//! agent-centred bird's-eye rasters of the road layout are encoded by a small
//! CNN and a motion MLP, concatenated, fed through a weight-shared LSTM
//! encoder-decoder and finally mapped by an MLP head to per-step position
//! deltas `(dx, dy)`. Absolute trajectories are recovered by cumulative sums.
//!
//! The crate is `no_std` (it needs `alloc`). Enable the `std` feature for
//! runtime SIMD dispatch in the matrix kernels, and `serde` for
//! (de)serializable configuration and report types. File formats, PNG
//! export and the command line live in the `tsmnet` companion crate.
//!
//! Module map:
//! - [`scene`] / [`synth`]: semantic road layers, agent tracks, synthetic scenes
//! - [`raster`]: agent-centred semantic map chunks
//! - [`features`]: motion features, delta targets, normalization
//! - [`dataset`]: sliding-window samples
//! - [`nn`]: CNN, motion MLP, LSTM encoder-decoder, output head and baselines
//! - [`train`]: splitting, MSE, Adam, the training loop and experiment grids
//! - [`eval`]: ADE/FDE, horizon sweeps, report tables and prediction figures

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod math;
pub mod nn;
pub mod raster;
pub mod scene;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{Point, Polygon, Rect};

/// Sampling period of every track, seconds (2 Hz keyframes).
pub const SAMPLE_PERIOD: f64 = 0.5;
