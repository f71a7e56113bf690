use alloc::boxed::Box;
use alloc::string::String;

use crate::nn::Model;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scene spec: {0}")]
    InvalidSceneSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("insufficient history at timestep {t}: need {needed} states ending at t, only {available} available")]
    InsufficientHistory {
        t: usize,
        needed: usize,
        available: usize,
    },

    #[error("insufficient future coverage at timestep {t}: need {needed} future positions, only {available} available")]
    InsufficientFuture {
        t: usize,
        needed: usize,
        available: usize,
    },

    #[error("timestep {t} is not covered by the track")]
    TimestepOutOfRange { t: usize },

    #[error("raster at timestep {t}: {source}")]
    RasterAt { t: usize, source: Box<Error> },

    #[error("shape mismatch in {block}: expected {expected}, found {found}")]
    Shape {
        block: &'static str,
        expected: String,
        found: String,
    },

    #[error("dimension chain broken: {0}")]
    DimensionChain(String),

    #[error("empty input sequence")]
    EmptySequence,

    #[error("horizon must be at least 1, got {0}")]
    InvalidHorizon(usize),

    #[error("{kind} does not accept raster input")]
    UnexpectedRaster { kind: &'static str },

    #[error("non-finite gradient in parameter block {block}")]
    NonFiniteGradient { block: String },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("empty metric input")]
    EmptyMetricInput,

    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite")]
    Diverged {
        epoch: usize,
        step: usize,
        last_good: Box<Model>,
    },
}

pub(crate) fn shape_err(
    block: &'static str,
    expected: impl core::fmt::Display,
    found: impl core::fmt::Display,
) -> Error {
    use alloc::string::ToString;
    Error::Shape {
        block,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
