use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::math;

/// Disjoint train/validation/test partition of sample ids.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitIndex {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.6, 0.2, 0.2];

/// Seeded shuffle followed by a 60/20/20 partition.
pub fn split_dataset(ids: &[String], seed: u64) -> Result<SplitIndex> {
    split_dataset_with(ids, seed, DEFAULT_SPLIT)
}

pub fn split_dataset_with(ids: &[String], seed: u64, fractions: [f64; 3]) -> Result<SplitIndex> {
    validate_fractions(fractions)?;
    if ids.len() < 5 {
        return Err(Error::TooFewSamples { needed: 5, found: ids.len() });
    }
    let mut order: Vec<String> = ids.to_vec();
    order.sort();
    order.dedup();
    if order.len() != ids.len() {
        return Err(Error::InvalidConfig("sample ids must be unique".into()));
    }
    order.shuffle(&mut math::seeded(seed));
    let n = order.len() as f64;
    let n_train = libm::round(n * fractions[0]) as usize;
    let n_val = (libm::round(n * fractions[1]) as usize).min(order.len() - n_train);
    let test = order.split_off(n_train + n_val);
    let val = order.split_off(n_train);
    Ok(SplitIndex { train: order, val, test })
}

pub(crate) fn validate_fractions(f: [f64; 3]) -> Result<()> {
    if f.iter().any(|v| !v.is_finite() || *v < 0.0) || libm::fabs(f.iter().sum::<f64>() - 1.0) > 1e-9 {
        return Err(Error::InvalidConfig(alloc::format!("split fractions {f:?} must be non-negative and sum to 1")));
    }
    Ok(())
}
