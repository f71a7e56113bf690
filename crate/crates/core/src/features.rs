//! Motion feature matrices, per-step delta targets and input normalization.

use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::geometry::Point;
use crate::math;
use crate::scene::AgentTrack;
use crate::tensor::Matrix;

/// Column names of the 7-column layout; the 5-column layout drops `x, y`.
pub const MOTION_COLUMNS: [&str; 7] = ["x", "y", "vel_x", "vel_y", "acc_x", "acc_y", "yaw"];

/// `t_obs x 5` (`[vel_x, vel_y, acc_x, acc_y, yaw]`) or `t_obs x 7` (with
/// `x, y` prepended) observed motion, oldest row first.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionFeatures(pub Matrix);

impl MotionFeatures {
    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    pub fn includes_positions(&self) -> bool {
        self.cols() == 7
    }

    /// The 5-column view of a 7-column matrix (identity on 5 columns).
    pub fn without_positions(&self) -> MotionFeatures {
        if self.includes_positions() {
            MotionFeatures(self.0.column_slice(2, 5))
        } else {
            self.clone()
        }
    }
}

/// `t_hor x 2` one-step position differences, metres, global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTargets(pub Matrix);

impl DeltaTargets {
    pub fn from_deltas(deltas: &[Point]) -> Self {
        let mut m = Matrix::zeros(deltas.len(), 2);
        for (k, d) in deltas.iter().enumerate() {
            m.set(k, 0, d.x);
            m.set(k, 1, d.y);
        }
        DeltaTargets(m)
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, k: usize) -> Point {
        Point::new(self.0.get(k, 0), self.0.get(k, 1))
    }
}

/// Observed motion for timesteps `t - t_obs + 1 ..= t`.
pub fn build_motion_features(
    track: &AgentTrack,
    t: usize,
    t_obs: usize,
    include_positions: bool,
) -> Result<MotionFeatures> {
    let available = track.history_len(t);
    if t_obs == 0 || available < t_obs {
        return Err(Error::InsufficientHistory { t, needed: t_obs, available });
    }
    let cols = if include_positions { 7 } else { 5 };
    let mut m = Matrix::zeros(t_obs, cols);
    for (row, tau) in (t + 1 - t_obs..=t).enumerate() {
        let s = track.state_at(tau).expect("covered by history check");
        let full = [s.pos.x, s.pos.y, s.vel.x, s.vel.y, s.acc.x, s.acc.y, s.yaw];
        m.row_mut(row).copy_from_slice(&full[7 - cols..]);
    }
    Ok(MotionFeatures(m))
}

/// Row `k` is `positions[t + k + 1] - positions[t + k]`; `positions` is
/// indexed by timestep.
pub fn encode_deltas(positions: &[Point], t: usize, t_hor: usize) -> Result<DeltaTargets> {
    if t >= positions.len() || t + t_hor >= positions.len() {
        return Err(Error::InsufficientFuture {
            t,
            needed: t_hor,
            available: positions.len().saturating_sub(t + 1),
        });
    }
    let deltas: Vec<Point> = (0..t_hor).map(|k| positions[t + k + 1] - positions[t + k]).collect();
    Ok(DeltaTargets::from_deltas(&deltas))
}

/// Cumulative sum of `deltas` starting from the last observed position.
pub fn reconstruct_positions(last_observed: Point, deltas: &DeltaTargets) -> Vec<Point> {
    let mut acc = last_observed;
    (0..deltas.len())
        .map(|k| {
            acc += deltas.get(k);
            acc
        })
        .collect()
}

/// Per-column standardization parameters. The final (yaw) column passes
/// through unchanged.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn identity(cols: usize) -> Self {
        Self { mean: alloc::vec![0.0; cols], std: alloc::vec![1.0; cols] }
    }

    pub fn cols(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormFit {
    pub stats: NormStats,
    /// Columns whose variance was zero and got clamped to 1.
    pub clamped_columns: Vec<usize>,
}

/// Population mean and standard deviation over every row of the given
/// matrices (all must share a column count).
pub fn fit_norm_stats<'a, I>(features: I) -> Result<NormFit>
where
    I: IntoIterator<Item = &'a MotionFeatures>,
{
    let mut cols = None;
    let mut sum: Vec<f64> = Vec::new();
    let mut sum_sq: Vec<f64> = Vec::new();
    let mut count = 0usize;
    let all: Vec<&MotionFeatures> = features.into_iter().collect();
    for f in &all {
        let c = *cols.get_or_insert(f.cols());
        if f.cols() != c {
            return Err(shape_err("fit_norm_stats", c, f.cols()));
        }
        if sum.is_empty() {
            sum = alloc::vec![0.0; c];
            sum_sq = alloc::vec![0.0; c];
        }
        for row in f.0.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                sum[j] += v;
            }
            count += 1;
        }
    }
    let Some(cols) = cols.filter(|_| count > 0) else {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    };
    let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
    // second pass for a numerically stable variance
    for f in &all {
        for row in f.0.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                let d = v - mean[j];
                sum_sq[j] += d * d;
            }
        }
    }
    let mut stats = NormStats::identity(cols);
    let mut clamped = Vec::new();
    for j in 0..cols - 1 {
        let var = sum_sq[j] / count as f64;
        stats.mean[j] = mean[j];
        if var > 1e-18 {
            stats.std[j] = math::sqrt(var);
        } else {
            stats.std[j] = 1.0;
            clamped.push(j);
        }
    }
    Ok(NormFit { stats, clamped_columns: clamped })
}

pub fn normalize_features(features: &MotionFeatures, stats: &NormStats) -> Result<MotionFeatures> {
    if features.cols() != stats.cols() {
        return Err(shape_err("normalize_features", stats.cols(), features.cols()));
    }
    let mut m = features.0.clone();
    let cols = m.cols();
    for r in 0..m.rows() {
        for (j, v) in m.row_mut(r).iter_mut().enumerate().take(cols - 1) {
            *v = (*v - stats.mean[j]) / stats.std[j];
        }
    }
    Ok(MotionFeatures(m))
}
