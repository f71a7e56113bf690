//! Sliding-window training/evaluation samples.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::features::{build_motion_features, encode_deltas, DeltaTargets, MotionFeatures};
use crate::geometry::Point;
use crate::raster::{build_spatial_sequence, RasterChunk, RasterConfig};
use crate::scene::{AgentTrack, SemanticScene};

#[derive(Debug, Clone, PartialEq)]
pub struct SampleConfig {
    pub t_obs: usize,
    /// Future steps every sample must cover. Set this to the longest
    /// evaluation horizon so every horizon is scored on the same samples.
    pub future_len: usize,
    /// `None` builds motion-only samples (enough for P-Net/PD-Net).
    pub raster: Option<RasterConfig>,
}

impl SampleConfig {
    pub fn new(t_obs: usize, future_len: usize, raster: Option<RasterConfig>) -> Self {
        Self { t_obs, future_len, raster }
    }

    /// States a track needs at or before `t`: rasters at the oldest observed
    /// step need their own `t_obs` history.
    pub fn history_needed(&self) -> usize {
        if self.raster.is_some() {
            2 * self.t_obs - 1
        } else {
            self.t_obs
        }
    }
}

/// One (scene, agent, t) unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub scene_id: String,
    pub agent_id: String,
    pub t: usize,
    /// Raw 7-column motion features (`x, y` included).
    pub motion: MotionFeatures,
    /// `t_obs` chunks, oldest first; empty for motion-only samples.
    pub rasters: Vec<RasterChunk>,
    /// Observed positions `t - t_obs + 1 ..= t`.
    pub observed: Vec<Point>,
    /// Ground-truth positions `t + 1 ..= t + future_len`.
    pub future: Vec<Point>,
}

impl Sample {
    pub fn id(&self) -> String {
        format!("{}/{}/{}", self.scene_id, self.agent_id, self.t)
    }

    pub fn t_obs(&self) -> usize {
        self.observed.len()
    }

    pub fn last_observed(&self) -> Point {
        *self.observed.last().expect("samples always hold at least one observed position")
    }

    pub fn future_positions(&self, t_hor: usize) -> Result<&[Point]> {
        if t_hor > self.future.len() {
            return Err(Error::InsufficientFuture { t: self.t, needed: t_hor, available: self.future.len() });
        }
        Ok(&self.future[..t_hor])
    }

    pub fn delta_targets(&self, t_hor: usize) -> Result<DeltaTargets> {
        let mut pts = Vec::with_capacity(t_hor + 1);
        pts.push(self.last_observed());
        pts.extend_from_slice(self.future_positions(t_hor)?);
        encode_deltas(&pts, 0, t_hor)
    }
}

/// Timesteps of `track` that admit a sample under `config`.
pub fn sample_timesteps(track: &AgentTrack, config: &SampleConfig) -> Vec<usize> {
    let (Some(first), Some(last)) = (track.first_t(), track.last_t()) else {
        return Vec::new();
    };
    let lo = first + config.history_needed().max(1) - 1;
    if last < config.future_len || config.t_obs == 0 {
        return Vec::new();
    }
    let hi = last - config.future_len;
    if hi < lo {
        return Vec::new();
    }
    (lo..=hi).collect()
}

/// One sample per (agent, t) with full history and future coverage,
/// stride one timestep, in track order.
pub fn build_samples(scene: &SemanticScene, tracks: &[AgentTrack], config: &SampleConfig) -> Result<Vec<Sample>> {
    if config.t_obs == 0 {
        return Err(Error::InvalidConfig("t_obs must be at least 1".into()));
    }
    if let Some(r) = &config.raster {
        r.validate()?;
    }
    let mut out = Vec::new();
    for track in tracks {
        for t in sample_timesteps(track, config) {
            let motion = build_motion_features(track, t, config.t_obs, true)?;
            let rasters = match &config.raster {
                Some(r) => build_spatial_sequence(scene, track, t, config.t_obs, r)?,
                None => Vec::new(),
            };
            let observed = (t + 1 - config.t_obs..=t)
                .map(|tau| track.state_at(tau).expect("covered").pos)
                .collect();
            let future = (t + 1..=t + config.future_len)
                .map(|tau| track.state_at(tau).expect("covered").pos)
                .collect();
            out.push(Sample {
                scene_id: scene.scene_id.clone(),
                agent_id: track.agent_id.clone(),
                t,
                motion,
                rasters,
                observed,
                future,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rect;

    fn track(n: usize, id: &str) -> AgentTrack {
        let pos: Vec<Point> = (0..n).map(|i| Point::new(i as f64, 0.0)).collect();
        AgentTrack::from_positions(id, 0, &pos)
    }

    fn scene() -> SemanticScene {
        SemanticScene::empty("s", Rect::new(Point::new(-10.0, -10.0), Point::new(100.0, 10.0)))
    }

    #[test]
    fn minimum_length_track_gives_one_sample() {
        let cfg = SampleConfig::new(8, 8, Some(RasterConfig::with_image_size(16)));
        let n = cfg.history_needed() + cfg.future_len;
        let samples = build_samples(&scene(), &[track(n, "a")], &cfg).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].rasters.len(), 8);
        assert_eq!(samples[0].future.len(), 8);
        assert!(build_samples(&scene(), &[track(n - 1, "a")], &cfg).unwrap().is_empty());
    }

    #[test]
    fn motion_only_windows() {
        let cfg = SampleConfig::new(8, 8, None);
        let samples = build_samples(&scene(), &[track(20, "a")], &cfg).unwrap();
        assert_eq!(samples.len(), 20 - 8 - 8 + 1);
        let s = &samples[0];
        assert_eq!(s.t, 7);
        assert_eq!(s.last_observed(), Point::new(7.0, 0.0));
        assert_eq!(s.future[0], Point::new(8.0, 0.0));
        assert_eq!(s.delta_targets(8).unwrap().get(0), Point::new(1.0, 0.0));
        assert!(s.delta_targets(9).is_err());
    }

    #[test]
    fn agents_keep_their_ids() {
        let cfg = SampleConfig::new(2, 2, None);
        let samples = build_samples(&scene(), &[track(5, "a"), track(5, "b")], &cfg).unwrap();
        let ids: Vec<&str> = samples.iter().map(|s| s.agent_id.as_str()).collect();
        assert_eq!(ids, ["a", "a", "b", "b"]);
        assert_ne!(samples[0].id(), samples[2].id());
    }
}
