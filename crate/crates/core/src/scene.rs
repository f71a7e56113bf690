//! Semantic road layers and agent tracks.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{Point, Polygon, Rect};
use crate::math;
use crate::SAMPLE_PERIOD;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LayerKind {
    DrivableArea,
    RoadSegment,
    Lane,
    Walkway,
}

impl LayerKind {
    /// Painting order, bottom to top.
    pub const ALL: [LayerKind; 4] = [
        LayerKind::DrivableArea,
        LayerKind::RoadSegment,
        LayerKind::Lane,
        LayerKind::Walkway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::DrivableArea => "drivable_area",
            LayerKind::RoadSegment => "road_segment",
            LayerKind::Lane => "lane",
            LayerKind::Walkway => "walkway",
        }
    }

    pub fn from_name(name: &str) -> Option<LayerKind> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SemanticScene {
    pub scene_id: String,
    /// Indexed by [`LayerKind::index`].
    pub layers: [Vec<Polygon>; 4],
    pub bounds: Rect,
}

impl SemanticScene {
    pub fn empty(scene_id: impl Into<String>, bounds: Rect) -> Self {
        Self {
            scene_id: scene_id.into(),
            layers: Default::default(),
            bounds,
        }
    }

    pub fn layer(&self, kind: LayerKind) -> &[Polygon] {
        &self.layers[kind.index()]
    }

    pub fn layer_mut(&mut self, kind: LayerKind) -> &mut Vec<Polygon> {
        &mut self.layers[kind.index()]
    }

    /// True when `p` lies inside any polygon of `kind`.
    pub fn layer_contains(&self, kind: LayerKind, p: Point) -> bool {
        self.layer(kind).iter().any(|poly| poly.contains(p))
    }

    pub fn translated(&self, d: Point) -> SemanticScene {
        let mut layers: [Vec<Polygon>; 4] = Default::default();
        for (dst, src) in layers.iter_mut().zip(self.layers.iter()) {
            *dst = src.iter().map(|p| p.translated(d)).collect();
        }
        SemanticScene {
            scene_id: self.scene_id.clone(),
            layers,
            bounds: self.bounds.translated(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneViolation {
    TooFewVertices { layer: LayerKind, index: usize, count: usize },
    ZeroArea { layer: LayerKind, index: usize },
    NonFiniteVertex { layer: LayerKind, index: usize, vertex: usize },
    OutOfBounds { layer: LayerKind, index: usize, vertex: usize, point: Point },
    InvalidBounds,
}

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SceneViolation::TooFewVertices { layer, index, count } => {
                write!(f, "{layer}[{index}]: polygon has {count} vertices, need at least 3")
            }
            SceneViolation::ZeroArea { layer, index } => write!(f, "{layer}[{index}]: polygon has zero area"),
            SceneViolation::NonFiniteVertex { layer, index, vertex } => {
                write!(f, "{layer}[{index}]: vertex {vertex} is not finite")
            }
            SceneViolation::OutOfBounds { layer, index, vertex, point } => write!(
                f,
                "{layer}[{index}]: vertex {vertex} at ({}, {}) lies outside the scene bounds",
                point.x, point.y
            ),
            SceneViolation::InvalidBounds => f.write_str("scene bounds are empty or not finite"),
        }
    }
}

/// Every broken scene invariant; empty when the scene is valid.
pub fn validate_scene(scene: &SemanticScene) -> Vec<SceneViolation> {
    let mut out = Vec::new();
    let b = scene.bounds;
    if !(b.min.is_finite() && b.max.is_finite() && b.min.x < b.max.x && b.min.y < b.max.y) {
        out.push(SceneViolation::InvalidBounds);
    }
    for layer in LayerKind::ALL {
        for (index, poly) in scene.layer(layer).iter().enumerate() {
            let count = poly.vertices.len();
            if count < 3 {
                out.push(SceneViolation::TooFewVertices { layer, index, count });
                continue;
            }
            let mut finite = true;
            for (vertex, &p) in poly.vertices.iter().enumerate() {
                if !p.is_finite() {
                    finite = false;
                    out.push(SceneViolation::NonFiniteVertex { layer, index, vertex });
                } else if !b.contains(p) {
                    out.push(SceneViolation::OutOfBounds { layer, index, vertex, point: p });
                }
            }
            if finite && poly.area() <= 0.0 {
                out.push(SceneViolation::ZeroArea { layer, index });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KinematicState {
    /// Timestep index (0.5 s per step).
    pub t: usize,
    pub pos: Point,
    pub vel: Point,
    pub acc: Point,
    /// Heading in radians, counter-clockwise from +x, within `(-pi, pi]`.
    pub yaw: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentTrack {
    pub agent_id: String,
    /// Consecutive timesteps, oldest first.
    pub states: Vec<KinematicState>,
    pub sample_period: f64,
}

impl AgentTrack {
    /// Builds a track from positions on consecutive timesteps starting at
    /// `start_t`. Velocity and acceleration are backward differences at
    /// 2 Hz; the first state copies the second state's derivatives. Yaw
    /// follows the velocity heading, holding the last heading while stopped.
    pub fn from_positions(agent_id: impl Into<String>, start_t: usize, positions: &[Point]) -> Self {
        Self::from_positions_and_yaw(agent_id, start_t, positions, None)
    }

    /// As [`AgentTrack::from_positions`] but with externally supplied
    /// headings (e.g. from box annotations).
    pub fn from_positions_and_yaw(
        agent_id: impl Into<String>,
        start_t: usize,
        positions: &[Point],
        yaw: Option<&[f64]>,
    ) -> Self {
        let n = positions.len();
        let dt = SAMPLE_PERIOD;
        let mut vel = alloc::vec![Point::ZERO; n];
        for i in 1..n {
            vel[i] = (positions[i] - positions[i - 1]) * (1.0 / dt);
        }
        if n >= 2 {
            vel[0] = vel[1];
        }
        let mut acc = alloc::vec![Point::ZERO; n];
        for i in 1..n {
            acc[i] = (vel[i] - vel[i - 1]) * (1.0 / dt);
        }
        if n >= 2 {
            acc[0] = acc[1];
        }
        let yaws: Vec<f64> = match yaw {
            Some(y) => y.iter().map(|&a| math::normalize_angle(a)).collect(),
            None => heading_from_velocity(&vel),
        };
        let states = (0..n)
            .map(|i| KinematicState {
                t: start_t + i,
                pos: positions[i],
                vel: vel[i],
                acc: acc[i],
                yaw: yaws[i],
            })
            .collect();
        Self {
            agent_id: agent_id.into(),
            states,
            sample_period: dt,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first_t(&self) -> Option<usize> {
        self.states.first().map(|s| s.t)
    }

    pub fn last_t(&self) -> Option<usize> {
        self.states.last().map(|s| s.t)
    }

    /// State at absolute timestep `t`.
    pub fn state_at(&self, t: usize) -> Option<&KinematicState> {
        let first = self.first_t()?;
        t.checked_sub(first).and_then(|i| self.states.get(i))
    }

    /// Number of states at or before `t` (how much history `t` has).
    pub fn history_len(&self, t: usize) -> usize {
        match self.first_t() {
            Some(first) if t >= first && self.state_at(t).is_some() => t - first + 1,
            _ => 0,
        }
    }

    /// Number of states strictly after `t`.
    pub fn future_len(&self, t: usize) -> usize {
        match self.last_t() {
            Some(last) if self.state_at(t).is_some() => last - t,
            _ => 0,
        }
    }

    pub fn positions(&self) -> Vec<Point> {
        self.states.iter().map(|s| s.pos).collect()
    }

    pub fn translated(&self, d: Point) -> AgentTrack {
        let mut out = self.clone();
        for s in &mut out.states {
            s.pos += d;
        }
        out
    }
}

fn heading_from_velocity(vel: &[Point]) -> Vec<f64> {
    let mut out = alloc::vec![0.0; vel.len()];
    let mut last: Option<f64> = None;
    for (i, v) in vel.iter().enumerate() {
        if v.norm() > 1e-6 {
            last = Some(math::normalize_angle(math::atan2(v.y, v.x)));
        }
        out[i] = last.unwrap_or(f64::NAN);
    }
    // leading stopped states take the first observed heading, or 0
    let first = out.iter().copied().find(|y| !y.is_nan()).unwrap_or(0.0);
    for y in &mut out {
        if y.is_nan() {
            *y = first;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrackViolation {
    WrongSamplePeriod(f64),
    NonConsecutive { index: usize },
    YawOutOfRange { index: usize },
}

pub fn validate_track(track: &AgentTrack) -> Vec<TrackViolation> {
    let mut out = Vec::new();
    if track.sample_period != SAMPLE_PERIOD {
        out.push(TrackViolation::WrongSamplePeriod(track.sample_period));
    }
    for (i, w) in track.states.windows(2).enumerate() {
        if w[1].t != w[0].t + 1 {
            out.push(TrackViolation::NonConsecutive { index: i + 1 });
        }
    }
    for (i, s) in track.states.iter().enumerate() {
        if !(s.yaw > -core::f64::consts::PI && s.yaw <= core::f64::consts::PI) {
            out.push(TrackViolation::YawOutOfRange { index: i });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_scene() -> SemanticScene {
        let mut s = SemanticScene::empty("s", Rect::new(Point::new(-10.0, -10.0), Point::new(10.0, 10.0)));
        s.layer_mut(LayerKind::Lane)
            .push(Polygon::rectangle(Point::new(0.0, 0.0), Point::new(1.0, 1.0)));
        s
    }

    #[test]
    fn valid_scene_has_no_violations() {
        assert!(validate_scene(&unit_scene()).is_empty());
    }

    #[test]
    fn two_vertex_polygon_is_named() {
        let mut s = unit_scene();
        s.layer_mut(LayerKind::Walkway)
            .push(Polygon::new(alloc::vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0)]));
        let v = validate_scene(&s);
        assert_eq!(
            v,
            alloc::vec![SceneViolation::TooFewVertices { layer: LayerKind::Walkway, index: 0, count: 2 }]
        );
    }

    #[test]
    fn vertex_outside_bounds_is_reported() {
        let mut s = unit_scene();
        s.layer_mut(LayerKind::Lane)[0].vertices[2] = Point::new(11.0, 1.0);
        let v = validate_scene(&s);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], SceneViolation::OutOfBounds { layer: LayerKind::Lane, index: 0, vertex: 2, .. }));
    }

    #[test]
    fn collinear_polygon_has_zero_area() {
        let mut s = unit_scene();
        s.layer_mut(LayerKind::Lane).push(Polygon::new(alloc::vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(2.0, 0.0)
        ]));
        assert_eq!(validate_scene(&s), alloc::vec![SceneViolation::ZeroArea { layer: LayerKind::Lane, index: 1 }]);
    }

    #[test]
    fn kinematics_are_backward_differences() {
        let pos: Vec<Point> = (0..6).map(|i| Point::new((i * i) as f64, 1.0)).collect();
        let tr = AgentTrack::from_positions("a", 3, &pos);
        assert_eq!(tr.states[0].t, 3);
        for i in 1..6 {
            let v = (pos[i] - pos[i - 1]) * 2.0;
            assert_eq!(tr.states[i].vel, v);
        }
        for i in 1..6 {
            let a = (tr.states[i].vel - tr.states[i - 1].vel) * 2.0;
            assert_eq!(tr.states[i].acc, a);
        }
        assert_eq!(tr.states[0].vel, tr.states[1].vel);
        assert_eq!(tr.states[0].acc, tr.states[1].acc);
        assert!(validate_track(&tr).is_empty());
    }

    #[test]
    fn stopped_agent_keeps_heading() {
        let pos = [Point::new(0.0, 0.0), Point::new(0.0, 1.0), Point::new(0.0, 1.0)];
        let tr = AgentTrack::from_positions("a", 0, &pos);
        for s in &tr.states {
            assert!((s.yaw - core::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
    }

    #[test]
    fn history_and_future_lengths() {
        let pos: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 0.0)).collect();
        let tr = AgentTrack::from_positions("a", 5, &pos);
        assert_eq!(tr.history_len(5), 1);
        assert_eq!(tr.history_len(14), 10);
        assert_eq!(tr.history_len(4), 0);
        assert_eq!(tr.future_len(10), 4);
        assert_eq!(tr.future_len(20), 0);
    }
}
