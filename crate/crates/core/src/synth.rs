//! Deterministic synthetic driving scenes: a road template, its semantic
//! layers, and agents following lane centrelines with bounded lateral noise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{Error, Result};
use crate::geometry::{filleted_path, strip_polygon, Point, Polygon, Polyline, Rect};
use crate::math::{self, Rng};
use crate::scene::{AgentTrack, LayerKind, SemanticScene};
use crate::SAMPLE_PERIOD;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RoadTemplate {
    /// Two-lane road along +x.
    Straight,
    /// Two-lane road with a 90 degree left bend.
    Curve,
    /// Two two-lane roads crossing at the origin.
    Intersection,
}

impl RoadTemplate {
    pub const ALL: [RoadTemplate; 3] = [RoadTemplate::Straight, RoadTemplate::Curve, RoadTemplate::Intersection];

    pub fn name(self) -> &'static str {
        match self {
            RoadTemplate::Straight => "straight",
            RoadTemplate::Curve => "curve",
            RoadTemplate::Intersection => "intersection",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == s)
    }
}

impl fmt::Display for RoadTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SceneSpec {
    pub template: RoadTemplate,
    pub lane_width: f64,
    pub shoulder: f64,
    pub walkway_width: f64,
    /// Centreline radius of the bend (curve template only).
    pub curve_radius: f64,
    pub num_agents: usize,
    /// States per agent track.
    pub track_len: usize,
    /// Initial speed range, m/s.
    pub speed_range: (f64, f64),
    /// Constant longitudinal acceleration range, m/s^2.
    pub accel_range: (f64, f64),
    /// Maximum absolute lateral deviation from the lane centre, metres.
    pub lateral_noise: f64,
    /// Translation applied to the whole scene.
    pub origin: Point,
    pub scene_id: Option<String>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            template: RoadTemplate::Straight,
            lane_width: 3.5,
            shoulder: 0.5,
            walkway_width: 2.0,
            curve_radius: 25.0,
            num_agents: 1,
            track_len: 40,
            speed_range: (4.0, 10.0),
            accel_range: (-0.5, 0.5),
            lateral_noise: 0.05,
            origin: Point::ZERO,
            scene_id: None,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSceneSpec(msg));
        let finite = [
            self.lane_width,
            self.shoulder,
            self.walkway_width,
            self.curve_radius,
            self.speed_range.0,
            self.speed_range.1,
            self.accel_range.0,
            self.accel_range.1,
            self.lateral_noise,
            self.origin.x,
            self.origin.y,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return bad("all dimensions must be finite".into());
        }
        if self.lane_width <= 0.0 {
            return bad(format!("lane_width must be positive, got {}", self.lane_width));
        }
        if self.shoulder < 0.0 {
            return bad(format!("shoulder must be non-negative, got {}", self.shoulder));
        }
        if self.walkway_width <= 0.0 {
            return bad(format!("walkway_width must be positive, got {}", self.walkway_width));
        }
        if self.num_agents == 0 {
            return bad("num_agents must be at least 1".into());
        }
        if self.track_len < 2 {
            return bad(format!("track_len must be at least 2, got {}", self.track_len));
        }
        let (v0, v1) = self.speed_range;
        if v0 < 0.0 || v1 < v0 {
            return bad(format!("speed_range must satisfy 0 <= min <= max, got ({v0}, {v1})"));
        }
        if self.accel_range.1 < self.accel_range.0 {
            return bad("accel_range min exceeds max".into());
        }
        if self.lateral_noise < 0.0 || self.lateral_noise > 0.25 * self.lane_width {
            return bad(format!(
                "lateral_noise must lie in [0, lane_width / 4], got {}",
                self.lateral_noise
            ));
        }
        if self.template == RoadTemplate::Curve {
            let outer = self.lane_width + self.shoulder + self.walkway_width;
            if self.curve_radius <= outer + 0.5 {
                return bad(format!(
                    "curve_radius {} must exceed the road half-width including walkway ({outer}) by 0.5 m",
                    self.curve_radius
                ));
            }
        }
        Ok(())
    }

    /// Upper bound on the distance an agent travels over its track.
    fn max_travel(&self) -> f64 {
        let horizon = (self.track_len - 1) as f64 * SAMPLE_PERIOD;
        self.speed_range.1 * horizon + 0.5 * self.accel_range.1.max(0.0) * horizon * horizon
    }
}

const START_MARGIN: f64 = 5.0;
const ARC_SEGMENTS: usize = 48;

/// Generates the scene and one track per agent. Deterministic in
/// `(seed, spec)`.
pub fn generate_synthetic_scene(seed: u64, spec: &SceneSpec) -> Result<(SemanticScene, Vec<AgentTrack>)> {
    spec.validate()?;
    let mut rng = math::seeded(seed);
    let scene_id = spec
        .scene_id
        .clone()
        .unwrap_or_else(|| format!("{}-{}", spec.template, seed));
    let layout = match spec.template {
        RoadTemplate::Straight => straight_layout(spec),
        RoadTemplate::Curve => curve_layout(spec),
        RoadTemplate::Intersection => intersection_layout(spec),
    };

    let mut tracks = Vec::with_capacity(spec.num_agents);
    for i in 0..spec.num_agents {
        let route = match spec.template {
            RoadTemplate::Intersection => {
                let k = rand::Rng::random_range(&mut rng, 0..layout.routes.len());
                &layout.routes[k]
            }
            _ => &layout.routes[i % layout.routes.len()],
        };
        let positions = drive_route(route, spec, &mut rng);
        let positions: Vec<Point> = positions.into_iter().map(|p| p + spec.origin).collect();
        tracks.push(AgentTrack::from_positions(format!("agent-{i}"), 0, &positions));
    }

    let mut scene = SemanticScene::empty(scene_id, Rect::new(Point::ZERO, Point::ZERO));
    for (kind, polys) in layout.layers {
        scene
            .layer_mut(kind)
            .extend(polys.into_iter().map(|p| p.translated(spec.origin)));
    }
    let all = scene.layers.iter().flatten().flat_map(|p| p.vertices.iter().copied());
    scene.bounds = Rect::bounding(all)
        .expect("templates always produce polygons")
        .expanded(5.0);
    Ok((scene, tracks))
}

struct Layout {
    layers: Vec<(LayerKind, Vec<Polygon>)>,
    /// Lane-centre routes in driving direction.
    routes: Vec<Polyline>,
}

fn drive_route(route: &Polyline, spec: &SceneSpec, rng: &mut Rng) -> Vec<Point> {
    let v0 = math::uniform(rng, spec.speed_range.0, spec.speed_range.1);
    let a = math::uniform(rng, spec.accel_range.0, spec.accel_range.1);
    let horizon = (spec.track_len - 1) as f64 * SAMPLE_PERIOD;
    let travel = arc_length(v0, a, horizon);
    let s_max = (route.length() - START_MARGIN - travel).max(START_MARGIN);
    let s0 = math::uniform(rng, START_MARGIN, s_max);
    (0..spec.track_len)
        .map(|k| {
            let tau = k as f64 * SAMPLE_PERIOD;
            let (p, tangent) = route.sample(s0 + arc_length(v0, a, tau));
            let lateral = if spec.lateral_noise > 0.0 {
                math::uniform(rng, -spec.lateral_noise, spec.lateral_noise)
            } else {
                0.0
            };
            p + tangent.perp() * lateral
        })
        .collect()
}

/// Distance covered after `tau` seconds from speed `v0` under constant
/// acceleration `a`, never reversing.
fn arc_length(v0: f64, a: f64, tau: f64) -> f64 {
    if a < 0.0 {
        let stop = -v0 / a;
        let t = tau.min(stop);
        v0 * t + 0.5 * a * t * t
    } else {
        v0 * tau + 0.5 * a * tau * tau
    }
}

/// Layers shared by the straight and curve templates: everything is a
/// lateral strip of one centreline.
fn strip_layers(center: &Polyline, spec: &SceneSpec) -> Vec<(LayerKind, Vec<Polygon>)> {
    let w = spec.lane_width;
    let hw = w + spec.shoulder;
    let ww = spec.walkway_width;
    alloc::vec![
        (LayerKind::DrivableArea, alloc::vec![strip_polygon(center, -hw, hw)]),
        (LayerKind::RoadSegment, alloc::vec![strip_polygon(center, -w, w)]),
        (
            LayerKind::Lane,
            alloc::vec![strip_polygon(center, -w, 0.0), strip_polygon(center, 0.0, w)]
        ),
        (
            LayerKind::Walkway,
            alloc::vec![strip_polygon(center, -hw - ww, -hw), strip_polygon(center, hw, hw + ww)]
        ),
    ]
}

fn straight_layout(spec: &SceneSpec) -> Layout {
    let length = spec.max_travel() + 2.0 * START_MARGIN + 30.0;
    let center = Polyline::new(alloc::vec![Point::new(0.0, 0.0), Point::new(length, 0.0)]);
    let half = spec.lane_width / 2.0;
    Layout {
        layers: strip_layers(&center, spec),
        routes: alloc::vec![center.offset(-half), center.offset(half).reversed()],
    }
}

fn curve_layout(spec: &SceneSpec) -> Layout {
    let r = spec.curve_radius;
    let needed = spec.max_travel() + 2.0 * START_MARGIN + 30.0;
    let leg = r + ((needed - PI * r / 2.0) / 2.0).max(20.0);
    let center = Polyline::new(filleted_path(
        Point::new(0.0, 0.0),
        Point::new(leg, 0.0),
        Point::new(leg, leg),
        r,
        ARC_SEGMENTS,
    ));
    let half = spec.lane_width / 2.0;
    Layout {
        layers: strip_layers(&center, spec),
        routes: alloc::vec![center.offset(-half), center.offset(half).reversed()],
    }
}

fn intersection_layout(spec: &SceneSpec) -> Layout {
    let w = spec.lane_width;
    let hw = w + spec.shoulder;
    let ww = spec.walkway_width;
    let h = (spec.max_travel() / 2.0 + START_MARGIN + 20.0).max(40.0);
    let p = Point::new;

    let plus = Polygon::new(alloc::vec![
        p(-h, -hw),
        p(-hw, -hw),
        p(-hw, -h),
        p(hw, -h),
        p(hw, -hw),
        p(h, -hw),
        p(h, hw),
        p(hw, hw),
        p(hw, h),
        p(-hw, h),
        p(-hw, hw),
        p(-h, hw),
    ]);
    let rect = |x0: f64, y0: f64, x1: f64, y1: f64| Polygon::rectangle(p(x0, y0), p(x1, y1));
    let segments = alloc::vec![rect(-h, -w, h, w), rect(-w, -h, w, h)];
    let lanes = alloc::vec![
        rect(-h, -w, h, 0.0),
        rect(-h, 0.0, h, w),
        rect(-w, -h, 0.0, h),
        rect(0.0, -h, w, h),
    ];
    let mut walkways = Vec::new();
    for &(a, b) in &[(hw, h), (-h, -hw)] {
        walkways.push(rect(a, hw, b, hw + ww));
        walkways.push(rect(a, -hw - ww, b, -hw));
        walkways.push(rect(hw, a, hw + ww, b));
        walkways.push(rect(-hw - ww, a, -hw, b));
    }

    // Right-hand traffic: eastbound y = -w/2, westbound y = +w/2,
    // northbound x = +w/2, southbound x = -w/2.
    let q = w / 2.0;
    let entries = [
        (p(-h, -q), p(1.0, 0.0)),
        (p(h, q), p(-1.0, 0.0)),
        (p(q, -h), p(0.0, 1.0)),
        (p(-q, h), p(0.0, -1.0)),
    ];
    let exits = [
        (p(h, -q), p(1.0, 0.0)),
        (p(-h, q), p(-1.0, 0.0)),
        (p(q, h), p(0.0, 1.0)),
        (p(-q, -h), p(0.0, -1.0)),
    ];
    let noise_room = (q + spec.shoulder - spec.lateral_noise - 0.1).max(0.2);
    let right_radius = (noise_room / (1.0 - core::f64::consts::FRAC_1_SQRT_2)).clamp(1.0, 8.0);
    let left_radius = hw;
    let mut routes = Vec::new();
    for &(start, dir_in) in &entries {
        for &(end, dir_out) in &exits {
            let turn = dir_in.cross(dir_out);
            if dir_in.dot(dir_out) < -0.5 {
                continue; // U-turn
            }
            let route = if turn.abs() < 1e-9 {
                alloc::vec![start, end]
            } else {
                // corner where the entry lane line meets the exit lane line
                let corner = if dir_in.x != 0.0 { p(end.x, start.y) } else { p(start.x, end.y) };
                let radius = if turn > 0.0 { left_radius } else { right_radius };
                filleted_path(start, corner, end, radius, ARC_SEGMENTS / 2)
            };
            routes.push(Polyline::new(route));
        }
    }

    Layout {
        layers: alloc::vec![
            (LayerKind::DrivableArea, alloc::vec![plus]),
            (LayerKind::RoadSegment, segments),
            (LayerKind::Lane, lanes),
            (LayerKind::Walkway, walkways),
        ],
        routes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{validate_scene, validate_track};

    #[test]
    fn constant_speed_straight_track_steps_two_and_a_half_metres() {
        let spec = SceneSpec {
            speed_range: (5.0, 5.0),
            accel_range: (0.0, 0.0),
            lateral_noise: 0.0,
            ..SceneSpec::default()
        };
        let (_, tracks) = generate_synthetic_scene(7, &spec).unwrap();
        assert_eq!(tracks.len(), 1);
        for w in tracks[0].states.windows(2) {
            let d = w[1].pos - w[0].pos;
            assert!((d.x - 2.5).abs() < 1e-9 && d.y.abs() < 1e-12, "{d:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        for template in RoadTemplate::ALL {
            let spec = SceneSpec { template, num_agents: 4, ..SceneSpec::default() };
            let a = generate_synthetic_scene(7, &spec).unwrap();
            let b = generate_synthetic_scene(7, &spec).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn generated_scenes_and_tracks_are_valid() {
        for template in RoadTemplate::ALL {
            for seed in 0..5 {
                let spec = SceneSpec { template, num_agents: 6, ..SceneSpec::default() };
                let (scene, tracks) = generate_synthetic_scene(seed, &spec).unwrap();
                assert!(validate_scene(&scene).is_empty(), "{template} {seed}: {:?}", validate_scene(&scene));
                for tr in &tracks {
                    assert!(validate_track(tr).is_empty());
                    assert_eq!(tr.len(), spec.track_len);
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let cases = [
            SceneSpec { lane_width: 0.0, ..SceneSpec::default() },
            SceneSpec { lane_width: -1.0, ..SceneSpec::default() },
            SceneSpec { num_agents: 0, ..SceneSpec::default() },
            SceneSpec { track_len: 1, ..SceneSpec::default() },
            SceneSpec { walkway_width: 0.0, ..SceneSpec::default() },
            SceneSpec { template: RoadTemplate::Curve, curve_radius: 3.0, ..SceneSpec::default() },
            SceneSpec { lateral_noise: 2.0, ..SceneSpec::default() },
        ];
        for spec in cases {
            let err = generate_synthetic_scene(1, &spec).unwrap_err();
            assert!(matches!(err, Error::InvalidSceneSpec(_)), "{spec:?}");
        }
    }
}
