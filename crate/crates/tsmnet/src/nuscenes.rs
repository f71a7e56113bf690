//! Maps and 3D box annotations in the nuScenes directory layout.
//!
//! ```text
//! <root>/<version>/{scene,sample,sample_annotation,instance,category,log}.json
//! <root>/maps/expansion/<location>.json
//! ```
//!
//! Only the fields used here are read. Map polygons keep their exterior
//! ring; holes are dropped. Keyframes are indexed from 0 at the first
//! sample of each scene, so one timestep is one keyframe (2 Hz).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;
use tsmnet_core::math::normalize_angle;
use tsmnet_core::scene::{AgentTrack, LayerKind, SemanticScene};
use tsmnet_core::{Point, Polygon, Rect};

use crate::error::{Error, Result};

pub const TABLES: [&str; 6] = ["scene", "sample", "sample_annotation", "instance", "category", "log"];

#[derive(Debug, Clone, Deserialize)]
pub struct SceneRecord {
    pub token: String,
    pub log_token: String,
    pub name: String,
    pub first_sample_token: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SampleRecord {
    pub token: String,
    /// Microseconds.
    pub timestamp: i64,
    pub scene_token: String,
    #[serde(default)]
    pub next: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct AnnotationRecord {
    pub token: String,
    pub sample_token: String,
    pub instance_token: String,
    pub translation: [f64; 3],
    /// Quaternion `w, x, y, z`.
    pub rotation: [f64; 4],
}

#[derive(Debug, Clone, Deserialize)]
pub struct InstanceRecord {
    pub token: String,
    pub category_token: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct CategoryRecord {
    pub token: String,
    pub name: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LogRecord {
    pub token: String,
    pub location: String,
}

#[derive(Debug, Clone, Deserialize)]
struct MapNode {
    token: String,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct MapPolygon {
    token: String,
    exterior_node_tokens: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct MultiPolygonRecord {
    polygon_tokens: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct PolygonRecord {
    polygon_token: String,
}

#[derive(Debug, Clone, Deserialize)]
struct MapFile {
    node: Vec<MapNode>,
    polygon: Vec<MapPolygon>,
    drivable_area: Option<Vec<MultiPolygonRecord>>,
    road_segment: Option<Vec<PolygonRecord>>,
    lane: Option<Vec<PolygonRecord>>,
    walkway: Option<Vec<PolygonRecord>>,
}

/// A map with its four layers resolved to vertex lists.
#[derive(Debug, Clone, PartialEq)]
pub struct MapLayers {
    pub name: String,
    pub layers: [Vec<Polygon>; 4],
    pub bounds: Rect,
    pub missing: Vec<LayerKind>,
}

/// Every table and every map referenced by a log, parsed up front.
///
/// Coordinates stay in the map frame (meters, +z up); yaw is measured
/// counter-clockwise from the map +x axis.
#[derive(Debug, Clone)]
pub struct DatasetDescriptor {
    pub root: PathBuf,
    pub version: String,
    pub scenes: Vec<SceneRecord>,
    pub samples: Vec<SampleRecord>,
    pub annotations: Vec<AnnotationRecord>,
    pub instances: Vec<InstanceRecord>,
    pub categories: Vec<CategoryRecord>,
    pub logs: Vec<LogRecord>,
    pub maps: BTreeMap<String, MapLayers>,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
}

impl DatasetDescriptor {
    /// Loads every table under `<root>/<version>` and every map a log points
    /// at. Any missing or unparseable file is an error.
    pub fn open(root: impl Into<PathBuf>, version: &str) -> Result<Self> {
        let root = root.into();
        let dir = root.join(version);
        let table = |name: &str| dir.join(format!("{name}.json"));
        let scenes: Vec<SceneRecord> = read_json(&table("scene"))?;
        let samples: Vec<SampleRecord> = read_json(&table("sample"))?;
        let annotations: Vec<AnnotationRecord> = read_json(&table("sample_annotation"))?;
        let instances: Vec<InstanceRecord> = read_json(&table("instance"))?;
        let categories: Vec<CategoryRecord> = read_json(&table("category"))?;
        let logs: Vec<LogRecord> = read_json(&table("log"))?;

        let locations: BTreeSet<&str> = logs.iter().map(|l| l.location.as_str()).collect();
        let mut maps = BTreeMap::new();
        for loc in locations {
            let path = map_path(&root, loc);
            maps.insert(loc.to_string(), read_map(&path, loc)?);
        }
        let desc = Self { root, version: version.to_string(), scenes, samples, annotations, instances, categories, logs, maps };
        desc.check_references(&table("scene"))?;
        Ok(desc)
    }

    fn check_references(&self, scene_table: &Path) -> Result<()> {
        let logs: BTreeSet<&str> = self.logs.iter().map(|l| l.token.as_str()).collect();
        let samples: BTreeSet<&str> = self.samples.iter().map(|s| s.token.as_str()).collect();
        for s in &self.scenes {
            if !logs.contains(s.log_token.as_str()) {
                return Err(Error::format(scene_table, format!("scene {} refers to unknown log {}", s.name, s.log_token)));
            }
            if !samples.contains(s.first_sample_token.as_str()) {
                return Err(Error::format(
                    scene_table,
                    format!("scene {} refers to unknown sample {}", s.name, s.first_sample_token),
                ));
            }
        }
        Ok(())
    }

    pub fn scene_names(&self) -> Vec<&str> {
        self.scenes.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn map_names(&self) -> Vec<&str> {
        self.maps.keys().map(String::as_str).collect()
    }

    fn scene(&self, scene_name: &str) -> Result<&SceneRecord> {
        self.scenes
            .iter()
            .find(|s| s.name == scene_name || s.token == scene_name)
            .ok_or_else(|| Error::format(&self.root.join(&self.version), format!("unknown scene {scene_name}")))
    }

    /// Map location of a scene's log.
    pub fn scene_location(&self, scene_name: &str) -> Result<&str> {
        let scene = self.scene(scene_name)?;
        let log = self.logs.iter().find(|l| l.token == scene.log_token).expect("checked at open");
        Ok(&log.location)
    }

    /// Keyframes of a scene in order, following `next` links.
    fn keyframes(&self, scene: &SceneRecord) -> Result<Vec<&SampleRecord>> {
        let by_token: HashMap<&str, &SampleRecord> = self.samples.iter().map(|s| (s.token.as_str(), s)).collect();
        let mut out = Vec::new();
        let mut token = scene.first_sample_token.as_str();
        while !token.is_empty() {
            let s = by_token.get(token).ok_or_else(|| {
                Error::format(&self.root.join(&self.version).join("sample.json"), format!("unknown sample {token}"))
            })?;
            if out.len() > self.samples.len() {
                return Err(Error::format(&self.root.join(&self.version).join("sample.json"), "cycle in sample links"));
            }
            out.push(*s);
            token = s.next.as_str();
        }
        Ok(out)
    }
}

pub fn map_path(root: &Path, location: &str) -> PathBuf {
    root.join("maps").join("expansion").join(format!("{location}.json"))
}

fn read_map(path: &Path, name: &str) -> Result<MapLayers> {
    let map: MapFile = read_json(path)?;
    let nodes: HashMap<&str, Point> = map.node.iter().map(|n| (n.token.as_str(), Point::new(n.x, n.y))).collect();
    let polygons: HashMap<&str, &MapPolygon> = map.polygon.iter().map(|p| (p.token.as_str(), p)).collect();
    let resolve = |token: &str| -> Result<Polygon> {
        let poly = polygons.get(token).ok_or_else(|| Error::format(path, format!("unknown polygon {token}")))?;
        let vertices = poly
            .exterior_node_tokens
            .iter()
            .map(|t| nodes.get(t.as_str()).copied().ok_or_else(|| Error::format(path, format!("unknown node {t}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Polygon::new(vertices))
    };

    let mut layers: [Vec<Polygon>; 4] = Default::default();
    let mut missing = Vec::new();
    for kind in LayerKind::ALL {
        let tokens: Option<Vec<&str>> = match kind {
            LayerKind::DrivableArea => map
                .drivable_area
                .as_ref()
                .map(|v| v.iter().flat_map(|r| r.polygon_tokens.iter().map(String::as_str)).collect()),
            LayerKind::RoadSegment => map.road_segment.as_ref().map(|v| v.iter().map(|r| r.polygon_token.as_str()).collect()),
            LayerKind::Lane => map.lane.as_ref().map(|v| v.iter().map(|r| r.polygon_token.as_str()).collect()),
            LayerKind::Walkway => map.walkway.as_ref().map(|v| v.iter().map(|r| r.polygon_token.as_str()).collect()),
        };
        match tokens {
            Some(tokens) => {
                layers[kind.index()] = tokens.into_iter().map(resolve).collect::<Result<_>>()?;
            }
            None => {
                log::warn!("{}: layer {} missing, left empty", path.display(), kind);
                missing.push(kind);
            }
        }
    }

    let referenced = layers.iter().flatten().flat_map(|p| p.vertices.iter().copied());
    let bounds = Rect::bounding(referenced)
        .or_else(|| Rect::bounding(nodes.values().copied()))
        .ok_or_else(|| Error::format(path, "map has no nodes"))?;
    Ok(MapLayers { name: name.to_string(), layers, bounds, missing })
}

/// The four semantic layers of `map_name`, tagged with `scene_id`.
pub fn load_semantic_layers(desc: &DatasetDescriptor, map_name: &str, scene_id: &str) -> Result<SemanticScene> {
    let map = desc
        .maps
        .get(map_name)
        .ok_or_else(|| Error::format(&map_path(&desc.root, map_name), "map not referenced by any log"))?;
    let mut scene = SemanticScene::empty(scene_id, map.bounds);
    scene.layers = map.layers.clone();
    Ok(scene)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractOptions {
    /// Category name prefix kept as agents.
    pub category_prefix: String,
    /// Tracks with fewer states are dropped.
    pub min_len: usize,
    /// Consecutive keyframes further apart than this (seconds) split a track.
    pub max_gap_s: f64,
}

impl ExtractOptions {
    pub fn for_windows(t_obs: usize, t_hor: usize) -> Self {
        Self { category_prefix: "vehicle.".to_string(), min_len: t_obs + t_hor + 1, max_gap_s: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub instances: usize,
    pub excluded_category: usize,
    pub splits: usize,
    pub dropped_short: usize,
}

/// Yaw about +z from a `w, x, y, z` quaternion.
pub fn quaternion_yaw(q: [f64; 4]) -> f64 {
    let [w, x, y, z] = q;
    normalize_angle((2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z)))
}

/// Agent tracks of one scene. A track is split wherever an instance skips
/// a keyframe or two of its keyframes lie more than `max_gap_s` apart;
/// pieces after the first get `#1`, `#2`, ... appended to the instance
/// token.
pub fn extract_tracks(desc: &DatasetDescriptor, scene_name: &str, opts: &ExtractOptions) -> Result<(Vec<AgentTrack>, ExtractStats)> {
    let scene = desc.scene(scene_name)?;
    let frames = desc.keyframes(scene)?;
    let frame_index: HashMap<&str, usize> = frames.iter().enumerate().map(|(i, s)| (s.token.as_str(), i)).collect();
    let categories: HashMap<&str, &str> = desc.categories.iter().map(|c| (c.token.as_str(), c.name.as_str())).collect();
    let instance_category: HashMap<&str, &str> = desc
        .instances
        .iter()
        .map(|i| (i.token.as_str(), categories.get(i.category_token.as_str()).copied().unwrap_or("")))
        .collect();

    let mut per_instance: BTreeMap<&str, Vec<(usize, &AnnotationRecord)>> = BTreeMap::new();
    for ann in &desc.annotations {
        if let Some(&t) = frame_index.get(ann.sample_token.as_str()) {
            per_instance.entry(ann.instance_token.as_str()).or_default().push((t, ann));
        }
    }

    let mut stats = ExtractStats::default();
    let mut tracks = Vec::new();
    for (instance, mut anns) in per_instance {
        stats.instances += 1;
        let category = instance_category.get(instance).copied().unwrap_or("");
        if !category.starts_with(&opts.category_prefix) {
            stats.excluded_category += 1;
            continue;
        }
        anns.sort_by_key(|(t, _)| *t);
        anns.dedup_by_key(|(t, _)| *t);

        let mut pieces: Vec<Vec<(usize, &AnnotationRecord)>> = vec![Vec::new()];
        for (t, ann) in anns {
            let piece = pieces.last_mut().expect("non-empty");
            if let Some(&(prev_t, _)) = piece.last() {
                let dt = (frames[t].timestamp - frames[prev_t].timestamp) as f64 * 1e-6;
                if t != prev_t + 1 || dt > opts.max_gap_s {
                    pieces.push(Vec::new());
                }
            }
            pieces.last_mut().expect("non-empty").push((t, ann));
        }
        stats.splits += pieces.len() - 1;

        for (k, piece) in pieces.into_iter().enumerate() {
            if piece.len() < opts.min_len {
                stats.dropped_short += 1;
                continue;
            }
            let id = if k == 0 { instance.to_string() } else { format!("{instance}#{k}") };
            let positions: Vec<Point> = piece.iter().map(|(_, a)| Point::new(a.translation[0], a.translation[1])).collect();
            let yaw: Vec<f64> = piece.iter().map(|(_, a)| quaternion_yaw(a.rotation)).collect();
            tracks.push(AgentTrack::from_positions_and_yaw(id, piece[0].0, &positions, Some(&yaw)));
        }
    }
    Ok((tracks, stats))
}

/// Scene layers and tracks of one scene, ready for the scene file format.
pub fn ingest_scene(
    desc: &DatasetDescriptor,
    scene_name: &str,
    opts: &ExtractOptions,
) -> Result<(SemanticScene, Vec<AgentTrack>, ExtractStats)> {
    let location = desc.scene_location(scene_name)?;
    let scene = load_semantic_layers(desc, location, &desc.scene(scene_name)?.name)?;
    let (tracks, stats) = extract_tracks(desc, scene_name, opts)?;
    Ok((scene, tracks, stats))
}
