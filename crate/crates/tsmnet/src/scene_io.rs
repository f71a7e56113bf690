//! Scene JSON and track CSV.
//!
//! Scene file:
//! `{"scene_id": .., "bounds": {"min_x", "min_y", "max_x", "max_y"},
//!   "layers": {"drivable_area": [[[x, y], ...], ...], "road_segment": .., "lane": .., "walkway": ..}}`
//!
//! Track file columns: `agent_id,t,x,y,vel_x,vel_y,acc_x,acc_y,yaw`, one row
//! per state, rows of one agent contiguous and in time order.
//!
//! A data directory holds `<scene_id>.scene.json` and
//! `<scene_id>.tracks.csv` pairs.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsmnet_core::scene::{validate_scene, validate_track, AgentTrack, KinematicState, LayerKind, SemanticScene};
use tsmnet_core::{Point, Polygon, Rect, SAMPLE_PERIOD};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundsJson {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SceneJson {
    pub scene_id: String,
    pub bounds: BoundsJson,
    pub layers: BTreeMap<String, Vec<Vec<[f64; 2]>>>,
}

impl From<&SemanticScene> for SceneJson {
    fn from(s: &SemanticScene) -> Self {
        let layers = LayerKind::ALL
            .iter()
            .map(|&k| {
                let polys = s.layer(k).iter().map(|p| p.vertices.iter().map(|v| [v.x, v.y]).collect()).collect();
                (k.name().to_string(), polys)
            })
            .collect();
        SceneJson {
            scene_id: s.scene_id.clone(),
            bounds: BoundsJson { min_x: s.bounds.min.x, min_y: s.bounds.min.y, max_x: s.bounds.max.x, max_y: s.bounds.max.y },
            layers,
        }
    }
}

impl SceneJson {
    /// Unknown layer names are ignored; missing layers stay empty.
    pub fn into_scene(self) -> SemanticScene {
        let b = self.bounds;
        let mut scene = SemanticScene::empty(self.scene_id, Rect::new(Point::new(b.min_x, b.min_y), Point::new(b.max_x, b.max_y)));
        for (name, polys) in self.layers {
            if let Some(kind) = LayerKind::from_name(&name) {
                *scene.layer_mut(kind) = polys
                    .into_iter()
                    .map(|ring| Polygon::new(ring.into_iter().map(|[x, y]| Point::new(x, y)).collect()))
                    .collect();
            }
        }
        scene
    }
}

pub fn write_scene(scene: &SemanticScene, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer(&mut w, &SceneJson::from(scene)).map_err(|e| Error::json(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates a scene file.
pub fn read_scene(path: &Path) -> Result<SemanticScene> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let json: SceneJson = serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))?;
    let scene = json.into_scene();
    if let Some(v) = validate_scene(&scene).first() {
        return Err(Error::format(path, format!("invalid scene: {v:?}")));
    }
    Ok(scene)
}

#[derive(Debug, Serialize, Deserialize)]
struct TrackRow {
    agent_id: String,
    t: usize,
    x: f64,
    y: f64,
    vel_x: f64,
    vel_y: f64,
    acc_x: f64,
    acc_y: f64,
    yaw: f64,
}

/// Floats are written in `{:e}` form, which round-trips exactly.
pub fn write_tracks(tracks: &[AgentTrack], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "agent_id,t,x,y,vel_x,vel_y,acc_x,acc_y,yaw").map_err(io)?;
    for track in tracks {
        if track.agent_id.contains([',', '"', '\n']) {
            return Err(Error::format(path, format!("agent id {:?} cannot be written unquoted", track.agent_id)));
        }
        for s in &track.states {
            writeln!(
                w,
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                track.agent_id, s.t, s.pos.x, s.pos.y, s.vel.x, s.vel.y, s.acc.x, s.acc.y, s.yaw
            )
            .map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads tracks; rows must be grouped by agent with consecutive `t`.
pub fn read_tracks(path: &Path) -> Result<Vec<AgentTrack>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut tracks: Vec<AgentTrack> = Vec::new();
    for row in rdr.deserialize::<TrackRow>() {
        let r = row.map_err(|e| Error::csv(path, e))?;
        let state = KinematicState {
            t: r.t,
            pos: Point::new(r.x, r.y),
            vel: Point::new(r.vel_x, r.vel_y),
            acc: Point::new(r.acc_x, r.acc_y),
            yaw: r.yaw,
        };
        match tracks.last_mut() {
            Some(tr) if tr.agent_id == r.agent_id => tr.states.push(state),
            _ => {
                if tracks.iter().any(|tr| tr.agent_id == r.agent_id) {
                    return Err(Error::format(path, format!("rows of agent {} are not contiguous", r.agent_id)));
                }
                tracks.push(AgentTrack { agent_id: r.agent_id, states: vec![state], sample_period: SAMPLE_PERIOD });
            }
        }
    }
    for tr in &tracks {
        if let Some(v) = validate_track(tr).first() {
            return Err(Error::format(path, format!("agent {}: {v:?}", tr.agent_id)));
        }
    }
    Ok(tracks)
}

pub fn scene_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}.scene.json"))
}

pub fn tracks_path(dir: &Path, scene_id: &str) -> PathBuf {
    dir.join(format!("{scene_id}.tracks.csv"))
}

/// Writes a scene and its tracks into a data directory.
pub fn write_scene_pair(dir: &Path, scene: &SemanticScene, tracks: &[AgentTrack]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_scene(scene, &scene_path(dir, &scene.scene_id))?;
    write_tracks(tracks, &tracks_path(dir, &scene.scene_id))
}

/// Every scene in a data directory with its tracks, sorted by scene id.
pub fn read_data_dir(dir: &Path) -> Result<Vec<(SemanticScene, Vec<AgentTrack>)>> {
    let mut ids: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter_map(|e| e.file_name().to_str().and_then(|n| n.strip_suffix(".scene.json")).map(str::to_string))
        .collect();
    ids.sort();
    ids.into_iter()
        .map(|id| {
            let scene = read_scene(&scene_path(dir, &id))?;
            let tp = tracks_path(dir, &id);
            let tracks = if tp.exists() { read_tracks(&tp)? } else { Vec::new() };
            Ok((scene, tracks))
        })
        .collect()
}
