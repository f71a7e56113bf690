use std::fs;
use std::path::{Path, PathBuf};

use tsmnet::nuscenes::{extract_tracks, ingest_scene, load_semantic_layers, quaternion_yaw, DatasetDescriptor, ExtractOptions};
use tsmnet::scene_io::{read_data_dir, write_scene_pair};
use tsmnet::Error;
use tsmnet_core::dataset::{build_samples, SampleConfig};
use tsmnet_core::raster::RasterConfig;
use tsmnet_core::scene::LayerKind;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nuscenes-mini")
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dst = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dst);
        } else {
            fs::copy(entry.path(), dst).unwrap();
        }
    }
}

fn opts() -> ExtractOptions {
    ExtractOptions::for_windows(8, 8)
}

fn shoelace(v: &[tsmnet_core::Point]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].x * v[(i + 1) % n].y - v[(i + 1) % n].x * v[i].y).sum::<f64>().abs() / 2.0
}

#[test]
fn mini_map_has_one_rectangle_per_layer() {
    let desc = DatasetDescriptor::open(fixture(), "v1.0-mini").unwrap();
    let scene = load_semantic_layers(&desc, "test-town", "scene-0001").unwrap();
    // Hand-authored rectangles: 100x20, 100x10, 100x4, 100x2.
    let expected = [2000.0, 1000.0, 400.0, 200.0];
    for (kind, area) in LayerKind::ALL.into_iter().zip(expected) {
        let polys = scene.layer(kind);
        assert_eq!(polys.len(), 1, "{kind}");
        assert!((shoelace(&polys[0].vertices) - area).abs() < 1e-9, "{kind}");
    }
    assert_eq!(scene.bounds.min, tsmnet_core::Point::new(-50.0, -10.0));
    assert_eq!(scene.bounds.max, tsmnet_core::Point::new(50.0, 12.0));
}

#[test]
fn twenty_keyframes_make_one_track() {
    let desc = DatasetDescriptor::open(fixture(), "v1.0-mini").unwrap();
    let (tracks, _) = extract_tracks(&desc, "scene-0001", &ExtractOptions { min_len: 1, ..opts() }).unwrap();
    let car = tracks.iter().find(|t| t.agent_id == "inst-car").unwrap();
    assert_eq!(car.len(), 20);
    assert_eq!(car.sample_period, 0.5);
    for (i, s) in car.states.iter().enumerate() {
        assert_eq!(s.t, i);
        assert_eq!(s.pos, tsmnet_core::Point::new(-40.0 + 2.5 * i as f64, 2.0));
        assert!((s.vel.x - 5.0).abs() < 1e-12 && s.vel.y.abs() < 1e-12);
        assert_eq!(s.yaw, 0.0);
    }
}

#[test]
fn missing_keyframe_splits_the_track() {
    let desc = DatasetDescriptor::open(fixture(), "v1.0-mini").unwrap();
    let (tracks, stats) = extract_tracks(&desc, "scene-0001", &ExtractOptions { min_len: 1, ..opts() }).unwrap();
    let pieces: Vec<_> = tracks.iter().filter(|t| t.agent_id.starts_with("inst-truck")).collect();
    assert_eq!(pieces.len(), 2);
    assert_eq!((pieces[0].first_t(), pieces[0].last_t()), (Some(0), Some(9)));
    assert_eq!((pieces[1].first_t(), pieces[1].last_t()), (Some(11), Some(19)));
    assert_eq!(pieces[1].agent_id, "inst-truck#1");
    assert_eq!(stats.splits, 1);
    // Heading pi stays pi after normalization.
    assert!((pieces[0].states[0].yaw - std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn short_pieces_are_dropped_and_counted() {
    let desc = DatasetDescriptor::open(fixture(), "v1.0-mini").unwrap();
    let (tracks, stats) = extract_tracks(&desc, "scene-0001", &opts()).unwrap();
    let ids: Vec<&str> = tracks.iter().map(|t| t.agent_id.as_str()).collect();
    assert_eq!(ids, ["inst-car"]);
    assert_eq!(stats.dropped_short, 2);
}

#[test]
fn pedestrians_are_excluded() {
    let desc = DatasetDescriptor::open(fixture(), "v1.0-mini").unwrap();
    let (tracks, stats) = extract_tracks(&desc, "scene-0001", &ExtractOptions { min_len: 1, ..opts() }).unwrap();
    assert!(tracks.iter().all(|t| !t.agent_id.starts_with("inst-ped")));
    assert_eq!(stats.excluded_category, 1);
    let humans = ExtractOptions { category_prefix: "human.".into(), min_len: 1, ..opts() };
    let (tracks, _) = extract_tracks(&desc, "scene-0001", &humans).unwrap();
    assert_eq!(tracks.len(), 1);
    assert_eq!(tracks[0].agent_id, "inst-ped");
}

#[test]
fn time_gap_splits_the_track() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("v1.0-mini/sample.json");
    let mut samples: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    // Keyframes 5.. arrive one second late.
    for s in samples.as_array_mut().unwrap().iter_mut().skip(5) {
        let ts = s["timestamp"].as_i64().unwrap();
        s["timestamp"] = (ts + 1_000_000).into();
    }
    fs::write(&path, serde_json::to_string(&samples).unwrap()).unwrap();
    let desc = DatasetDescriptor::open(dir.path(), "v1.0-mini").unwrap();
    let (tracks, _) = extract_tracks(&desc, "scene-0001", &ExtractOptions { min_len: 1, ..opts() }).unwrap();
    let car: Vec<_> = tracks.iter().filter(|t| t.agent_id.starts_with("inst-car")).collect();
    assert_eq!(car.len(), 2);
    assert_eq!(car[0].len(), 5);
    assert_eq!(car[1].len(), 15);
}

#[test]
fn missing_walkway_is_an_empty_layer() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("maps/expansion/test-town.json");
    let mut map: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    map.as_object_mut().unwrap().remove("walkway");
    fs::write(&path, serde_json::to_string(&map).unwrap()).unwrap();
    let desc = DatasetDescriptor::open(dir.path(), "v1.0-mini").unwrap();
    assert_eq!(desc.maps["test-town"].missing, [LayerKind::Walkway]);
    let scene = load_semantic_layers(&desc, "test-town", "s").unwrap();
    assert!(scene.layer(LayerKind::Walkway).is_empty());
    assert_eq!(scene.layer(LayerKind::Lane).len(), 1);
}

#[test]
fn corrupt_map_is_fatal_and_named() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("maps/expansion/test-town.json");
    fs::write(&path, "{\"node\": [").unwrap();
    let err = DatasetDescriptor::open(dir.path(), "v1.0-mini").unwrap_err();
    assert!(matches!(err, Error::Json { .. }));
    assert!(err.to_string().contains("test-town.json"), "{err}");
}

#[test]
fn missing_table_is_fatal() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    fs::remove_file(dir.path().join("v1.0-mini/instance.json")).unwrap();
    let err = DatasetDescriptor::open(dir.path(), "v1.0-mini").unwrap_err();
    assert!(err.to_string().contains("instance.json"), "{err}");
}

#[test]
fn quaternion_headings() {
    let q = |yaw: f64| [(yaw / 2.0).cos(), 0.0, 0.0, (yaw / 2.0).sin()];
    for yaw in [-3.0, -1.0, 0.0, 0.5, 2.0, 3.1] {
        assert!((quaternion_yaw(q(yaw)) - yaw).abs() < 1e-12);
    }
    assert!((quaternion_yaw(q(1.5 * std::f64::consts::PI)) + 0.5 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn ingested_scene_flows_through_sample_building() {
    let desc = DatasetDescriptor::open(fixture(), "v1.0-mini").unwrap();
    let (scene, tracks, _) = ingest_scene(&desc, "scene-0001", &ExtractOptions::for_windows(4, 4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_scene_pair(dir.path(), &scene, &tracks).unwrap();
    let (scene2, tracks2) = read_data_dir(dir.path()).unwrap().pop().unwrap();
    assert_eq!(scene2, scene);
    assert_eq!(tracks2, tracks);
    let cfg = SampleConfig::new(4, 4, Some(RasterConfig::with_image_size(32)));
    let samples = build_samples(&scene, &tracks, &cfg).unwrap();
    // Rastered windows need 7 states of history and 4 of future: the car
    // (t 0..=19) yields t = 6..=15, the truck pieces (0..=9, 11..=19) none.
    assert_eq!(samples.iter().filter(|s| s.agent_id == "inst-car").count(), 10);
    assert_eq!(samples.len(), 10);
    for s in &samples {
        assert_eq!(s.rasters.len(), 4);
        assert_eq!(s.motion.rows(), 4);
    }
}
