use proptest::prelude::*;
use tsmnet::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
use tsmnet::nuscenes::{ingest_scene, DatasetDescriptor, ExtractOptions};
use tsmnet::workflow::{load_samples, samples_from_scenes, synthetic_scenes, write_data_dir};
use tsmnet_core::dataset::{build_samples, SampleConfig};
use tsmnet_core::eval::evaluate;
use tsmnet_core::nn::ModelKind;
use tsmnet_core::raster::RasterConfig;
use tsmnet_core::synth::SceneSpec;
use tsmnet_core::train::{Trainer, TrainConfig};

fn base() -> SceneSpec {
    SceneSpec { num_agents: 2, track_len: 18, ..SceneSpec::default() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    #[test]
    fn samples_survive_the_file_round_trip(seed in any::<u32>(), scenes in 1usize..4, t_obs in 2usize..5) {
        let data = synthetic_scenes(scenes, seed as u64, &base()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_data_dir(dir.path(), &data).unwrap();
        let cfg = SampleConfig::new(t_obs, 4, Some(RasterConfig::with_image_size(16)));
        let direct = samples_from_scenes(&data, &cfg).unwrap();
        prop_assert!(!direct.is_empty());
        prop_assert_eq!(load_samples(dir.path(), &cfg).unwrap(), direct);
    }

    #[test]
    fn checkpoint_round_trip_preserves_validation_ade(seed in any::<u32>(), kind_ix in 0usize..4) {
        let kind = ModelKind::ALL[kind_ix];
        let data = synthetic_scenes(2, seed as u64, &base()).unwrap();
        let raster = kind.uses_rasters().then(|| RasterConfig::with_image_size(16));
        let samples = samples_from_scenes(&data, &SampleConfig::new(3, 4, raster.clone())).unwrap();
        let cfg = TrainConfig { t_obs: 3, t_hor: 4, image_size: 16, batch_size: 8, seed: seed as u64, ..TrainConfig::default() };
        let mut trainer = Trainer::new(kind, &samples, &cfg).unwrap();
        for _ in 0..3 {
            trainer.step(&(0..8.min(samples.len())).collect::<Vec<_>>()).unwrap();
        }
        let model = trainer.into_model();
        let (before, _) = evaluate(&model, &samples, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let meta = CheckpointMeta { dataset_id: "prop".into(), train_config: Some(cfg), raster, split: None };
        save_checkpoint(&Checkpoint { model, meta }, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        let (after, _) = evaluate(&loaded.model, &samples, 4).unwrap();
        prop_assert!((before.ade_m - after.ade_m).abs() <= 1e-12);
        prop_assert!((before.fde_m - after.fde_m).abs() <= 1e-12);
    }
}

#[test]
fn every_ingested_sample_meets_feature_preconditions() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/nuscenes-mini");
    let desc = DatasetDescriptor::open(&root, "v1.0-mini").unwrap();
    for (t_obs, t_hor) in [(2, 2), (3, 4), (4, 4), (4, 8)] {
        let (scene, tracks, _) = ingest_scene(&desc, "scene-0001", &ExtractOptions { min_len: 1, ..ExtractOptions::for_windows(t_obs, t_hor) }).unwrap();
        for raster in [None, Some(RasterConfig::with_image_size(16))] {
            let with_raster = raster.is_some();
            for s in build_samples(&scene, &tracks, &SampleConfig::new(t_obs, t_hor, raster)).unwrap() {
                assert_eq!(s.motion.rows(), t_obs, "{}", s.id());
                assert_eq!(s.motion.cols(), 7, "{}", s.id());
                assert!(s.motion.0.as_slice().iter().all(|v| v.is_finite()), "{}", s.id());
                assert_eq!(s.observed.len(), t_obs);
                assert_eq!(s.future.len(), t_hor);
                assert_eq!(s.rasters.len(), if with_raster { t_obs } else { 0 });
                let track = tracks.iter().find(|t| t.agent_id == s.agent_id).unwrap();
                assert_eq!(s.observed.last(), track.state_at(s.t).map(|st| st.pos).as_ref());
            }
        }
    }
}
