//! Steps shared by the command line and the acceptance tests: synthetic
//! data directories and sample building over them.

use std::path::Path;

use tsmnet_core::dataset::{build_samples, Sample, SampleConfig};
use tsmnet_core::nn::ModelKind;
use tsmnet_core::raster::RasterConfig;
use tsmnet_core::scene::{AgentTrack, SemanticScene};
use tsmnet_core::synth::{generate_synthetic_scene, RoadTemplate, SceneSpec};

use crate::error::Result;
use crate::scene_io::{read_data_dir, write_scene_pair};

pub type SceneData = (SemanticScene, Vec<AgentTrack>);

/// `count` scenes cycling through the road templates; scene `i` uses seed
/// `seed + i` and id `synth-<i>`.
pub fn synthetic_scenes(count: usize, seed: u64, base: &SceneSpec) -> Result<Vec<SceneData>> {
    (0..count)
        .map(|i| {
            let spec = SceneSpec {
                template: RoadTemplate::ALL[i % RoadTemplate::ALL.len()],
                scene_id: Some(format!("synth-{i:04}")),
                ..base.clone()
            };
            Ok(generate_synthetic_scene(seed + i as u64, &spec)?)
        })
        .collect()
}

pub fn write_data_dir(dir: &Path, scenes: &[SceneData]) -> Result<()> {
    for (scene, tracks) in scenes {
        write_scene_pair(dir, scene, tracks)?;
    }
    Ok(())
}

/// Raster settings a model kind needs, if any.
pub fn raster_for(kind: ModelKind, image_size: usize) -> Option<RasterConfig> {
    kind.uses_rasters().then(|| RasterConfig::with_image_size(image_size))
}

pub fn samples_from_scenes(scenes: &[SceneData], config: &SampleConfig) -> Result<Vec<Sample>> {
    let mut out = Vec::new();
    for (scene, tracks) in scenes {
        out.extend(build_samples(scene, tracks, config)?);
    }
    Ok(out)
}

pub fn load_samples(dir: &Path, config: &SampleConfig) -> Result<Vec<Sample>> {
    samples_from_scenes(&read_data_dir(dir)?, config)
}
