//! Sample manifest: one CSV record per (scene, agent, t) with the raster
//! file names, the raw motion matrix and the delta targets.
//!
//! Columns: `sample_id,scene_id,agent_id,t,t_obs,t_hor,rasters,x_obs,y`.
//! `rasters` is a `;`-separated list of PNG paths relative to the manifest,
//! oldest first. `x_obs` (`t_obs x 7`) and `y` (`t_hor x 2`) are row-major
//! `;`-separated floats.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tsmnet_core::dataset::Sample;
use tsmnet_core::tensor::Matrix;

use crate::error::{Error, Result};
use crate::image::{chunk_file_name, write_png};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: String,
    pub scene_id: String,
    pub agent_id: String,
    pub t: usize,
    pub t_obs: usize,
    pub t_hor: usize,
    pub rasters: String,
    pub x_obs: String,
    pub y: String,
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(";")
}

fn split(path: &Path, s: &str, rows: usize, cols: usize) -> Result<Matrix> {
    let values: Vec<f64> = if s.is_empty() {
        Vec::new()
    } else {
        s.split(';')
            .map(|v| v.parse::<f64>().map_err(|e| Error::format(path, format!("bad number {v:?}: {e}"))))
            .collect::<Result<_>>()?
    };
    if values.len() != rows * cols {
        return Err(Error::format(path, format!("expected {rows}x{cols} values, found {}", values.len())));
    }
    Ok(Matrix::from_vec(rows, cols, values))
}

impl ManifestRecord {
    pub fn raster_paths(&self) -> Vec<&str> {
        self.rasters.split(';').filter(|s| !s.is_empty()).collect()
    }

    pub fn x_obs_matrix(&self, path: &Path) -> Result<Matrix> {
        split(path, &self.x_obs, self.t_obs, 7)
    }

    pub fn y_matrix(&self, path: &Path) -> Result<Matrix> {
        split(path, &self.y, self.t_hor, 2)
    }
}

/// Writes every sample's rasters into `out/rasters/` and the manifest to
/// `out/manifest.csv`. A chunk shared by overlapping windows is written
/// once. Returns the manifest path.
pub fn write_manifest(samples: &[Sample], t_hor: usize, out: &Path) -> Result<PathBuf> {
    let raster_dir = out.join("rasters");
    fs::create_dir_all(&raster_dir).map_err(|e| Error::io(&raster_dir, e))?;
    let path = out.join("manifest.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    for s in samples {
        let mut names = Vec::with_capacity(s.rasters.len());
        for chunk in &s.rasters {
            let name = chunk_file_name(&s.scene_id, &s.agent_id, chunk.timestep);
            let p = raster_dir.join(&name);
            if !p.exists() {
                write_png(&chunk.image, &p)?;
            }
            names.push(format!("rasters/{name}"));
        }
        let y = s.delta_targets(t_hor)?;
        let rec = ManifestRecord {
            sample_id: s.id(),
            scene_id: s.scene_id.clone(),
            agent_id: s.agent_id.clone(),
            t: s.t,
            t_obs: s.t_obs(),
            t_hor,
            rasters: names.join(";"),
            x_obs: join(s.motion.0.as_slice()),
            y: join(y.0.as_slice()),
        };
        w.serialize(rec).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let records: Vec<ManifestRecord> = r.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| Error::csv(path, e))?;
    for rec in &records {
        rec.x_obs_matrix(path)?;
        rec.y_matrix(path)?;
    }
    Ok(records)
}
