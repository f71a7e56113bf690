//! Binary model checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! b"TSMN" | u32 version | u64 header length | header (UTF-8 JSON) | f64 data
//! ```
//!
//! The JSON header carries the architecture, `t_obs`, input normalization,
//! seeds, optional training metadata and the ordered list of named tensors
//! with their lengths. The data section is the concatenation of those
//! tensors in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use tsmnet_core::features::NormStats;
use tsmnet_core::nn::{ArchConfig, Model, ModelParams, Parameters, EVAL_STATE_SEED};
use tsmnet_core::raster::RasterConfig;
use tsmnet_core::train::{SplitIndex, TrainConfig};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TSMN";
pub const VERSION: u32 = 1;

/// Everything stored alongside the weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub dataset_id: String,
    pub train_config: Option<TrainConfig>,
    /// Raster settings the samples were built with.
    pub raster: Option<RasterConfig>,
    pub split: Option<SplitIndex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub meta: CheckpointMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct Seeds {
    init: Option<u64>,
    eval_state: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    arch: ArchConfig,
    t_obs: usize,
    norm: NormStats,
    seeds: Seeds,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint<W: Write>(ckpt: &Checkpoint, mut w: W) -> std::io::Result<()> {
    let model = &ckpt.model;
    let header = Header {
        version: VERSION,
        arch: model.arch.clone(),
        t_obs: model.t_obs,
        norm: model.norm.clone(),
        seeds: Seeds { init: ckpt.meta.train_config.as_ref().map(|c| c.seed), eval_state: EVAL_STATE_SEED },
        meta: ckpt.meta.clone(),
        tensors: model.params.tensors().iter().map(|(n, t)| TensorEntry { name: n.clone(), len: t.len() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for (_, t) in model.params.tensors() {
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_checkpoint(ckpt, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<R: Read>(mut r: R, path: &Path) -> Result<Checkpoint> {
    let bad = |msg: String| Error::format(path, msg);
    let io = |e| Error::io(path, e);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(bad("not a checkpoint (bad magic)".into()));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b).map_err(io)?;
    let version = u32::from_le_bytes(u32b);
    if version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b).map_err(io)?;
    let len = u64::from_le_bytes(u64b) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| Error::json(path, e))?;

    let mut params = ModelParams::zeros(&header.arch);
    {
        let mut slots = params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(bad(format!("expected {} tensors, header lists {}", slots.len(), header.tensors.len())));
        }
        for ((name, slot), entry) in slots.iter_mut().zip(&header.tensors) {
            if *name != entry.name || slot.len() != entry.len {
                return Err(bad(format!("tensor {} ({}) does not match {name} ({})", entry.name, entry.len, slot.len())));
            }
            let mut bytes = vec![0u8; entry.len * 8];
            r.read_exact(&mut bytes).map_err(io)?;
            for (v, b) in slot.iter_mut().zip(bytes.chunks_exact(8)) {
                *v = f64::from_le_bytes(b.try_into().expect("8-byte chunk"));
            }
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(io)? != 0 {
        return Err(bad("trailing bytes after tensor data".into()));
    }
    let model = Model::new(header.arch, params, header.norm, header.t_obs)?;
    Ok(Checkpoint { model, meta: header.meta })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(file), path)
}
