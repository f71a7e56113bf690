//! Flat `key = value` training configuration.
//!
//! ```text
//! # comment
//! learning_rate = 3e-4
//! batch_size = 32
//! split = 0.6, 0.2, 0.2
//! grad_clip = 5
//! max_steps = none
//! ```
//!
//! Every [`TrainConfig`] field may appear; omitted fields keep their
//! defaults, unknown keys are rejected.

use std::path::Path;
use std::str::FromStr;

use tsmnet_core::train::TrainConfig;

use crate::error::{Error, Result};

pub const KEYS: [&str; 15] = [
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "batch_size",
    "max_epochs",
    "seed",
    "t_obs",
    "t_hor",
    "split",
    "patience",
    "grad_clip",
    "max_steps",
    "image_size",
    "decoder_dropout",
];

fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse().map_err(|e| format!("{key}: cannot parse {v:?}: {e}"))
}

fn opt<T: FromStr>(key: &str, v: &str) -> std::result::Result<Option<T>, String>
where
    T::Err: std::fmt::Display,
{
    if v.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        num(key, v).map(Some)
    }
}

/// Applies one `key = value` pair.
pub fn set_key(cfg: &mut TrainConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "learning_rate" => cfg.learning_rate = num(key, v)?,
        "beta1" => cfg.beta1 = num(key, v)?,
        "beta2" => cfg.beta2 = num(key, v)?,
        "epsilon" => cfg.epsilon = num(key, v)?,
        "batch_size" => cfg.batch_size = num(key, v)?,
        "max_epochs" => cfg.max_epochs = num(key, v)?,
        "seed" => cfg.seed = num(key, v)?,
        "t_obs" => cfg.t_obs = num(key, v)?,
        "t_hor" => cfg.t_hor = num(key, v)?,
        "patience" => cfg.patience = num(key, v)?,
        "grad_clip" => cfg.grad_clip = opt(key, v)?,
        "max_steps" => cfg.max_steps = opt(key, v)?,
        "image_size" => cfg.image_size = num(key, v)?,
        "decoder_dropout" => cfg.decoder_dropout = num(key, v)?,
        "split" => {
            let parts: Vec<f64> = v.split(',').map(|p| num(key, p.trim())).collect::<std::result::Result<_, _>>()?;
            cfg.split = parts.try_into().map_err(|p: Vec<f64>| format!("split: expected 3 fractions, got {}", p.len()))?;
        }
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

pub fn parse_config(text: &str, path: &Path) -> Result<TrainConfig> {
    let mut cfg = TrainConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::format(path, format!("line {}: expected key = value", i + 1)))?;
        set_key(&mut cfg, k.trim(), v.trim()).map_err(|m| Error::format(path, format!("line {}: {m}", i + 1)))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<TrainConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

fn show_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), T::to_string)
}

/// Serializes every field; [`parse_config`] reads it back unchanged.
pub fn format_config(cfg: &TrainConfig) -> String {
    let s = &cfg.split;
    format!(
        "learning_rate = {}\nbeta1 = {}\nbeta2 = {}\nepsilon = {}\nbatch_size = {}\nmax_epochs = {}\nseed = {}\n\
         t_obs = {}\nt_hor = {}\nsplit = {}, {}, {}\npatience = {}\ngrad_clip = {}\nmax_steps = {}\nimage_size = {}\n\
         decoder_dropout = {}\n",
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.epsilon,
        cfg.batch_size,
        cfg.max_epochs,
        cfg.seed,
        cfg.t_obs,
        cfg.t_hor,
        s[0],
        s[1],
        s[2],
        cfg.patience,
        show_opt(&cfg.grad_clip),
        show_opt(&cfg.max_steps),
        cfg.image_size,
        cfg.decoder_dropout,
    )
}
