use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tsmnet_core::dataset::SampleConfig;
use tsmnet_core::eval::{emit_tables, evaluate, render_prediction_figure, EvalReport, Predictor};
use tsmnet_core::nn::ModelKind;
use tsmnet_core::raster::{build_spatial_sequence, RasterConfig};
use tsmnet_core::synth::SceneSpec;
use tsmnet_core::train::{run_experiment_grid, train, Dataset, TrainConfig};

use tsmnet::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
use tsmnet::config::read_config;
use tsmnet::image::{chunk_file_name, write_png};
use tsmnet::manifest::write_manifest;
use tsmnet::nuscenes::{ingest_scene, DatasetDescriptor, ExtractOptions};
use tsmnet::report::{write_report, write_train_log};
use tsmnet::scene_io::{read_data_dir, write_scene_pair};
use tsmnet::workflow::{load_samples, raster_for, synthetic_scenes, write_data_dir};

#[derive(Parser)]
#[command(name = "tsmnet", version, about = "Vehicle trajectory prediction from motion and semantic map rasters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    P,
    Pd,
    Sm,
    Tsm,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::P => ModelKind::PNet,
            Model::Pd => ModelKind::PdNet,
            Model::Sm => ModelKind::SmNet,
            Model::Tsm => ModelKind::TsmNet,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    Train,
    Val,
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenes and tracks into a data directory.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 6)]
        agents: usize,
        #[arg(long, default_value_t = 40)]
        track_len: usize,
    },
    /// Export the raster chunks of one agent's observation window as PNG.
    Rasterize {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        scene: String,
        #[arg(long)]
        agent: String,
        #[arg(long)]
        t: usize,
        #[arg(long, default_value_t = 8)]
        t_obs: usize,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build sliding-window samples and write the manifest with rasters.
    Samples {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 8)]
        t_obs: usize,
        #[arg(long, default_value_t = 8)]
        t_hor: usize,
        #[arg(long, default_value_t = 256)]
        image_size: usize,
        /// Motion-only samples.
        #[arg(long)]
        no_raster: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Convert nuScenes-layout maps and annotations into a data directory.
    Ingest {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value = "v1.0-mini")]
        version: String,
        /// Scene names; all scenes when omitted.
        #[arg(long)]
        scene: Vec<String>,
        #[arg(long, default_value = "vehicle.")]
        category_prefix: String,
        #[arg(long, default_value_t = 8)]
        t_obs: usize,
        #[arg(long, default_value_t = 8)]
        t_hor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model and write its checkpoint and training log.
    Train {
        #[arg(long, value_enum)]
        model: Model,
        #[arg(long)]
        t_obs: Option<usize>,
        #[arg(long)]
        t_hor: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on one split and optionally draw figures.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the data directory the checkpoint was trained on.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        #[arg(long, value_delimiter = ',', default_value = "8")]
        t_hor: Vec<usize>,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        figures: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        max_figures: usize,
    },
    /// Train every (model, t_obs) cell and evaluate it at every horizon.
    Grid {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "p,pd,sm,tsm")]
        models: Vec<Model>,
        #[arg(long, value_delimiter = ',', default_value = "4,6,8")]
        t_obs: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "8,10,12,14,16")]
        t_hor: Vec<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate { out, scenes, seed, agents, track_len } => {
            let spec = SceneSpec { num_agents: agents, track_len, ..SceneSpec::default() };
            let data = synthetic_scenes(scenes, seed, &spec)?;
            write_data_dir(&out, &data)?;
            log::info!("wrote {} scenes to {}", data.len(), out.display());
        }
        Command::Rasterize { data, scene, agent, t, t_obs, image_size, out } => {
            let scenes = read_data_dir(&data)?;
            let (sc, tracks) = scenes
                .iter()
                .find(|(s, _)| s.scene_id == scene)
                .with_context(|| format!("scene {scene} not found in {}", data.display()))?;
            let track = tracks.iter().find(|a| a.agent_id == agent).with_context(|| format!("agent {agent} not in {scene}"))?;
            let cfg = RasterConfig::with_image_size(image_size);
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            for chunk in build_spatial_sequence(sc, track, t, t_obs, &cfg)? {
                write_png(&chunk.image, &out.join(chunk_file_name(&scene, &agent, chunk.timestep)))?;
            }
        }
        Command::Samples { data, t_obs, t_hor, image_size, no_raster, out } => {
            let raster = (!no_raster).then(|| RasterConfig::with_image_size(image_size));
            let samples = load_samples(&data, &SampleConfig::new(t_obs, t_hor, raster))?;
            let path = write_manifest(&samples, t_hor, &out)?;
            log::info!("{} samples in {}", samples.len(), path.display());
        }
        Command::Ingest { root, version, scene, category_prefix, t_obs, t_hor, out } => {
            let desc = DatasetDescriptor::open(&root, &version)?;
            let names: Vec<String> =
                if scene.is_empty() { desc.scene_names().into_iter().map(String::from).collect() } else { scene };
            let opts = ExtractOptions { category_prefix, ..ExtractOptions::for_windows(t_obs, t_hor) };
            for name in names {
                let (sc, tracks, stats) = ingest_scene(&desc, &name, &opts)?;
                log::info!(
                    "{name}: {} tracks, {} instances outside the category filter, {} splits, {} short tracks dropped",
                    tracks.len(),
                    stats.excluded_category,
                    stats.splits,
                    stats.dropped_short
                );
                write_scene_pair(&out, &sc, &tracks)?;
            }
        }
        Command::Train { model, t_obs, t_hor, config, seed, data, out } => {
            let kind = ModelKind::from(model);
            let cfg = train_config(config.as_deref(), seed, t_obs, t_hor)?;
            let raster = raster_for(kind, cfg.image_size);
            let samples = load_samples(&data, &SampleConfig::new(cfg.t_obs, cfg.t_hor, raster.clone()))?;
            let dataset = Dataset::split(data.display().to_string(), samples, cfg.seed, cfg.split)?;
            log::info!("{}: {}/{}/{} train/val/test samples", kind, dataset.train.len(), dataset.val.len(), dataset.test.len());
            let (trained, log) = train(kind, &dataset, &cfg)?;
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            let meta = CheckpointMeta {
                dataset_id: dataset.id.clone(),
                train_config: Some(cfg),
                raster,
                split: Some(dataset.split_index()),
            };
            save_checkpoint(&Checkpoint { model: trained, meta }, &out.join("model.ckpt"))?;
            write_train_log(&log, &out.join("train_log.csv"))?;
            if let Some(last) = log.epochs.last() {
                log::info!("epoch {}: train mse {:.5}, val ADE {:.3} m, FDE {:.3} m", last.epoch, last.train_mse, last.val_ade, last.val_fde);
            }
        }
        Command::Eval { checkpoint, data, split, t_hor, report, figures, max_figures } => {
            let ckpt = load_checkpoint(&checkpoint)?;
            let data = data.unwrap_or_else(|| PathBuf::from(&ckpt.meta.dataset_id));
            let index = ckpt.meta.split.clone().context("checkpoint has no split index")?;
            let scenes = read_data_dir(&data)?;
            let mut out = EvalReport::default();
            out.metadata.dataset_id = ckpt.meta.dataset_id.clone();
            out.metadata.checkpoint_id = checkpoint.display().to_string();
            out.metadata.seed = ckpt.meta.train_config.as_ref().map_or(0, |c| c.seed);
            for &h in &t_hor {
                let cfg = SampleConfig::new(ckpt.model.t_obs(), h, ckpt.meta.raster.clone());
                let samples = tsmnet::workflow::samples_from_scenes(&scenes, &cfg)?;
                let ds = Dataset::from_index(ckpt.meta.dataset_id.clone(), samples, &index);
                let (wanted, set) = match split {
                    Split::Train => (index.train.len(), ds.train),
                    Split::Val => (index.val.len(), ds.val),
                    Split::Test => (index.test.len(), ds.test),
                };
                let (row, skipped) = evaluate(&ckpt.model, &set, h)?;
                out.metadata.skipped += skipped + (wanted - set.len());
                log::info!("t_hor {h}: ADE {:.3} m, FDE {:.3} m over {} samples", row.ade_m, row.fde_m, row.n);
                out.rows.push(row);
                if let (Some(dir), true) = (&figures, h == t_hor[0]) {
                    draw_figures(dir, &ckpt, &scenes, &set, h, max_figures)?;
                }
            }
            write_report(&out, &report)?;
            if out.metadata.skipped > 0 {
                log::warn!("{} split samples lacked enough future steps and were skipped", out.metadata.skipped);
            }
        }
        Command::Grid { data, models, t_obs, t_hor, config, seed, out } => {
            let cfg = train_config(config.as_deref(), seed, None, None)?;
            let kinds: Vec<ModelKind> = models.into_iter().map(ModelKind::from).collect();
            let longest = *t_hor.iter().max().context("no horizons")?;
            let raster = kinds.iter().any(|k| k.uses_rasters()).then(|| RasterConfig::with_image_size(cfg.image_size));
            let scenes = read_data_dir(&data)?;
            let outcome = run_experiment_grid(&kinds, &t_obs, &t_hor, &cfg, |n| {
                let sc = SampleConfig::new(n, longest, raster.clone());
                let samples = tsmnet::workflow::samples_from_scenes(&scenes, &sc)
                    .map_err(|e| tsmnet_core::Error::InvalidConfig(e.to_string()))?;
                Dataset::split(format!("{}@t_obs={n}", data.display()), samples, cfg.seed, cfg.split)
            })?;
            fs::create_dir_all(&out).with_context(|| out.display().to_string())?;
            write_report(&outcome.report, &out.join("report.csv"))?;
            let tables = emit_tables(&outcome.report);
            fs::write(out.join("table1.md"), &tables.table1)?;
            fs::write(out.join("table2.md"), &tables.table2)?;
            for (kind, n, log) in &outcome.logs {
                write_train_log(log, &out.join(format!("train_log_{}_tobs{n}.csv", kind.short())))?;
            }
            for f in &outcome.failures {
                log::error!("{} t_obs={} t_hor={:?}: {}", f.model, f.t_obs, f.t_hor, f.error);
            }
            println!("{}\n{}", tables.table1, tables.table2);
        }
    }
    Ok(())
}

fn train_config(path: Option<&Path>, seed: Option<u64>, t_obs: Option<usize>, t_hor: Option<usize>) -> Result<TrainConfig> {
    let mut cfg = match path {
        Some(p) => read_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = t_obs {
        cfg.t_obs = n;
    }
    if let Some(n) = t_hor {
        cfg.t_hor = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn draw_figures(
    dir: &Path,
    ckpt: &Checkpoint,
    scenes: &[tsmnet::workflow::SceneData],
    samples: &[tsmnet_core::dataset::Sample],
    t_hor: usize,
    max: usize,
) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let picked: Vec<&tsmnet_core::dataset::Sample> = samples.iter().take(max).collect();
    if picked.is_empty() {
        bail!("no samples to draw");
    }
    let predicted = ckpt.model.predict_positions(&picked, t_hor)?;
    let cfg = RasterConfig::default();
    for (s, p) in picked.iter().zip(&predicted) {
        let (scene, _) = scenes.iter().find(|(sc, _)| sc.scene_id == s.scene_id).context("sample scene missing")?;
        let img = render_prediction_figure(scene, &s.observed, &s.future, p, &cfg)?;
        write_png(&img, &dir.join(chunk_file_name(&s.scene_id, &s.agent_id, s.t)))?;
    }
    Ok(())
}
