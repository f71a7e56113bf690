use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{train, Dataset, TrainConfig, TrainLog};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport};
use crate::nn::ModelKind;

/// A grid cell that could not be trained or evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCellFailure {
    pub model: ModelKind,
    pub t_obs: usize,
    pub t_hor: Option<usize>,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct GridOutcome {
    pub report: EvalReport,
    pub logs: Vec<(ModelKind, usize, TrainLog)>,
    pub failures: Vec<GridCellFailure>,
}

/// Trains every (kind, t_obs) pair at the training horizon
/// `config.t_hor` and evaluates each model on the test split at every
/// horizon in `t_hor_values`. `data(t_obs)` supplies the split samples,
/// which must cover the longest evaluation horizon. Failures are recorded
/// per cell and do not stop the grid.
pub fn run_experiment_grid<F>(
    kinds: &[ModelKind],
    t_obs_values: &[usize],
    t_hor_values: &[usize],
    config: &TrainConfig,
    mut data: F,
) -> Result<GridOutcome>
where
    F: FnMut(usize) -> Result<Dataset>,
{
    if kinds.is_empty() || t_obs_values.is_empty() || t_hor_values.is_empty() {
        return Err(Error::InvalidConfig("experiment grid axes must be non-empty".into()));
    }
    if let Some(&h) = t_hor_values.iter().find(|&&h| h == 0) {
        return Err(Error::InvalidHorizon(h));
    }
    config.validate()?;
    let mut out = GridOutcome::default();
    out.report.metadata.seed = config.seed;
    out.report.metadata.checkpoint_id = format!("grid-seed{}", config.seed);
    let mut dataset_ids = Vec::new();
    for &t_obs in t_obs_values {
        let dataset = match data(t_obs) {
            Ok(d) => d,
            Err(e) => {
                for &model in kinds {
                    out.failures.push(GridCellFailure { model, t_obs, t_hor: None, error: e.to_string() });
                }
                continue;
            }
        };
        if !dataset_ids.contains(&dataset.id) {
            dataset_ids.push(dataset.id.clone());
        }
        let cfg = TrainConfig { t_obs, ..config.clone() };
        for &model in kinds {
            let trained = match train(model, &dataset, &cfg) {
                Ok(t) => t,
                Err(e) => {
                    out.failures.push(GridCellFailure { model, t_obs, t_hor: None, error: e.to_string() });
                    continue;
                }
            };
            for &t_hor in t_hor_values {
                match evaluate(&trained.0, &dataset.test, t_hor) {
                    Ok((row, skipped)) => {
                        out.report.metadata.skipped += skipped;
                        out.report.rows.push(row);
                    }
                    Err(e) => out.failures.push(GridCellFailure { model, t_obs, t_hor: Some(t_hor), error: e.to_string() }),
                }
            }
            out.logs.push((model, t_obs, trained.1));
        }
    }
    out.report.metadata.dataset_id = dataset_ids.join("+");
    Ok(out)
}
