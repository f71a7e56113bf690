//! Displacement metrics, the horizon-sweep harness, report tables and
//! prediction figures.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use crate::dataset::Sample;
use crate::error::{shape_err, Error, Result};
use crate::geometry::Point;
use crate::nn::{Model, ModelKind};
use crate::raster::{paint_layers, PixelFrame, RasterConfig, Rgb, RgbImage};
use crate::scene::SemanticScene;

fn check_shapes(predicted: &[Vec<Point>], actual: &[Vec<Point>]) -> Result<()> {
    if predicted.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    if predicted.len() != actual.len() {
        return Err(shape_err("metric", format!("{} trajectories", actual.len()), predicted.len()));
    }
    let len = actual[0].len();
    if len == 0 {
        return Err(Error::EmptyMetricInput);
    }
    for (p, a) in predicted.iter().zip(actual) {
        if p.len() != len || a.len() != len {
            return Err(shape_err("metric", format!("{len} points per trajectory"), format!("{}/{}", p.len(), a.len())));
        }
    }
    Ok(())
}

/// Sum of per-point distances and of final-point distances.
fn displacement_sums(predicted: &[Vec<Point>], actual: &[Vec<Point>]) -> (f64, f64) {
    let mut all = 0.0;
    let mut last = 0.0;
    for (p, a) in predicted.iter().zip(actual) {
        all += p.iter().zip(a).map(|(p, a)| p.distance(*a)).sum::<f64>();
        last += p[p.len() - 1].distance(a[a.len() - 1]);
    }
    (all, last)
}

/// Average displacement error: mean Euclidean distance over every sample
/// and every predicted step.
pub fn ade(predicted: &[Vec<Point>], actual: &[Vec<Point>]) -> Result<f64> {
    check_shapes(predicted, actual)?;
    let (all, _) = displacement_sums(predicted, actual);
    Ok(all / (predicted.len() * predicted[0].len()) as f64)
}

/// Final displacement error: mean Euclidean distance at the last step.
pub fn fde(predicted: &[Vec<Point>], actual: &[Vec<Point>]) -> Result<f64> {
    check_shapes(predicted, actual)?;
    let (_, last) = displacement_sums(predicted, actual);
    Ok(last / predicted.len() as f64)
}

/// Anything that turns samples into absolute future positions.
pub trait Predictor {
    fn kind(&self) -> ModelKind;
    fn t_obs(&self) -> usize;
    fn predict_positions(&self, samples: &[&Sample], t_hor: usize) -> Result<Vec<Vec<Point>>>;
}

impl Predictor for Model {
    fn kind(&self) -> ModelKind {
        self.arch.kind
    }

    fn t_obs(&self) -> usize {
        self.t_obs
    }

    fn predict_positions(&self, samples: &[&Sample], t_hor: usize) -> Result<Vec<Vec<Point>>> {
        Model::predict_positions(self, samples, t_hor)
    }
}

/// One (model, t_obs, t_hor) cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalRow {
    pub model: ModelKind,
    pub t_obs: usize,
    pub t_hor: usize,
    pub ade_m: f64,
    pub fde_m: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportMetadata {
    pub dataset_id: String,
    pub seed: u64,
    pub checkpoint_id: String,
    /// Samples skipped because they lacked enough future steps.
    pub skipped: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub metadata: ReportMetadata,
}

impl EvalReport {
    pub fn find(&self, model: ModelKind, t_obs: usize, t_hor: usize) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.model == model && r.t_obs == t_obs && r.t_hor == t_hor)
    }
}

/// Samples are predicted in chunks of this many to bound memory.
const EVAL_CHUNK: usize = 64;

/// Predicts every sample that covers `t_hor` future steps and scores the
/// reconstructed positions. Returns the row and the number of skipped
/// samples.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, samples: &[Sample], t_hor: usize) -> Result<(EvalRow, usize)> {
    if t_hor < 1 {
        return Err(Error::InvalidHorizon(t_hor));
    }
    let usable: Vec<&Sample> = samples.iter().filter(|s| s.future.len() >= t_hor).collect();
    let skipped = samples.len() - usable.len();
    if usable.is_empty() {
        return Err(Error::EmptyMetricInput);
    }
    let mut all = 0.0;
    let mut last = 0.0;
    for chunk in usable.chunks(EVAL_CHUNK) {
        let predicted = model.predict_positions(chunk, t_hor)?;
        let actual: Vec<Vec<Point>> = chunk.iter().map(|s| s.future[..t_hor].to_vec()).collect();
        check_shapes(&predicted, &actual)?;
        let (a, l) = displacement_sums(&predicted, &actual);
        all += a;
        last += l;
    }
    let n = usable.len();
    let row = EvalRow {
        model: model.kind(),
        t_obs: model.t_obs(),
        t_hor,
        ade_m: all / (n * t_hor) as f64,
        fde_m: last / n as f64,
        n,
    };
    Ok((row, skipped))
}

/// Evaluates one model at several horizons.
pub fn horizon_sweep<P: Predictor + ?Sized>(model: &P, samples: &[Sample], horizons: &[usize]) -> Result<EvalReport> {
    let mut report = EvalReport::default();
    for &t_hor in horizons {
        let (row, skipped) = evaluate(model, samples, t_hor)?;
        report.metadata.skipped = report.metadata.skipped.max(skipped);
        report.rows.push(row);
    }
    Ok(report)
}

/// Text renderings of a report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tables {
    /// One row per model at a single (t_obs, t_hor) setting.
    pub table1: String,
    /// `t_obs x t_hor` grid of `ADE/FDE` cells for one model.
    pub table2: String,
}

pub const MISSING_CELL: &str = "—";

/// Model comparison table. Uses each model's row at (`t_obs`, `t_hor`).
pub fn emit_table1(report: &EvalReport, t_obs: usize, t_hor: usize) -> String {
    let mut out = String::from("| Model | Average Disp. Error | Final Disp. Error |\n|---|---|---|\n");
    let kinds: BTreeSet<ModelKind> = report.rows.iter().map(|r| r.model).collect();
    for kind in kinds {
        let (a, f) = match report.find(kind, t_obs, t_hor) {
            Some(r) => (format!("{:.2}", r.ade_m), format!("{:.2}", r.fde_m)),
            None => (MISSING_CELL.to_string(), MISSING_CELL.to_string()),
        };
        let _ = writeln!(out, "| {} | {a} | {f} |", kind.name());
    }
    out
}

/// Observed-length by horizon grid for `kind`, every `t_obs` and `t_hor`
/// that appears anywhere in the report.
pub fn emit_table2(report: &EvalReport, kind: ModelKind) -> String {
    let t_obs: BTreeSet<usize> = report.rows.iter().map(|r| r.t_obs).collect();
    let t_hor: BTreeSet<usize> = report.rows.iter().map(|r| r.t_hor).collect();
    let mut out = String::from("| Observed Data |");
    for h in &t_hor {
        let _ = write!(out, " t_hor = {h} |");
    }
    out.push_str("\n|---|");
    for _ in &t_hor {
        out.push_str("---|");
    }
    out.push('\n');
    for o in &t_obs {
        let _ = write!(out, "| t_obs = {o} |");
        for h in &t_hor {
            match report.find(kind, *o, *h) {
                Some(r) => {
                    let _ = write!(out, " {:.2}/{:.2} |", r.ade_m, r.fde_m);
                }
                None => {
                    let _ = write!(out, " {MISSING_CELL} |");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Table 1 at the longest observed length and shortest horizon present
/// (the training setting in a standard grid); Table 2 for TSM-Net, or the
/// first model in the report when TSM-Net is absent.
pub fn emit_tables(report: &EvalReport) -> Tables {
    let t_obs = report.rows.iter().map(|r| r.t_obs).max().unwrap_or(0);
    let t_hor = report.rows.iter().map(|r| r.t_hor).min().unwrap_or(0);
    let kind = if report.rows.iter().any(|r| r.model == ModelKind::TsmNet) {
        ModelKind::TsmNet
    } else {
        report.rows.first().map_or(ModelKind::TsmNet, |r| r.model)
    };
    Tables { table1: emit_table1(report, t_obs, t_hor), table2: emit_table2(report, kind) }
}

pub const OBSERVED_COLOR: Rgb = [255, 140, 0];
pub const TRUTH_COLOR: Rgb = [255, 225, 0];
pub const PREDICTION_COLOR: Rgb = [0, 220, 255];

/// Semantic map centred on the last observed position with the observed
/// path (orange), the ground truth (yellow) and the prediction (cyan,
/// drawn last). Ground truth is cut to the prediction length.
pub fn render_prediction_figure(
    scene: &SemanticScene,
    observed: &[Point],
    truth: &[Point],
    predicted: &[Point],
    config: &RasterConfig,
) -> Result<RgbImage> {
    config.validate()?;
    let center = *observed.last().ok_or(Error::EmptySequence)?;
    let frame = PixelFrame::new(center, config);
    let mut img = paint_layers(scene, &frame, config);
    let width = (config.history_radius_px * 0.75).max(1.0);
    let to_px = |pts: &[Point]| -> Vec<(f64, f64)> { pts.iter().map(|p| frame.to_pixel(*p)).collect() };
    img.draw_polyline(&to_px(observed), width, OBSERVED_COLOR);
    if !predicted.is_empty() {
        let mut t = Vec::with_capacity(predicted.len() + 1);
        t.push(center);
        t.extend(truth.iter().take(predicted.len()));
        img.draw_polyline(&to_px(&t), width, TRUTH_COLOR);
        let mut p = Vec::with_capacity(predicted.len() + 1);
        p.push(center);
        p.extend_from_slice(predicted);
        img.draw_polyline(&to_px(&p), width, PREDICTION_COLOR);
    }
    Ok(img)
}
