//! Batched forward and backward passes for all four variants, plus the
//! single-sample entry points.

use alloc::vec::Vec;

use super::arch::{ArchConfig, ModelKind, INPUT_CHANNELS};
use super::layers::{conv_backward, conv_forward, dense_backward, dense_forward, relu_backward, relu_inplace};
use super::lstm::{
    accumulate_weight_grads, apply_dropout, sample_initial_state, step_backward, step_batch, LstmState, StepCache,
};
use super::params::{init_params, LstmWeights, ModelParams, Parameters};
use crate::dataset::Sample;
use crate::error::{shape_err, Error, Result};
use crate::features::{reconstruct_positions, DeltaTargets, MotionFeatures, NormStats};
use crate::geometry::Point;
use crate::math::{self, Rng};
use crate::raster::RasterChunk;
use crate::tensor::Matrix;

/// Seed of the frozen initial LSTM state used in evaluation mode.
pub const EVAL_STATE_SEED: u64 = 0;

/// Forward-pass mode. Training draws fresh N(0, 1) initial states per
/// sample and applies decoder dropout; evaluation is a pure function.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// The initial state used in evaluation mode.
pub fn eval_initial_state(hidden: usize) -> LstmState {
    sample_initial_state(&mut math::seeded(EVAL_STATE_SEED), hidden)
}

/// Converts an RGB chunk to a CHW tensor scaled to `[0, 1]`.
pub fn image_tensor(chunk: &RasterChunk, image_size: usize) -> Result<Vec<f64>> {
    let img = &chunk.image;
    if img.width != image_size || img.height != image_size {
        return Err(shape_err(
            "spatial",
            alloc::format!("{image_size}x{image_size}x3 raster"),
            alloc::format!("{}x{}x3", img.width, img.height),
        ));
    }
    let plane = image_size * image_size;
    let mut out = alloc::vec![0.0; INPUT_CHANNELS * plane];
    for (i, px) in img.data.chunks_exact(3).enumerate() {
        for c in 0..INPUT_CHANNELS {
            out[c * plane + i] = f64::from(px[c]) / 255.0;
        }
    }
    Ok(out)
}

/// Network input for `size` sequences of equal length.
#[derive(Debug, Clone)]
pub struct Batch {
    size: usize,
    t_obs: usize,
    /// `t_obs x size x motion_dim`, step-major.
    motion: Vec<f64>,
    /// CHW images indexed `step * size + row`; one step for SM-Net.
    images: Vec<Vec<f64>>,
}

impl Batch {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn t_obs(&self) -> usize {
        self.t_obs
    }

    /// Assembles a batch from already normalized motion matrices (with
    /// the model's column set) and the raster chunks each model consumes.
    pub fn new(arch: &ArchConfig, motion: &[&MotionFeatures], rasters: &[&[RasterChunk]]) -> Result<Self> {
        let size = motion.len();
        if size == 0 {
            return Err(Error::EmptySequence);
        }
        let t_obs = motion[0].rows();
        if t_obs == 0 {
            return Err(Error::EmptySequence);
        }
        let md = arch.motion_dim;
        let mut flat = alloc::vec![0.0; t_obs * size * md];
        for (b, m) in motion.iter().enumerate() {
            if m.cols() != md || m.rows() != t_obs {
                return Err(shape_err("obs", alloc::format!("{t_obs}x{md} motion"), alloc::format!("{}x{}", m.rows(), m.cols())));
            }
            for j in 0..t_obs {
                flat[(j * size + b) * md..][..md].copy_from_slice(m.0.row(j));
            }
        }
        let want = arch.kind.raster_count(t_obs);
        let mut images = Vec::new();
        if want == 0 {
            if rasters.iter().any(|r| !r.is_empty()) {
                return Err(Error::UnexpectedRaster { kind: arch.kind.name() });
            }
        } else {
            let cnn = arch.cnn.as_ref().ok_or_else(|| Error::DimensionChain("raster model without CNN".into()))?;
            if rasters.len() != size {
                return Err(shape_err("spatial", alloc::format!("{size} raster sequences"), rasters.len()));
            }
            images = alloc::vec![Vec::new(); want * size];
            for (b, seq) in rasters.iter().enumerate() {
                if seq.len() != want {
                    return Err(shape_err("spatial", alloc::format!("{want} rasters"), seq.len()));
                }
                for (s, chunk) in seq.iter().enumerate() {
                    images[s * size + b] = image_tensor(chunk, cnn.image_size)?;
                }
            }
        }
        Ok(Self { size, t_obs, motion: flat, images })
    }
}

/// Intermediate values of one batched forward pass.
pub(crate) struct Trace {
    batch: Batch,
    conv: Vec<Vec<Vec<f64>>>,
    obs_out: Vec<f64>,
    enc: Vec<StepCache>,
    dec: Vec<StepCache>,
    masks: Vec<Vec<f64>>,
    head_in: Vec<f64>,
    head_hidden: Vec<f64>,
    /// Raw head output, `t_hor x size x 2`, step-major.
    pub out: Vec<f64>,
}

impl Trace {
    pub fn t_hor(&self) -> usize {
        self.dec.len()
    }

    /// Head output of row `b` as a `t_hor x 2` matrix.
    pub fn row_output(&self, b: usize) -> Matrix {
        let n = self.batch.size;
        let mut m = Matrix::zeros(self.t_hor(), 2);
        for k in 0..self.t_hor() {
            m.row_mut(k).copy_from_slice(&self.out[(k * n + b) * 2..][..2]);
        }
        m
    }
}

fn check_params(arch: &ArchConfig, params: &ModelParams) -> Result<()> {
    let want = ModelParams::zeros(arch);
    for ((name, a), (_, b)) in want.tensors().iter().zip(params.tensors().iter()) {
        if a.len() != b.len() {
            return Err(shape_err("params", alloc::format!("{name} with {} values", a.len()), b.len()));
        }
    }
    if want.spatial.len() != params.spatial.len() {
        return Err(shape_err("spatial", alloc::format!("{} conv layers", want.spatial.len()), params.spatial.len()));
    }
    Ok(())
}

fn cnn_features(params: &ModelParams, image: &[f64], image_size: usize) -> Vec<Vec<f64>> {
    let mut acts: Vec<Vec<f64>> = Vec::with_capacity(params.spatial.len());
    let mut size = image_size;
    for layer in &params.spatial {
        let input = acts.last().map_or(image, |a| a.as_slice());
        let (out, os) = conv_forward(layer, input, size);
        acts.push(out);
        size = os;
    }
    acts
}

pub(crate) fn forward_batch(arch: &ArchConfig, params: &ModelParams, batch: Batch, t_hor: usize, mode: Mode<'_>) -> Result<Trace> {
    if t_hor < 1 {
        return Err(Error::InvalidHorizon(t_hor));
    }
    let n = batch.size;
    let t_obs = batch.t_obs;
    let md = arch.motion_dim;
    let hs = arch.latent_dim;
    let cd = hs - md;

    let conv: Vec<Vec<Vec<f64>>> = match &arch.cnn {
        Some(cnn) => batch.images.iter().map(|img| cnn_features(params, img, cnn.image_size)).collect(),
        None => Vec::new(),
    };

    let mut obs_out = dense_forward(&params.obs, &batch.motion, t_obs * n);
    relu_inplace(&mut obs_out);

    let latent = |j: usize| -> Vec<f64> {
        let mut z = alloc::vec![0.0; n * hs];
        for b in 0..n {
            let row = &mut z[b * hs..(b + 1) * hs];
            if cd > 0 {
                let img = match arch.kind {
                    ModelKind::TsmNet => j * n + b,
                    _ => b,
                };
                row[..cd].copy_from_slice(conv[img].last().expect("CNN has layers"));
            }
            row[cd..].copy_from_slice(&obs_out[(j * n + b) * md..][..md]);
        }
        z
    };

    let (mut rng, eval_state) = match mode {
        Mode::Eval => (None, Some(eval_initial_state(hs))),
        Mode::Train(r) => (Some(r), None),
    };
    let mut h = alloc::vec![0.0; n * hs];
    let mut c = alloc::vec![0.0; n * hs];
    for b in 0..n {
        let s = match (&mut rng, &eval_state) {
            (Some(r), _) => sample_initial_state(r, hs),
            (None, Some(s)) => s.clone(),
            (None, None) => unreachable!(),
        };
        h[b * hs..(b + 1) * hs].copy_from_slice(&s.h);
        c[b * hs..(b + 1) * hs].copy_from_slice(&s.c);
    }

    let w = &params.enc_dec;
    let mut enc = Vec::with_capacity(t_obs);
    for j in 0..t_obs {
        let cache = step_batch(w, latent(j), h, c, n);
        h = cache.h.clone();
        c = cache.c.clone();
        enc.push(cache);
    }

    let mut dec = Vec::with_capacity(t_hor);
    let mut masks = Vec::new();
    let mut head_in = Vec::with_capacity(t_hor * n * hs);
    let mut x = h.clone();
    for _ in 0..t_hor {
        let cache = step_batch(w, x, h, c, n);
        let mut out_h = cache.h.clone();
        if let Some(r) = rng.as_mut() {
            if arch.decoder_dropout > 0.0 {
                masks.push(apply_dropout(r, arch.decoder_dropout, &mut out_h));
            }
        }
        head_in.extend_from_slice(&out_h);
        x = cache.h.clone();
        h = cache.h.clone();
        c = cache.c.clone();
        dec.push(cache);
    }

    let rows = t_hor * n;
    let mut head_hidden = dense_forward(&params.out_hidden, &head_in, rows);
    relu_inplace(&mut head_hidden);
    let out = dense_forward(&params.out, &head_hidden, rows);

    Ok(Trace { batch, conv, obs_out, enc, dec, masks, head_in, head_hidden, out })
}

/// Gradient of a loss w.r.t. every parameter given `d_out`, the gradient
/// w.r.t. the raw head output (same layout as [`Trace::out`]).
pub(crate) fn backward_batch(arch: &ArchConfig, params: &ModelParams, trace: &Trace, d_out: &[f64]) -> ModelParams {
    let n = trace.batch.size;
    let t_obs = trace.batch.t_obs;
    let t_hor = trace.t_hor();
    let md = arch.motion_dim;
    let hs = arch.latent_dim;
    let cd = hs - md;
    let rows = t_hor * n;
    let mut grad = params.zeros_like();

    let mut d_hidden = dense_backward(&params.out, &trace.head_hidden, rows, d_out, &mut grad.out, true).expect("requested");
    relu_backward(&trace.head_hidden, &mut d_hidden);
    let mut d_head_in =
        dense_backward(&params.out_hidden, &trace.head_in, rows, &d_hidden, &mut grad.out_hidden, true).expect("requested");
    for (k, mask) in trace.masks.iter().enumerate() {
        for (d, m) in d_head_in[k * n * hs..(k + 1) * n * hs].iter_mut().zip(mask) {
            *d *= m;
        }
    }

    let w = &params.enc_dec;
    let steps = t_obs + t_hor;
    let mut xs = Vec::with_capacity(steps * n * hs);
    let mut hps = Vec::with_capacity(steps * n * hs);
    let mut dps = Vec::with_capacity(steps * n * 4 * hs);
    let mut dh_carry = alloc::vec![0.0; n * hs];
    let mut dc_carry = alloc::vec![0.0; n * hs];
    for k in (0..t_hor).rev() {
        let mut dh = d_head_in[k * n * hs..(k + 1) * n * hs].to_vec();
        for (a, b) in dh.iter_mut().zip(&dh_carry) {
            *a += b;
        }
        let cache = &trace.dec[k];
        let g = step_backward(w, cache, &dh, &dc_carry, n, &mut grad.enc_dec, true);
        dh_carry = g.dx;
        for (a, b) in dh_carry.iter_mut().zip(&g.dh_prev) {
            *a += b;
        }
        dc_carry = g.dc_prev;
        xs.extend_from_slice(&cache.x);
        hps.extend_from_slice(&cache.h_prev);
        dps.extend_from_slice(&g.d_pre);
    }
    let mut dz = alloc::vec![Vec::new(); t_obs];
    for j in (0..t_obs).rev() {
        let cache = &trace.enc[j];
        let g = step_backward(w, cache, &dh_carry, &dc_carry, n, &mut grad.enc_dec, true);
        dh_carry = g.dh_prev;
        dc_carry = g.dc_prev;
        xs.extend_from_slice(&cache.x);
        hps.extend_from_slice(&cache.h_prev);
        dps.extend_from_slice(&g.d_pre);
        dz[j] = g.dx;
    }
    accumulate_weight_grads(&mut grad.enc_dec, &xs, &hps, &dps, steps * n);

    let mut d_obs = alloc::vec![0.0; t_obs * n * md];
    for (j, dzj) in dz.iter().enumerate() {
        for b in 0..n {
            d_obs[(j * n + b) * md..][..md].copy_from_slice(&dzj[b * hs + cd..(b + 1) * hs]);
        }
    }
    relu_backward(&trace.obs_out, &mut d_obs);
    dense_backward(&params.obs, &trace.batch.motion, t_obs * n, &d_obs, &mut grad.obs, false);

    if let Some(cnn) = &arch.cnn {
        let sizes = cnn.spatial_sizes();
        for (img, acts) in trace.conv.iter().enumerate() {
            let mut d = alloc::vec![0.0; cd];
            match arch.kind {
                ModelKind::TsmNet => {
                    let (j, b) = (img / n, img % n);
                    d.copy_from_slice(&dz[j][b * hs..b * hs + cd]);
                }
                _ => {
                    for dzj in &dz {
                        for (a, v) in d.iter_mut().zip(&dzj[img * hs..img * hs + cd]) {
                            *a += v;
                        }
                    }
                }
            }
            for l in (0..params.spatial.len()).rev() {
                let (input, size) = if l == 0 {
                    (trace.batch.images[img].as_slice(), cnn.image_size)
                } else {
                    (acts[l - 1].as_slice(), sizes[l - 1])
                };
                let next = conv_backward(&params.spatial[l], input, size, &acts[l], &mut d, &mut grad.spatial[l], l > 0);
                match next {
                    Some(v) => d = v,
                    None => break,
                }
            }
        }
    }
    grad
}

/// Affine map applied to the head output: identity for the delta models,
/// the training position statistics for P-Net, whose head regresses
/// standardized absolute coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutputScale {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

impl OutputScale {
    pub const IDENTITY: OutputScale = OutputScale { mean: [0.0; 2], std: [1.0; 2] };

    pub fn apply(&self, raw: &[f64]) -> [f64; 2] {
        [self.mean[0] + self.std[0] * raw[0], self.mean[1] + self.std[1] * raw[1]]
    }
}

/// A model ready for training or inference: architecture, weights and the
/// 7-column input normalization fitted on its training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: ArchConfig,
    pub params: ModelParams,
    pub norm: NormStats,
    pub t_obs: usize,
}

impl Model {
    pub fn new(arch: ArchConfig, params: ModelParams, norm: NormStats, t_obs: usize) -> Result<Self> {
        arch.validate()?;
        check_params(&arch, &params)?;
        if norm.cols() != 7 {
            return Err(shape_err("norm", "7 columns", norm.cols()));
        }
        if t_obs == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(Self { arch, params, norm, t_obs })
    }

    /// Freshly initialized weights for `arch`.
    pub fn init(arch: ArchConfig, seed: u64, norm: NormStats, t_obs: usize) -> Result<Self> {
        let params = init_params(seed, &arch);
        Self::new(arch, params, norm, t_obs)
    }

    pub fn kind(&self) -> ModelKind {
        self.arch.kind
    }

    pub fn output_scale(&self) -> OutputScale {
        if self.kind().predicts_deltas() {
            OutputScale::IDENTITY
        } else {
            OutputScale { mean: [self.norm.mean[0], self.norm.mean[1]], std: [self.norm.std[0], self.norm.std[1]] }
        }
    }

    /// Normalized motion input with this model's column set.
    pub fn motion_input(&self, sample: &Sample) -> Result<MotionFeatures> {
        let m = &sample.motion;
        if m.cols() != 7 {
            return Err(shape_err("obs", "7 raw motion columns", m.cols()));
        }
        let mut out = Matrix::zeros(m.rows(), 7);
        for r in 0..m.rows() {
            for c in 0..7 {
                let v = m.0.get(r, c);
                // yaw passes through unscaled
                let scaled = if c == 6 { v } else { (v - self.norm.mean[c]) / self.norm.std[c] };
                out.set(r, c, scaled);
            }
        }
        let out = MotionFeatures(out);
        Ok(if self.kind().uses_positions() { out } else { out.without_positions() })
    }

    pub fn prepare_batch(&self, samples: &[&Sample]) -> Result<Batch> {
        let mut motion = Vec::with_capacity(samples.len());
        for s in samples {
            if s.t_obs() != self.t_obs || s.motion.rows() != self.t_obs {
                return Err(shape_err("obs", alloc::format!("{} observed steps", self.t_obs), s.motion.rows()));
            }
            motion.push(self.motion_input(s)?);
        }
        let refs: Vec<&MotionFeatures> = motion.iter().collect();
        let rasters: Vec<&[RasterChunk]> = samples
            .iter()
            .map(|s| match self.kind() {
                ModelKind::PNet | ModelKind::PdNet => &s.rasters[..0],
                ModelKind::SmNet => {
                    let n = s.rasters.len();
                    &s.rasters[n.saturating_sub(1)..]
                }
                ModelKind::TsmNet => &s.rasters[..],
            })
            .collect();
        Batch::new(&self.arch, &refs, &rasters)
    }

    /// Training target of one sample: per-step deltas, or absolute future
    /// positions for P-Net. `t_hor x 2`.
    pub fn targets(&self, sample: &Sample, t_hor: usize) -> Result<Matrix> {
        if self.kind().predicts_deltas() {
            Ok(sample.delta_targets(t_hor)?.0)
        } else {
            let pts = sample.future_positions(t_hor)?;
            Ok(Matrix::from_rows(&pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>()))
        }
    }

    /// Model outputs (after output scaling) for every sample, eval mode.
    pub fn predict_batch(&self, samples: &[&Sample], t_hor: usize) -> Result<Vec<Matrix>> {
        let batch = self.prepare_batch(samples)?;
        let trace = forward_batch(&self.arch, &self.params, batch, t_hor, Mode::Eval)?;
        let scale = self.output_scale();
        Ok((0..samples.len())
            .map(|b| {
                let mut m = trace.row_output(b);
                for k in 0..t_hor {
                    let v = scale.apply(m.row(k));
                    m.row_mut(k).copy_from_slice(&v);
                }
                m
            })
            .collect())
    }

    /// Predicted absolute future positions, eval mode.
    pub fn predict_positions(&self, samples: &[&Sample], t_hor: usize) -> Result<Vec<Vec<Point>>> {
        let outs = self.predict_batch(samples, t_hor)?;
        Ok(outs
            .into_iter()
            .zip(samples)
            .map(|(m, s)| {
                if self.kind().predicts_deltas() {
                    reconstruct_positions(s.last_observed(), &DeltaTargets(m))
                } else {
                    m.iter_rows().map(|r| Point::new(r[0], r[1])).collect()
                }
            })
            .collect())
    }

    /// Mean squared error over the batch (all `2 * t_hor` entries of every
    /// sample) and its gradient, one training-mode forward pass.
    pub fn loss_and_grad(&self, batch: Batch, targets: &[Matrix], t_hor: usize, rng: &mut Rng) -> Result<(f64, ModelParams)> {
        let n = batch.size;
        if targets.len() != n {
            return Err(shape_err("out", alloc::format!("{n} targets"), targets.len()));
        }
        for t in targets {
            if t.shape() != (t_hor, 2) {
                return Err(shape_err("out", alloc::format!("{t_hor}x2 target"), alloc::format!("{}x{}", t.rows(), t.cols())));
            }
        }
        let trace = forward_batch(&self.arch, &self.params, batch, t_hor, Mode::Train(rng))?;
        let scale = self.output_scale();
        let count = (n * t_hor * 2) as f64;
        let mut loss = 0.0;
        let mut d_out = alloc::vec![0.0; trace.out.len()];
        for k in 0..t_hor {
            for (b, t) in targets.iter().enumerate() {
                let i = (k * n + b) * 2;
                let y = scale.apply(&trace.out[i..i + 2]);
                for a in 0..2 {
                    let diff = y[a] - t.get(k, a);
                    loss += diff * diff;
                    d_out[i + a] = 2.0 * diff * scale.std[a] / count;
                }
            }
        }
        let grad = backward_batch(&self.arch, &self.params, &trace, &d_out);
        Ok((loss / count, grad))
    }
}

fn single_batch(arch: &ArchConfig, x_obs: &MotionFeatures, rasters: &[RasterChunk]) -> Result<Batch> {
    Batch::new(arch, &[x_obs], &[rasters])
}

/// CNN encoding of one chunk: `32 * 4 * 4` post-ReLU activations.
pub fn cnn_forward(chunk: &RasterChunk, params: &ModelParams, arch: &ArchConfig) -> Result<Vec<f64>> {
    let cnn = arch.cnn.as_ref().ok_or(Error::UnexpectedRaster { kind: arch.kind.name() })?;
    let img = image_tensor(chunk, cnn.image_size)?;
    Ok(cnn_features(params, &img, cnn.image_size).pop().unwrap_or(img))
}

/// `ReLU(W x + b)` for one motion row.
pub fn motion_mlp_forward(row: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    if row.len() != params.obs.inputs {
        return Err(shape_err("obs", params.obs.inputs, row.len()));
    }
    let mut y = dense_forward(&params.obs, row, 1);
    relu_inplace(&mut y);
    Ok(y)
}

/// Spatial features first, motion features last.
pub fn concat_latent(spatial: &[f64], motion: &[f64], arch: &ArchConfig) -> Result<Vec<f64>> {
    let cd = arch.latent_dim - arch.motion_dim;
    if spatial.len() != cd {
        return Err(shape_err("spatial", cd, spatial.len()));
    }
    if motion.len() != arch.motion_dim {
        return Err(shape_err("obs", arch.motion_dim, motion.len()));
    }
    let mut z = Vec::with_capacity(arch.latent_dim);
    z.extend_from_slice(spatial);
    z.extend_from_slice(motion);
    Ok(z)
}

/// Output MLP: `latent -> head_hidden` with ReLU, then a linear map to 2.
pub fn head_forward(z: &[f64], params: &ModelParams) -> Result<[f64; 2]> {
    if z.len() != params.out_hidden.inputs {
        return Err(shape_err("out", params.out_hidden.inputs, z.len()));
    }
    let mut hidden = dense_forward(&params.out_hidden, z, 1);
    relu_inplace(&mut hidden);
    let y = dense_forward(&params.out, &hidden, 1);
    Ok([y[0], y[1]])
}

/// Full TSM-Net pipeline on one sample: one raster per observed step.
/// `x_obs` holds normalized 5-column motion features. Returns `t_hor x 2`
/// deltas.
pub fn tsmnet_forward(
    arch: &ArchConfig,
    params: &ModelParams,
    x_obs: &MotionFeatures,
    x_spatial: &[RasterChunk],
    t_hor: usize,
    mode: Mode<'_>,
) -> Result<Matrix> {
    if arch.kind != ModelKind::TsmNet {
        return Err(Error::InvalidConfig(alloc::format!("tsmnet_forward called with a {} architecture", arch.kind)));
    }
    check_params(arch, params)?;
    if x_spatial.len() != x_obs.rows() {
        return Err(shape_err("spatial", alloc::format!("{} rasters", x_obs.rows()), x_spatial.len()));
    }
    let batch = single_batch(arch, x_obs, x_spatial)?;
    Ok(forward_batch(arch, params, batch, t_hor, mode)?.row_output(0))
}

/// Baseline pipelines. P-Net and PD-Net take 7-column motion and no
/// rasters; SM-Net takes 5-column motion and the single raster of the last
/// observed step. Returns the raw `t_hor x 2` head output (deltas, or
/// standardized positions for P-Net; see [`Model::output_scale`]).
pub fn baseline_forward(
    arch: &ArchConfig,
    params: &ModelParams,
    x_obs: &MotionFeatures,
    rasters: &[RasterChunk],
    t_hor: usize,
    mode: Mode<'_>,
) -> Result<Matrix> {
    match arch.kind {
        ModelKind::PNet | ModelKind::PdNet if !rasters.is_empty() => {
            return Err(Error::UnexpectedRaster { kind: arch.kind.name() })
        }
        ModelKind::SmNet if rasters.len() != 1 => return Err(shape_err("spatial", "1 raster", rasters.len())),
        ModelKind::TsmNet => {
            return Err(Error::InvalidConfig("baseline_forward called with a TSM-Net architecture".into()))
        }
        _ => {}
    }
    check_params(arch, params)?;
    let batch = single_batch(arch, x_obs, rasters)?;
    Ok(forward_batch(arch, params, batch, t_hor, mode)?.row_output(0))
}

impl ModelParams {
    /// Recurrent weights as seen by the encoder.
    pub fn encoder_weights(&self) -> &LstmWeights {
        &self.enc_dec
    }

    pub fn encoder_weights_mut(&mut self) -> &mut LstmWeights {
        &mut self.enc_dec
    }

    /// Recurrent weights as seen by the decoder: the same storage.
    pub fn decoder_weights(&self) -> &LstmWeights {
        &self.enc_dec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::arch::CnnConfig;
    use crate::raster::RgbImage;

    fn tiny_arch(kind: ModelKind) -> ArchConfig {
        ArchConfig::for_kind(kind, 16).unwrap()
    }

    fn random_motion(rng: &mut Rng, rows: usize, cols: usize) -> MotionFeatures {
        let mut m = Matrix::zeros(rows, cols);
        for v in m.as_mut_slice() {
            *v = math::standard_normal(rng);
        }
        MotionFeatures(m)
    }

    fn random_chunk(rng: &mut Rng, size: usize) -> RasterChunk {
        let mut image = RgbImage::filled(size, size, [0, 0, 0]);
        for v in &mut image.data {
            *v = (math::uniform(rng, 0.0, 256.0) as u32).min(255) as u8;
        }
        RasterChunk { image, center_pos: Point::new(0.0, 0.0), meters_per_pixel: 1.0, timestep: 0 }
    }

    fn random_batch(arch: &ArchConfig, rng: &mut Rng, n: usize, t_obs: usize) -> Batch {
        let motion: Vec<MotionFeatures> = (0..n).map(|_| random_motion(rng, t_obs, arch.motion_dim)).collect();
        let size = arch.cnn.as_ref().map_or(0, |c| c.image_size);
        let rasters: Vec<Vec<RasterChunk>> = (0..n)
            .map(|_| (0..arch.kind.raster_count(t_obs)).map(|_| random_chunk(rng, size)).collect())
            .collect();
        let m: Vec<&MotionFeatures> = motion.iter().collect();
        let r: Vec<&[RasterChunk]> = rasters.iter().map(|v| v.as_slice()).collect();
        Batch::new(arch, &m, &r).unwrap()
    }

    fn loss(arch: &ArchConfig, params: &ModelParams, batch: &Batch, targets: &[f64], t_hor: usize, rng: &Rng) -> f64 {
        let mut r = rng.clone();
        let trace = forward_batch(arch, params, batch.clone(), t_hor, Mode::Train(&mut r)).unwrap();
        trace.out.iter().zip(targets).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / targets.len() as f64
    }

    /// Central differences on a handful of entries of every block.
    fn gradient_check(kind: ModelKind) {
        let arch = tiny_arch(kind);
        let mut rng = math::seeded(11);
        let mut params = init_params(3, &arch);
        // nonzero biases keep pre-activations off the ReLU kink
        for (_, t) in params.tensors_mut() {
            for v in t.iter_mut().filter(|v| **v == 0.0) {
                *v = math::uniform(&mut rng, -0.1, 0.1);
            }
        }
        let (n, t_obs, t_hor) = (3, 3, 4);
        let batch = random_batch(&arch, &mut rng, n, t_obs);
        let targets: Vec<f64> = (0..n * t_hor * 2).map(|_| math::standard_normal(&mut rng)).collect();
        let state = math::seeded(99);

        let mut r = state.clone();
        let trace = forward_batch(&arch, &params, batch.clone(), t_hor, Mode::Train(&mut r)).unwrap();
        let d_out: Vec<f64> = trace.out.iter().zip(&targets).map(|(a, b)| 2.0 * (a - b) / targets.len() as f64).collect();
        let grad = backward_batch(&arch, &params, &trace, &d_out);

        let eps = 1e-6;
        let mut probe = math::seeded(5);
        let grads = grad.tensors();
        for (ti, (name, g)) in grads.iter().enumerate() {
            for _ in 0..4 {
                let i = (math::uniform(&mut probe, 0.0, g.len() as f64) as usize).min(g.len() - 1);
                let mut p = params.clone();
                p.tensors_mut()[ti].1[i] += eps;
                let up = loss(&arch, &p, &batch, &targets, t_hor, &state);
                p.tensors_mut()[ti].1[i] -= 2.0 * eps;
                let down = loss(&arch, &p, &batch, &targets, t_hor, &state);
                let numeric = (up - down) / (2.0 * eps);
                let err = (numeric - g[i]).abs() / numeric.abs().max(g[i].abs()).max(1e-6);
                assert!(err < 1e-4, "{kind} {name}[{i}]: analytic {} numeric {numeric}", g[i]);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in ModelKind::ALL {
            gradient_check(kind);
        }
    }

    #[test]
    fn zero_params_give_zero_output() {
        let arch = tiny_arch(ModelKind::TsmNet);
        let params = ModelParams::zeros(&arch);
        let mut rng = math::seeded(1);
        let x = random_motion(&mut rng, 8, 5);
        let chunks: Vec<RasterChunk> = (0..8).map(|_| random_chunk(&mut rng, 16)).collect();
        let y = tsmnet_forward(&arch, &params, &x, &chunks, 8, Mode::Eval).unwrap();
        assert_eq!(y.shape(), (8, 2));
        assert!(y.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_rows_follow_requested_horizon() {
        let arch = tiny_arch(ModelKind::TsmNet);
        let params = init_params(1, &arch);
        let mut rng = math::seeded(2);
        let x = random_motion(&mut rng, 4, 5);
        let chunks: Vec<RasterChunk> = (0..4).map(|_| random_chunk(&mut rng, 16)).collect();
        for t_hor in [1, 8, 16, 32] {
            let y = tsmnet_forward(&arch, &params, &x, &chunks, t_hor, Mode::Eval).unwrap();
            assert_eq!(y.rows(), t_hor);
        }
        let a = tsmnet_forward(&arch, &params, &x, &chunks, 8, Mode::Eval).unwrap();
        let b = tsmnet_forward(&arch, &params, &x, &chunks, 8, Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn baselines_reject_rasters() {
        let arch = tiny_arch(ModelKind::PdNet);
        let params = init_params(1, &arch);
        let mut rng = math::seeded(2);
        let x = random_motion(&mut rng, 4, 7);
        let chunk = random_chunk(&mut rng, 16);
        let err = baseline_forward(&arch, &params, &x, core::slice::from_ref(&chunk), 8, Mode::Eval).unwrap_err();
        assert!(matches!(err, Error::UnexpectedRaster { .. }));
        assert_eq!(baseline_forward(&arch, &params, &x, &[], 8, Mode::Eval).unwrap().shape(), (8, 2));
    }

    #[test]
    fn wrong_raster_size_names_spatial_block() {
        let arch = tiny_arch(ModelKind::TsmNet);
        let params = init_params(1, &arch);
        let mut rng = math::seeded(2);
        let chunk = random_chunk(&mut rng, 32);
        assert!(matches!(cnn_forward(&chunk, &params, &arch), Err(Error::Shape { block: "spatial", .. })));
    }

    #[test]
    fn cnn_output_is_512_and_nonnegative() {
        let arch = ArchConfig::for_kind(ModelKind::TsmNet, 64).unwrap();
        assert_eq!(arch.cnn, Some(CnnConfig::standard(64).unwrap()));
        let params = init_params(4, &arch);
        let mut rng = math::seeded(3);
        let f = cnn_forward(&random_chunk(&mut rng, 64), &params, &arch).unwrap();
        assert_eq!(f.len(), 512);
        assert!(f.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn motion_mlp_identity_and_relu() {
        let arch = tiny_arch(ModelKind::TsmNet);
        let mut params = ModelParams::zeros(&arch);
        params.obs = super::super::params::Dense::identity(5);
        assert_eq!(motion_mlp_forward(&[1.0, 2.0, 3.0, 4.0, 5.0], &params).unwrap(), [1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(motion_mlp_forward(&[-1.0; 5], &params).unwrap(), [0.0; 5]);
    }

    #[test]
    fn concat_checks_lengths() {
        let arch = ArchConfig::tsm();
        let z = concat_latent(&[0.0; 512], &[1.0; 5], &arch).unwrap();
        assert_eq!(z.len(), 517);
        assert_eq!(z.iter().sum::<f64>(), 5.0);
        assert_eq!(&z[512..], &[1.0; 5]);
        assert!(concat_latent(&[0.0; 511], &[1.0; 5], &arch).is_err());
    }

    #[test]
    fn encoder_and_decoder_share_storage() {
        let mut params = ModelParams::zeros(&tiny_arch(ModelKind::PdNet));
        params.encoder_weights_mut().w_ih[0] = 42.0;
        assert_eq!(params.decoder_weights().w_ih[0], 42.0);
        assert!(core::ptr::eq(params.encoder_weights(), params.decoder_weights()));
    }
}
