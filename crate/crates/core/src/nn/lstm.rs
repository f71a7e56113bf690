//! The shared-weight LSTM cell, sequence encoder and recursive decoder.

use alloc::vec::Vec;

use super::params::LstmWeights;
use crate::error::{shape_err, Error, Result};
use crate::math::{self, Rng};
use crate::tensor::{gemm, Matrix};

/// Hidden and cell state of one sequence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden: usize) -> Self {
        Self { h: alloc::vec![0.0; hidden], c: alloc::vec![0.0; hidden] }
    }

    pub fn hidden_size(&self) -> usize {
        self.h.len()
    }

    pub fn is_finite(&self) -> bool {
        self.h.iter().chain(&self.c).all(|v| v.is_finite())
    }
}

/// Draws `h` and `c` independently from N(0, 1).
pub fn sample_initial_state(rng: &mut Rng, hidden: usize) -> LstmState {
    let mut s = LstmState::zeros(hidden);
    math::fill_standard_normal(rng, &mut s.h);
    math::fill_standard_normal(rng, &mut s.c);
    s
}

/// Everything one batched cell step needs for its backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Activated gates `[i | f | g | o]` per row, `B x 4H`.
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

/// One cell step for `batch` rows:
/// `i, f, o = sigmoid(.)`, `g = tanh(.)`, `c' = f*c + i*g`, `h' = o*tanh(c')`.
pub(crate) fn step_batch(w: &LstmWeights, x: Vec<f64>, h_prev: Vec<f64>, c_prev: Vec<f64>, batch: usize) -> StepCache {
    let hs = w.hidden_size;
    let g4 = 4 * hs;
    let mut gates = alloc::vec![0.0; batch * g4];
    for row in gates.chunks_mut(g4) {
        for ((g, bi), bh) in row.iter_mut().zip(&w.b_ih).zip(&w.b_hh) {
            *g = bi + bh;
        }
    }
    gemm(false, true, batch, g4, w.input_size, 1.0, &x, &w.w_ih, 1.0, &mut gates);
    gemm(false, true, batch, g4, hs, 1.0, &h_prev, &w.w_hh, 1.0, &mut gates);
    let mut c = alloc::vec![0.0; batch * hs];
    let mut tanh_c = alloc::vec![0.0; batch * hs];
    let mut h = alloc::vec![0.0; batch * hs];
    for b in 0..batch {
        let row = &mut gates[b * g4..(b + 1) * g4];
        for j in 0..hs {
            let i_g = math::sigmoid(row[j]);
            let f_g = math::sigmoid(row[hs + j]);
            let g_g = math::tanh(row[2 * hs + j]);
            let o_g = math::sigmoid(row[3 * hs + j]);
            row[j] = i_g;
            row[hs + j] = f_g;
            row[2 * hs + j] = g_g;
            row[3 * hs + j] = o_g;
            let k = b * hs + j;
            c[k] = f_g * c_prev[k] + i_g * g_g;
            tanh_c[k] = math::tanh(c[k]);
            h[k] = o_g * tanh_c[k];
        }
    }
    StepCache { x, h_prev, c_prev, gates, tanh_c, c, h }
}

pub(crate) struct StepGrads {
    /// Gradient w.r.t. gate pre-activations, `B x 4H`.
    pub d_pre: Vec<f64>,
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Backward through one step given gradients on its outputs `h'` and `c'`.
/// Bias gradients are accumulated into `grad`; weight gradients are left to
/// [`accumulate_weight_grads`] so they can be computed for all steps at once.
pub(crate) fn step_backward(
    w: &LstmWeights,
    cache: &StepCache,
    dh: &[f64],
    dc: &[f64],
    batch: usize,
    grad: &mut LstmWeights,
    want_dx: bool,
) -> StepGrads {
    let hs = w.hidden_size;
    let g4 = 4 * hs;
    let mut d_pre = alloc::vec![0.0; batch * g4];
    let mut dc_prev = alloc::vec![0.0; batch * hs];
    for b in 0..batch {
        let gates = &cache.gates[b * g4..(b + 1) * g4];
        let dp = &mut d_pre[b * g4..(b + 1) * g4];
        for j in 0..hs {
            let k = b * hs + j;
            let (i_g, f_g, g_g, o_g) = (gates[j], gates[hs + j], gates[2 * hs + j], gates[3 * hs + j]);
            let tc = cache.tanh_c[k];
            let dc_total = dc[k] + dh[k] * o_g * (1.0 - tc * tc);
            dp[j] = dc_total * g_g * i_g * (1.0 - i_g);
            dp[hs + j] = dc_total * cache.c_prev[k] * f_g * (1.0 - f_g);
            dp[2 * hs + j] = dc_total * i_g * (1.0 - g_g * g_g);
            dp[3 * hs + j] = dh[k] * tc * o_g * (1.0 - o_g);
            dc_prev[k] = dc_total * f_g;
        }
        for (acc, d) in grad.b_ih.iter_mut().zip(dp.iter()) {
            *acc += d;
        }
        for (acc, d) in grad.b_hh.iter_mut().zip(dp.iter()) {
            *acc += d;
        }
    }
    let mut dh_prev = alloc::vec![0.0; batch * hs];
    gemm(false, false, batch, hs, g4, 1.0, &d_pre, &w.w_hh, 0.0, &mut dh_prev);
    let dx = if want_dx {
        let mut dx = alloc::vec![0.0; batch * w.input_size];
        gemm(false, false, batch, w.input_size, g4, 1.0, &d_pre, &w.w_ih, 0.0, &mut dx);
        dx
    } else {
        Vec::new()
    };
    StepGrads { d_pre, dx, dh_prev, dc_prev }
}

/// `dW_ih += dPre^T X`, `dW_hh += dPre^T H_prev` over `rows` stacked steps.
pub(crate) fn accumulate_weight_grads(grad: &mut LstmWeights, xs: &[f64], hs: &[f64], d_pre: &[f64], rows: usize) {
    let g4 = 4 * grad.hidden_size;
    gemm(true, false, g4, grad.input_size, rows, 1.0, d_pre, xs, 1.0, &mut grad.w_ih);
    gemm(true, false, g4, grad.hidden_size, rows, 1.0, d_pre, hs, 1.0, &mut grad.w_hh);
}

fn check_state(w: &LstmWeights, state: &LstmState) -> Result<()> {
    if state.h.len() != w.hidden_size || state.c.len() != w.hidden_size {
        return Err(shape_err("enc_dec", w.hidden_size, state.h.len()));
    }
    Ok(())
}

/// One cell step for a single sequence.
pub fn lstm_cell_step(x: &[f64], state: &LstmState, w: &LstmWeights) -> Result<LstmState> {
    if x.len() != w.input_size {
        return Err(shape_err("enc_dec", w.input_size, x.len()));
    }
    check_state(w, state)?;
    let cache = step_batch(w, x.to_vec(), state.h.clone(), state.c.clone(), 1);
    Ok(LstmState { h: cache.h, c: cache.c })
}

/// Gradients of one cell step.
#[derive(Debug, Clone)]
pub struct CellGrads {
    pub weights: LstmWeights,
    pub dx: Vec<f64>,
    pub dh_prev: Vec<f64>,
    pub dc_prev: Vec<f64>,
}

/// Backward through [`lstm_cell_step`] given `dL/dh'` and `dL/dc'`.
pub fn lstm_cell_backward(x: &[f64], state: &LstmState, w: &LstmWeights, dh: &[f64], dc: &[f64]) -> Result<CellGrads> {
    if x.len() != w.input_size {
        return Err(shape_err("enc_dec", w.input_size, x.len()));
    }
    check_state(w, state)?;
    if dh.len() != w.hidden_size || dc.len() != w.hidden_size {
        return Err(shape_err("enc_dec", w.hidden_size, dh.len()));
    }
    let cache = step_batch(w, x.to_vec(), state.h.clone(), state.c.clone(), 1);
    let mut weights = LstmWeights::zeros(w.input_size, w.hidden_size);
    let g = step_backward(w, &cache, dh, dc, 1, &mut weights, true);
    accumulate_weight_grads(&mut weights, &cache.x, &cache.h_prev, &g.d_pre, 1);
    Ok(CellGrads { weights, dx: g.dx, dh_prev: g.dh_prev, dc_prev: g.dc_prev })
}

/// Runs the encoder over `inputs` (one row per observed step, oldest
/// first). Row `k` of the first result is the hidden state after row `k`.
pub fn encode_sequence(inputs: &Matrix, init: &LstmState, w: &LstmWeights) -> Result<(Matrix, LstmState)> {
    if inputs.rows() == 0 {
        return Err(Error::EmptySequence);
    }
    if inputs.cols() != w.input_size {
        return Err(shape_err("enc_dec", w.input_size, inputs.cols()));
    }
    check_state(w, init)?;
    let mut out = Matrix::zeros(inputs.rows(), w.hidden_size);
    let mut state = init.clone();
    for (k, row) in inputs.iter_rows().enumerate() {
        state = lstm_cell_step(row, &state, w)?;
        out.row_mut(k).copy_from_slice(&state.h);
    }
    Ok((out, state))
}

/// Recursive decoder: the first input is `z_dec_hs` (the encoder's final
/// hidden state), each later input is the previous decoder hidden output.
/// With `dropout = Some((rng, p))` the returned rows are inverted-dropout
/// masked; the recursion itself always runs on the unmasked hidden state.
pub fn decode_rollout(
    z_dec_hs: &[f64],
    carry: &LstmState,
    t_hor: usize,
    w: &LstmWeights,
    mut dropout: Option<(&mut Rng, f64)>,
) -> Result<Matrix> {
    if t_hor < 1 {
        return Err(Error::InvalidHorizon(t_hor));
    }
    if z_dec_hs.len() != w.input_size {
        return Err(shape_err("enc_dec", w.input_size, z_dec_hs.len()));
    }
    check_state(w, carry)?;
    let mut out = Matrix::zeros(t_hor, w.hidden_size);
    let mut x = z_dec_hs.to_vec();
    let mut state = carry.clone();
    for k in 0..t_hor {
        state = lstm_cell_step(&x, &state, w)?;
        let row = out.row_mut(k);
        row.copy_from_slice(&state.h);
        if let Some((rng, p)) = dropout.as_mut() {
            apply_dropout(rng, *p, row);
        }
        x.clone_from(&state.h);
    }
    Ok(out)
}

/// Inverted dropout in place; returns the mask (0 or `1 / (1 - p)`).
pub(crate) fn apply_dropout(rng: &mut Rng, p: f64, v: &mut [f64]) -> Vec<f64> {
    let keep = 1.0 - p;
    let scale = if keep > 0.0 { 1.0 / keep } else { 0.0 };
    v.iter_mut()
        .map(|x| {
            let m = if math::uniform(rng, 0.0, 1.0) < keep { scale } else { 0.0 };
            *x *= m;
            m
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_zero_cell_state() {
        let w = LstmWeights::zeros(4, 3);
        let s = lstm_cell_step(&[1.0, 2.0, 3.0, 4.0], &LstmState::zeros(3), &w).unwrap();
        assert_eq!(s, LstmState::zeros(3));
    }

    #[test]
    fn shape_errors_name_the_block() {
        let w = LstmWeights::zeros(4, 3);
        let err = lstm_cell_step(&[1.0], &LstmState::zeros(3), &w).unwrap_err();
        assert!(matches!(err, Error::Shape { block: "enc_dec", .. }));
        assert!(matches!(
            encode_sequence(&Matrix::zeros(0, 4), &LstmState::zeros(3), &w),
            Err(Error::EmptySequence)
        ));
        assert!(matches!(
            decode_rollout(&[0.0; 4], &LstmState::zeros(3), 0, &w, None),
            Err(Error::InvalidHorizon(0))
        ));
    }

    #[test]
    fn single_step_encoder_output_is_final_hidden() {
        let mut w = LstmWeights::zeros(2, 2);
        w.w_ih.iter_mut().enumerate().for_each(|(i, v)| *v = 0.1 * i as f64);
        let z = Matrix::from_rows(&[[0.5, -0.5]]);
        let (out, fin) = encode_sequence(&z, &LstmState::zeros(2), &w).unwrap();
        assert_eq!(out.row(0), fin.h.as_slice());
    }

    #[test]
    fn dropout_mask_scales_survivors() {
        let mut rng = math::seeded(1);
        let mut v = alloc::vec![1.0; 1000];
        let mask = apply_dropout(&mut rng, 0.5, &mut v);
        assert!(mask.iter().all(|&m| m == 0.0 || m == 2.0));
        let kept = mask.iter().filter(|&&m| m > 0.0).count();
        assert!((400..600).contains(&kept));
    }
}
