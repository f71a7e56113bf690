use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::math;
use crate::nn::Parameters;
use crate::tensor::Matrix;

/// Mean over all entries of the squared difference.
pub fn mse_loss(predicted: &Matrix, target: &Matrix) -> Result<f64> {
    check(predicted, target)?;
    let n = predicted.as_slice().len();
    if n == 0 {
        return Err(Error::EmptyMetricInput);
    }
    let sum: f64 = predicted.as_slice().iter().zip(target.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / n as f64)
}

/// Gradient of [`mse_loss`] w.r.t. `predicted`.
pub fn mse_grad(predicted: &Matrix, target: &Matrix) -> Result<Matrix> {
    check(predicted, target)?;
    let n = predicted.as_slice().len() as f64;
    let data = predicted.as_slice().iter().zip(target.as_slice()).map(|(a, b)| 2.0 * (a - b) / n).collect();
    Ok(Matrix::from_vec(predicted.rows(), predicted.cols(), data))
}

fn check(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(shape_err("mse", alloc::format!("{}x{}", b.rows(), b.cols()), alloc::format!("{}x{}", a.rows(), a.cols())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// First and second moment accumulators, one per parameter block.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new<P: Parameters>(params: &P) -> Self {
        let shapes: Vec<Vec<f64>> = params.tensors().iter().map(|(_, t)| alloc::vec![0.0; t.len()]).collect();
        Self { m: shapes.clone(), v: shapes, step: 0 }
    }
}

/// One bias-corrected Adam update. Gradients are checked before any
/// parameter is touched, so an error leaves `params` and `state` intact.
pub fn adam_step<P: Parameters>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    let g = grads.tensors();
    if state.m.is_empty() && state.step == 0 {
        *state = AdamState::new(params);
    }
    if g.len() != state.m.len() {
        return Err(shape_err("adam", alloc::format!("{} blocks", state.m.len()), g.len()));
    }
    for ((name, t), m) in g.iter().zip(&state.m) {
        if t.len() != m.len() {
            return Err(shape_err("adam", alloc::format!("{name} with {} values", m.len()), t.len()));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { block: String::from(name.as_str()) });
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t as f64);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t as f64);
    for (((_, p), (_, gr)), (m, v)) in params.tensors_mut().into_iter().zip(g.iter()).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        for i in 0..p.len() {
            let gi = gr[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (math::sqrt(v_hat) + cfg.epsilon);
        }
    }
    Ok(())
}

/// Global L2 norm over every block.
pub fn grad_norm<P: Parameters>(grads: &P) -> f64 {
    math::sqrt(grads.tensors().iter().flat_map(|(_, t)| t.iter()).map(|v| v * v).sum())
}

/// Rescales `grads` so the global norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<P: Parameters>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        for (_, t) in grads.tensors_mut() {
            for v in t {
                *v *= k;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        let a = Matrix::from_rows(&[[1.0, 1.0]]);
        let z = Matrix::zeros(1, 2);
        assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mse_loss(&a, &z).unwrap(), 1.0);
        assert!(mse_loss(&a, &Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let mut rng = math::seeded(9);
        let mut p = Matrix::zeros(8, 2);
        let mut t = Matrix::zeros(8, 2);
        for v in p.as_mut_slice().iter_mut().chain(t.as_mut_slice()) {
            *v = math::standard_normal(&mut rng);
        }
        let g = mse_grad(&p, &t).unwrap();
        for i in 0..16 {
            let eps = 1e-5;
            let mut up = p.clone();
            up.as_mut_slice()[i] += eps;
            let mut down = p.clone();
            down.as_mut_slice()[i] -= eps;
            let num = (mse_loss(&up, &t).unwrap() - mse_loss(&down, &t).unwrap()) / (2.0 * eps);
            let a = g.as_slice()[i];
            assert!((num - a).abs() / a.abs().max(1e-12) < 1e-8, "{num} vs {a}");
        }
    }

    #[test]
    fn zero_gradient_is_identity() {
        let mut p = alloc::vec![1.0, -2.0, 3.0];
        let g = alloc::vec![0.0; 3];
        let mut s = AdamState::new(&p);
        for _ in 0..5 {
            adam_step(&mut p, &g, &mut s, 0.1, &AdamConfig::default()).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
    }

    #[test]
    fn constant_gradient_closed_form() {
        let cfg = AdamConfig::default();
        let mut p = alloc::vec![0.0];
        let g = alloc::vec![1.0];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.1, &cfg).unwrap();
        // m_hat = v_hat = 1 after bias correction
        let first = -0.1 / (1.0 + 1e-8);
        assert!((p[0] - first).abs() < 1e-15);
        adam_step(&mut p, &g, &mut s, 0.1, &cfg).unwrap();
        assert!((p[0] - 2.0 * first).abs() < 1e-12);
    }

    #[test]
    fn moments_decay_after_gradients_stop() {
        let cfg = AdamConfig::default();
        let mut p = alloc::vec![0.0];
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &alloc::vec![1.0], &mut s, 0.01, &cfg).unwrap();
        let (m0, v0) = (s.m[0][0], s.v[0][0]);
        for _ in 0..50 {
            adam_step(&mut p, &alloc::vec![0.0], &mut s, 0.01, &cfg).unwrap();
        }
        assert!(s.m[0][0] < m0 * 0.01 && s.v[0][0] < v0);
    }

    #[test]
    fn non_finite_gradient_names_block() {
        let mut p = alloc::vec![0.0];
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &alloc::vec![f64::NAN], &mut s, 0.1, &AdamConfig::default()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { ref block } if block == "param"));
        assert_eq!(p, [0.0]);
        assert_eq!(s.step, 0);
    }

    #[test]
    fn clipping_bounds_global_norm() {
        let mut g = alloc::vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 1.0), 5.0);
        assert!((grad_norm(&g) - 1.0).abs() < 1e-12);
        let mut small = alloc::vec![0.3, 0.4];
        clip_grad_norm(&mut small, 1.0);
        assert_eq!(small, [0.3, 0.4]);
    }
}
