use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::arch::{ArchConfig, KERNEL};
use crate::math::{self, Rng};

/// Named flat parameter blocks, visited in a fixed order. Optimizers and
/// checkpoints rely on the order being stable for a given architecture.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &[f64])>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        alloc::vec![(String::from("param"), self.as_slice())]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        alloc::vec![(String::from("param"), self.as_mut_slice())]
    }
}

/// 3x3 convolution, weights laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn zeros(in_channels: usize, out_channels: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            stride,
            weight: alloc::vec![0.0; out_channels * in_channels * KERNEL * KERNEL],
            bias: alloc::vec![0.0; out_channels],
        }
    }

    pub fn patch_len(&self) -> usize {
        self.in_channels * KERNEL * KERNEL
    }
}

/// Fully connected layer, weights `[out][in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weight: alloc::vec![0.0; inputs * outputs],
            bias: alloc::vec![0.0; outputs],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut d = Self::zeros(n, n);
        for i in 0..n {
            d.weight[i * n + i] = 1.0;
        }
        d
    }
}

/// LSTM weights. The `4H` rows of `w_ih`, `w_hh`, `b_ih` and `b_hh` stack
/// the input, forget, cell and output gates in that order, so rows
/// `0..H` of `w_ih` are `W_ii`, rows `H..2H` are `W_if`, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmWeights {
    pub input_size: usize,
    pub hidden_size: usize,
    pub w_ih: Vec<f64>,
    pub w_hh: Vec<f64>,
    pub b_ih: Vec<f64>,
    pub b_hh: Vec<f64>,
}

impl LstmWeights {
    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        let g = 4 * hidden_size;
        Self {
            input_size,
            hidden_size,
            w_ih: alloc::vec![0.0; g * input_size],
            w_hh: alloc::vec![0.0; g * hidden_size],
            b_ih: alloc::vec![0.0; g],
            b_hh: alloc::vec![0.0; g],
        }
    }
}

/// Every learnable weight of one model. There is exactly one recurrent
/// weight set; the encoder and the decoder both run on `enc_dec`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Empty for the motion-only baselines.
    pub spatial: Vec<ConvLayer>,
    pub obs: Dense,
    pub enc_dec: LstmWeights,
    pub out_hidden: Dense,
    pub out: Dense,
}

impl ModelParams {
    pub fn zeros(arch: &ArchConfig) -> Self {
        let spatial = match &arch.cnn {
            Some(cnn) => (0..cnn.channels.len())
                .map(|l| ConvLayer::zeros(cnn.layer_input_channels(l), cnn.channels[l], cnn.strides[l]))
                .collect(),
            None => Vec::new(),
        };
        Self {
            spatial,
            obs: Dense::zeros(arch.motion_dim, arch.motion_dim),
            enc_dec: LstmWeights::zeros(arch.latent_dim, arch.latent_dim),
            out_hidden: Dense::zeros(arch.latent_dim, arch.head_hidden),
            out: Dense::zeros(arch.head_hidden, arch.output_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Sum of squares over every block.
    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|(_, t)| t.iter()).map(|v| v * v).sum()
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            for v in t {
                *v *= k;
            }
        }
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = Vec::new();
        for (i, l) in self.spatial.iter().enumerate() {
            out.push((format!("spatial.conv{i}.weight"), &l.weight));
            out.push((format!("spatial.conv{i}.bias"), &l.bias));
        }
        out.push(("obs.weight".into(), &self.obs.weight));
        out.push(("obs.bias".into(), &self.obs.bias));
        out.push(("enc_dec.w_ih".into(), &self.enc_dec.w_ih));
        out.push(("enc_dec.w_hh".into(), &self.enc_dec.w_hh));
        out.push(("enc_dec.b_ih".into(), &self.enc_dec.b_ih));
        out.push(("enc_dec.b_hh".into(), &self.enc_dec.b_hh));
        out.push(("out.fc1.weight".into(), &self.out_hidden.weight));
        out.push(("out.fc1.bias".into(), &self.out_hidden.bias));
        out.push(("out.fc2.weight".into(), &self.out.weight));
        out.push(("out.fc2.bias".into(), &self.out.bias));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = Vec::new();
        for (i, l) in self.spatial.iter_mut().enumerate() {
            out.push((format!("spatial.conv{i}.weight"), &mut l.weight));
            out.push((format!("spatial.conv{i}.bias"), &mut l.bias));
        }
        out.push(("obs.weight".into(), &mut self.obs.weight));
        out.push(("obs.bias".into(), &mut self.obs.bias));
        out.push(("enc_dec.w_ih".into(), &mut self.enc_dec.w_ih));
        out.push(("enc_dec.w_hh".into(), &mut self.enc_dec.w_hh));
        out.push(("enc_dec.b_ih".into(), &mut self.enc_dec.b_ih));
        out.push(("enc_dec.b_hh".into(), &mut self.enc_dec.b_hh));
        out.push(("out.fc1.weight".into(), &mut self.out_hidden.weight));
        out.push(("out.fc1.bias".into(), &mut self.out_hidden.bias));
        out.push(("out.fc2.weight".into(), &mut self.out.weight));
        out.push(("out.fc2.bias".into(), &mut self.out.bias));
        out
    }
}

fn fill_uniform(rng: &mut Rng, bound: f64, out: &mut [f64]) {
    for v in out {
        *v = math::uniform(rng, -bound, bound);
    }
}

/// Uniform fan-in initialization: `+-sqrt(6 / fan_in)` for layers followed
/// by ReLU, `+-1 / sqrt(fan_in)` for the LSTM and the linear output layer.
/// Conv and dense biases start at zero.
pub fn init_params(seed: u64, arch: &ArchConfig) -> ModelParams {
    let mut rng = math::seeded(seed);
    let mut p = ModelParams::zeros(arch);
    for l in &mut p.spatial {
        let bound = math::sqrt(6.0 / l.patch_len() as f64);
        fill_uniform(&mut rng, bound, &mut l.weight);
    }
    let relu_bound = |fan_in: usize| math::sqrt(6.0 / fan_in as f64);
    fill_uniform(&mut rng, relu_bound(p.obs.inputs), &mut p.obs.weight);
    let h = 1.0 / math::sqrt(arch.latent_dim as f64);
    fill_uniform(&mut rng, h, &mut p.enc_dec.w_ih);
    fill_uniform(&mut rng, h, &mut p.enc_dec.w_hh);
    fill_uniform(&mut rng, h, &mut p.enc_dec.b_ih);
    fill_uniform(&mut rng, h, &mut p.enc_dec.b_hh);
    fill_uniform(&mut rng, relu_bound(p.out_hidden.inputs), &mut p.out_hidden.weight);
    fill_uniform(&mut rng, 1.0 / math::sqrt(p.out.inputs as f64), &mut p.out.weight);
    p
}
