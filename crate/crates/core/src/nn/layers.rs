//! Forward and backward kernels for the convolutional and dense layers.

use alloc::vec::Vec;

use super::arch::{conv_output_size, KERNEL};
use super::params::{ConvLayer, Dense};
use crate::tensor::{affine_into, gemm};

pub fn relu_inplace(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Zeroes gradient entries whose ReLU output was clipped.
pub fn relu_backward(output: &[f64], grad: &mut [f64]) {
    for (g, &o) in grad.iter_mut().zip(output) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}

/// Unfolds a CHW image into a `(C * 9) x (oh * ow)` patch matrix (zero
/// padding of one pixel).
fn im2col(input: &[f64], c: usize, h: usize, w: usize, stride: usize, oh: usize, ow: usize, cols: &mut [f64]) {
    let p = oh * ow;
    for ci in 0..c {
        let plane = &input[ci * h * w..(ci + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut cols[((ci * KERNEL + ky) * KERNEL + kx) * p..][..p];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - 1;
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if iy < 0 || iy >= h as isize {
                        dst.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for (ox, d) in dst.iter_mut().enumerate() {
                        let ix = (ox * stride + kx) as isize - 1;
                        *d = if ix < 0 || ix >= w as isize { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch gradients back onto the image.
fn col2im(cols: &[f64], c: usize, h: usize, w: usize, stride: usize, oh: usize, ow: usize, out: &mut [f64]) {
    let p = oh * ow;
    for ci in 0..c {
        let plane = &mut out[ci * h * w..(ci + 1) * h * w];
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[((ci * KERNEL + ky) * KERNEL + kx) * p..][..p];
                for oy in 0..oh {
                    let iy = (oy * stride + ky) as isize - 1;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = (ox * stride + kx) as isize - 1;
                        if ix >= 0 && ix < w as isize {
                            plane[iy as usize * w + ix as usize] += row[oy * ow + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Convolution + bias + ReLU over one square CHW image of side `size`.
/// Returns the activation and its side length.
pub fn conv_forward(layer: &ConvLayer, input: &[f64], size: usize) -> (Vec<f64>, usize) {
    debug_assert_eq!(input.len(), layer.in_channels * size * size);
    let os = conv_output_size(size, layer.stride);
    let p = os * os;
    let mut cols = alloc::vec![0.0; layer.patch_len() * p];
    im2col(input, layer.in_channels, size, size, layer.stride, os, os, &mut cols);
    let mut out = alloc::vec![0.0; layer.out_channels * p];
    for (oc, chunk) in out.chunks_mut(p).enumerate() {
        chunk.fill(layer.bias[oc]);
    }
    gemm(false, false, layer.out_channels, p, layer.patch_len(), 1.0, &layer.weight, &cols, 1.0, &mut out);
    relu_inplace(&mut out);
    (out, os)
}

/// Backward through [`conv_forward`]. `d_output` is the gradient w.r.t. the
/// post-ReLU activation and is masked in place. Weight gradients are
/// accumulated into `grad`; the input gradient is returned when asked for.
pub fn conv_backward(
    layer: &ConvLayer,
    input: &[f64],
    size: usize,
    output: &[f64],
    d_output: &mut [f64],
    grad: &mut ConvLayer,
    want_input_grad: bool,
) -> Option<Vec<f64>> {
    let os = conv_output_size(size, layer.stride);
    let p = os * os;
    relu_backward(output, d_output);
    let mut cols = alloc::vec![0.0; layer.patch_len() * p];
    im2col(input, layer.in_channels, size, size, layer.stride, os, os, &mut cols);
    gemm(false, true, layer.out_channels, layer.patch_len(), p, 1.0, d_output, &cols, 1.0, &mut grad.weight);
    for (oc, chunk) in d_output.chunks(p).enumerate() {
        grad.bias[oc] += chunk.iter().sum::<f64>();
    }
    if !want_input_grad {
        return None;
    }
    // reuse the patch buffer for the patch gradients
    gemm(true, false, layer.patch_len(), p, layer.out_channels, 1.0, &layer.weight, d_output, 0.0, &mut cols);
    let mut d_input = alloc::vec![0.0; layer.in_channels * size * size];
    col2im(&cols, layer.in_channels, size, size, layer.stride, os, os, &mut d_input);
    Some(d_input)
}

/// `x W^T + b` for `rows` stacked inputs.
pub fn dense_forward(layer: &Dense, x: &[f64], rows: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows * layer.inputs);
    let mut y = alloc::vec![0.0; rows * layer.outputs];
    affine_into(x, rows, &layer.weight, &layer.bias, layer.outputs, &mut y);
    y
}

/// Accumulates weight gradients of a dense layer and optionally returns the
/// input gradient.
pub fn dense_backward(layer: &Dense, x: &[f64], rows: usize, dy: &[f64], grad: &mut Dense, want_input_grad: bool) -> Option<Vec<f64>> {
    gemm(true, false, layer.outputs, layer.inputs, rows, 1.0, dy, x, 1.0, &mut grad.weight);
    for r in 0..rows {
        for (b, g) in grad.bias.iter_mut().zip(&dy[r * layer.outputs..(r + 1) * layer.outputs]) {
            *b += g;
        }
    }
    if !want_input_grad {
        return None;
    }
    let mut dx = alloc::vec![0.0; rows * layer.inputs];
    gemm(false, false, rows, layer.inputs, layer.outputs, 1.0, dy, &layer.weight, 0.0, &mut dx);
    Some(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct convolution written out loop by loop.
    fn naive_conv(layer: &ConvLayer, input: &[f64], size: usize) -> Vec<f64> {
        let os = conv_output_size(size, layer.stride);
        let mut out = alloc::vec![0.0; layer.out_channels * os * os];
        for oc in 0..layer.out_channels {
            for oy in 0..os {
                for ox in 0..os {
                    let mut s = layer.bias[oc];
                    for ic in 0..layer.in_channels {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * layer.stride + ky) as isize - 1;
                                let ix = (ox * layer.stride + kx) as isize - 1;
                                if iy >= 0 && ix >= 0 && (iy as usize) < size && (ix as usize) < size {
                                    s += layer.weight[((oc * layer.in_channels + ic) * 3 + ky) * 3 + kx]
                                        * input[(ic * size + iy as usize) * size + ix as usize];
                                }
                            }
                        }
                    }
                    out[(oc * os + oy) * os + ox] = s.max(0.0);
                }
            }
        }
        out
    }

    #[test]
    fn im2col_convolution_matches_direct_loops() {
        for stride in [1, 2] {
            let mut layer = ConvLayer::zeros(2, 3, stride);
            for (i, w) in layer.weight.iter_mut().enumerate() {
                *w = ((i * 7 % 11) as f64 - 5.0) * 0.1;
            }
            layer.bias = alloc::vec![0.1, -0.2, 0.05];
            let size = 6;
            let input: Vec<f64> = (0..2 * size * size).map(|i| ((i * 13 % 17) as f64) / 17.0).collect();
            let (out, os) = conv_forward(&layer, &input, size);
            assert_eq!(os, if stride == 1 { 6 } else { 3 });
            let want = naive_conv(&layer, &input, size);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_identity_passes_input_through() {
        let d = Dense::identity(3);
        assert_eq!(dense_forward(&d, &[1.0, -2.0, 3.0], 1), alloc::vec![1.0, -2.0, 3.0]);
    }
}
