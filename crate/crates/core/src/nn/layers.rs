//! Differentiable layers over batched `[B, H, W, C]` tensors.
//!
//! The "transposed" convolutions of the reconstruction network run at
//! stride 1 with symmetric zero padding of `dilation` per side, which keeps
//! the spatial size fixed; at stride 1 this is an ordinary dilated
//! convolution with a flipped kernel, and since the kernels are learned the
//! flip is absorbed into the weights.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::masking::Mask;
use crate::numerics::{RealTensor, Scalar};

/// Execution mode: training uses batch statistics, inference the running
/// statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// 3x3 dilated convolution parameters. Weight layout is
/// `[ky, kx, in_channels, out_channels]` with the output channel fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T> {
    pub weight: RealTensor<T>,
    pub bias: Vec<T>,
    pub in_channels: usize,
    pub out_channels: usize,
    pub dilation: usize,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, dilation: usize) -> Self {
        ConvLayer {
            weight: RealTensor::zeros(&[3, 3, in_channels, out_channels]),
            bias: vec![T::zero(); out_channels],
            in_channels,
            out_channels,
            dilation,
        }
    }

    /// Trainable parameter count, `(3*3*Cin + 1) * Cout`.
    pub fn parameter_count(&self) -> usize {
        (9 * self.in_channels + 1) * self.out_channels
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            weight: self.weight.cast(),
            bias: self.bias.iter().map(|&b| U::from_f64(b.to_f64())).collect(),
            in_channels: self.in_channels,
            out_channels: self.out_channels,
            dilation: self.dilation,
        }
    }
}

fn batch_dims<T: Scalar>(x: &RealTensor<T>) -> Result<(usize, usize, usize, usize)> {
    match x.dims() {
        [b, h, w, c] => Ok((*b, *h, *w, *c)),
        other => Err(Error::DimensionMismatch {
            expected: "[batch, height, width, channels]".into(),
            got: format!("{other:?}"),
        }),
    }
}

/// Forward dilated convolution:
/// `out[h,w,o] = b[o] + sum_{dy,dx,i} x[h+d*dy, w+d*dx, i] * w[dy,dx,i,o]`
/// with `dy, dx` in `{-1, 0, 1}` and zero padding outside the image.
pub fn conv_forward<T: Scalar>(x: &RealTensor<T>, layer: &ConvLayer<T>) -> Result<RealTensor<T>> {
    let (b, h, w, cin) = batch_dims(x)?;
    if cin != layer.in_channels {
        return Err(Error::DimensionMismatch {
            expected: format!("{} input channels", layer.in_channels),
            got: format!("{cin}"),
        });
    }
    if h == 0 || w == 0 {
        return Err(Error::Argument("empty spatial dims".into()));
    }
    let cout = layer.out_channels;
    let d = layer.dilation as isize;
    let mut out = RealTensor::zeros(&[b, h, w, cout]);
    let xd = x.data();
    let wd = layer.weight.data();
    let bias = &layer.bias;

    let sample_out = h * w * cout;
    let sample_in = h * w * cin;
    out.data_mut()
        .par_chunks_mut(sample_out)
        .enumerate()
        .for_each(|(bi, out_s)| {
            let x_s = &xd[bi * sample_in..(bi + 1) * sample_in];
            for hy in 0..h {
                for wx in 0..w {
                    let out_px = &mut out_s[(hy * w + wx) * cout..(hy * w + wx + 1) * cout];
                    out_px.copy_from_slice(bias);
                    for dy in 0..3usize {
                        let ih = hy as isize + d * (dy as isize - 1);
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        for dx in 0..3usize {
                            let iw = wx as isize + d * (dx as isize - 1);
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            let x_px = &x_s[(ih as usize * w + iw as usize) * cin
                                ..(ih as usize * w + iw as usize + 1) * cin];
                            let w_base = (dy * 3 + dx) * cin * cout;
                            for (i, &xv) in x_px.iter().enumerate() {
                                let wrow = &wd[w_base + i * cout..w_base + (i + 1) * cout];
                                for (o, &wv) in out_px.iter_mut().zip(wrow) {
                                    *o += xv * wv;
                                }
                            }
                        }
                    }
                }
            }
        });
    Ok(out)
}

/// Gradients of the convolution. The weight/bias gradients are reduced over
/// the batch in index order so results do not depend on thread scheduling.
pub fn conv_backward<T: Scalar>(
    grad_out: &RealTensor<T>,
    x: &RealTensor<T>,
    layer: &ConvLayer<T>,
) -> Result<(RealTensor<T>, RealTensor<T>, Vec<T>)> {
    let (b, h, w, cin) = batch_dims(x)?;
    let (gb, gh, gw, cout) = batch_dims(grad_out)?;
    if gb != b || gh != h || gw != w || cout != layer.out_channels || cin != layer.in_channels {
        return Err(Error::DimensionMismatch {
            expected: format!("grad [{b}, {h}, {w}, {}]", layer.out_channels),
            got: format!("{:?}", grad_out.dims()),
        });
    }
    let d = layer.dilation as isize;
    let wd = layer.weight.data();
    let xd = x.data();
    let gd = grad_out.data();
    let sample_in = h * w * cin;
    let sample_out = h * w * cout;

    let mut grad_x = RealTensor::zeros(&[b, h, w, cin]);

    // Per-sample weight/bias gradients, then a fixed-order reduction.
    let per_sample: Vec<(Vec<T>, Vec<T>)> = grad_x
        .data_mut()
        .par_chunks_mut(sample_in)
        .enumerate()
        .map(|(bi, gx_s)| {
            let x_s = &xd[bi * sample_in..(bi + 1) * sample_in];
            let g_s = &gd[bi * sample_out..(bi + 1) * sample_out];
            let mut gw_s = vec![T::zero(); 9 * cin * cout];
            let mut gb_s = vec![T::zero(); cout];
            for hy in 0..h {
                for wx in 0..w {
                    let g_px = &g_s[(hy * w + wx) * cout..(hy * w + wx + 1) * cout];
                    for (o, &g) in g_px.iter().enumerate() {
                        gb_s[o] += g;
                    }
                    for dy in 0..3usize {
                        let ih = hy as isize + d * (dy as isize - 1);
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        for dx in 0..3usize {
                            let iw = wx as isize + d * (dx as isize - 1);
                            if iw < 0 || iw >= w as isize {
                                continue;
                            }
                            let in_px = (ih as usize * w + iw as usize) * cin;
                            let w_base = (dy * 3 + dx) * cin * cout;
                            for i in 0..cin {
                                let xv = x_s[in_px + i];
                                let wrow = &wd[w_base + i * cout..w_base + (i + 1) * cout];
                                let gwrow =
                                    &mut gw_s[w_base + i * cout..w_base + (i + 1) * cout];
                                let mut acc = T::zero();
                                for ((&g, &wv), gw) in
                                    g_px.iter().zip(wrow).zip(gwrow.iter_mut())
                                {
                                    acc += g * wv;
                                    *gw += g * xv;
                                }
                                gx_s[in_px + i] += acc;
                            }
                        }
                    }
                }
            }
            (gw_s, gb_s)
        })
        .collect();

    let mut grad_w = RealTensor::zeros(&[3, 3, cin, cout]);
    let mut grad_b = vec![T::zero(); cout];
    for (gw_s, gb_s) in per_sample {
        for (acc, v) in grad_w.data_mut().iter_mut().zip(gw_s) {
            *acc += v;
        }
        for (acc, v) in grad_b.iter_mut().zip(gb_s) {
            *acc += v;
        }
    }
    Ok((grad_x, grad_w, grad_b))
}

/// Per-channel batch normalization parameters and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormLayer<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: f64,
    pub eps: f64,
}

impl<T: Scalar> BatchNormLayer<T> {
    pub fn new(channels: usize) -> Self {
        BatchNormLayer {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: 0.99,
            eps: 1e-5,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Count as reported by the architecture table: gamma, beta and both
    /// running statistics, i.e. `4 * C`.
    pub fn parameter_count(&self) -> usize {
        4 * self.channels()
    }

    pub fn cast<U: Scalar>(&self) -> BatchNormLayer<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::from_f64(x.to_f64())).collect();
        BatchNormLayer {
            gamma: conv(&self.gamma),
            beta: conv(&self.beta),
            running_mean: conv(&self.running_mean),
            running_var: conv(&self.running_var),
            momentum: self.momentum,
            eps: self.eps,
        }
    }
}

/// Values cached by the training-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub x_hat: RealTensor<T>,
    pub inv_std: Vec<T>,
}

/// Batch normalization. In train mode the per-channel mean/variance of the
/// batch are used and the running statistics updated
/// (`running = momentum * running + (1 - momentum) * batch`); in infer mode
/// the running statistics are used and no cache is produced.
pub fn batch_norm_forward<T: Scalar>(
    x: &RealTensor<T>,
    layer: &mut BatchNormLayer<T>,
    mode: Mode,
) -> Result<(RealTensor<T>, Option<BnCache<T>>)> {
    match mode {
        Mode::Infer => Ok((batch_norm_infer(x, layer)?, None)),
        Mode::Train => {
            let (y, cache) = batch_norm_train(x, layer)?;
            Ok((y, Some(cache)))
        }
    }
}

/// Inference-mode batch normalization using the running statistics.
pub fn batch_norm_infer<T: Scalar>(
    x: &RealTensor<T>,
    layer: &BatchNormLayer<T>,
) -> Result<RealTensor<T>> {
    let (b, h, w, c) = batch_dims(x)?;
    if c != layer.channels() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} channels", layer.channels()),
            got: format!("{c}"),
        });
    }
    let mut out = RealTensor::zeros(&[b, h, w, c]);
    let scale: Vec<T> = (0..c)
        .map(|ci| layer.gamma[ci] / (layer.running_var[ci] + T::from_f64(layer.eps)).sqrt())
        .collect();
    for (px_out, px_in) in out
        .data_mut()
        .chunks_exact_mut(c)
        .zip(x.data().chunks_exact(c))
    {
        for ci in 0..c {
            px_out[ci] = (px_in[ci] - layer.running_mean[ci]) * scale[ci] + layer.beta[ci];
        }
    }
    Ok(out)
}

/// Train-mode batch normalization; updates the running statistics and
/// returns the cache for the backward pass.
pub fn batch_norm_train<T: Scalar>(
    x: &RealTensor<T>,
    layer: &mut BatchNormLayer<T>,
) -> Result<(RealTensor<T>, BnCache<T>)> {
    let (b, h, w, c) = batch_dims(x)?;
    if c != layer.channels() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} channels", layer.channels()),
            got: format!("{c}"),
        });
    }
    if b < 2 {
        return Err(Error::Argument(
            "batch normalization needs a batch of at least 2 in train mode".into(),
        ));
    }
    let n = (b * h * w) as f64;
    let mut mean = vec![T::zero(); c];
    for px in x.data().chunks_exact(c) {
        for ci in 0..c {
            mean[ci] += px[ci];
        }
    }
    for m in &mut mean {
        *m = *m * T::from_f64(1.0 / n);
    }
    let mut var = vec![T::zero(); c];
    for px in x.data().chunks_exact(c) {
        for ci in 0..c {
            let dlt = px[ci] - mean[ci];
            var[ci] += dlt * dlt;
        }
    }
    for v in &mut var {
        *v = *v * T::from_f64(1.0 / n);
    }
    let inv_std: Vec<T> = var
        .iter()
        .map(|&v| T::one() / (v + T::from_f64(layer.eps)).sqrt())
        .collect();

    let mut x_hat = RealTensor::zeros(&[b, h, w, c]);
    let mut out = RealTensor::zeros(&[b, h, w, c]);
    for ((px_hat, px_out), px_in) in x_hat
        .data_mut()
        .chunks_exact_mut(c)
        .zip(out.data_mut().chunks_exact_mut(c))
        .zip(x.data().chunks_exact(c))
    {
        for ci in 0..c {
            let xh = (px_in[ci] - mean[ci]) * inv_std[ci];
            px_hat[ci] = xh;
            px_out[ci] = layer.gamma[ci] * xh + layer.beta[ci];
        }
    }

    let mom = T::from_f64(layer.momentum);
    let one_minus = T::from_f64(1.0 - layer.momentum);
    for ci in 0..c {
        layer.running_mean[ci] = mom * layer.running_mean[ci] + one_minus * mean[ci];
        layer.running_var[ci] = mom * layer.running_var[ci] + one_minus * var[ci];
    }
    Ok((out, BnCache { x_hat, inv_std }))
}

/// Backward pass of train-mode batch normalization.
pub fn batch_norm_backward<T: Scalar>(
    grad_out: &RealTensor<T>,
    cache: &BnCache<T>,
    layer: &BatchNormLayer<T>,
) -> Result<(RealTensor<T>, Vec<T>, Vec<T>)> {
    let (b, h, w, c) = batch_dims(grad_out)?;
    let n = (b * h * w) as f64;
    let mut grad_gamma = vec![T::zero(); c];
    let mut grad_beta = vec![T::zero(); c];
    for (px_g, px_hat) in grad_out
        .data()
        .chunks_exact(c)
        .zip(cache.x_hat.data().chunks_exact(c))
    {
        for ci in 0..c {
            grad_gamma[ci] += px_g[ci] * px_hat[ci];
            grad_beta[ci] += px_g[ci];
        }
    }
    let inv_n = T::from_f64(1.0 / n);
    let mut grad_x = RealTensor::zeros(&[b, h, w, c]);
    for ((px_gx, px_g), px_hat) in grad_x
        .data_mut()
        .chunks_exact_mut(c)
        .zip(grad_out.data().chunks_exact(c))
        .zip(cache.x_hat.data().chunks_exact(c))
    {
        for ci in 0..c {
            let term = px_g[ci] - inv_n * grad_beta[ci] - px_hat[ci] * inv_n * grad_gamma[ci];
            px_gx[ci] = layer.gamma[ci] * cache.inv_std[ci] * term;
        }
    }
    Ok((grad_x, grad_gamma, grad_beta))
}

pub fn relu_forward<T: Scalar>(x: &RealTensor<T>) -> RealTensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_backward<T: Scalar>(grad_out: &RealTensor<T>, x: &RealTensor<T>) -> RealTensor<T> {
    let mut grad = grad_out.clone();
    for (g, &xv) in grad.data_mut().iter_mut().zip(x.data()) {
        if xv <= T::zero() {
            *g = T::zero();
        }
    }
    grad
}

/// Residual merge: `out = input_sparse + net_out .* (1 - M)` with the mask
/// broadcast over the re/im planes. Kept positions pass the input through
/// bit-exactly.
pub fn residual_merge<T: Scalar>(
    net_out: &RealTensor<T>,
    input_sparse: &RealTensor<T>,
    mask: &Mask,
) -> Result<RealTensor<T>> {
    if net_out.dims() != input_sparse.dims() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", input_sparse.dims()),
            got: format!("{:?}", net_out.dims()),
        });
    }
    let (b, h, w, c) = batch_dims(net_out)?;
    if h != mask.na() || w != mask.nc() || c != 2 {
        return Err(Error::DimensionMismatch {
            expected: format!("[_, {}, {}, 2]", mask.na(), mask.nc()),
            got: format!("{:?}", net_out.dims()),
        });
    }
    let mut out = input_sparse.clone();
    let od = out.data_mut();
    let nd = net_out.data();
    for bi in 0..b {
        for a in 0..h {
            for ca in 0..w {
                if mask.is_kept(a, ca) {
                    continue;
                }
                let base = ((bi * h + a) * w + ca) * 2;
                od[base] += nd[base];
                od[base + 1] += nd[base + 1];
            }
        }
    }
    Ok(out)
}

/// Gradients of the residual merge with respect to both inputs.
pub fn residual_merge_backward<T: Scalar>(
    grad_out: &RealTensor<T>,
    mask: &Mask,
) -> Result<(RealTensor<T>, RealTensor<T>)> {
    let (b, h, w, _c) = batch_dims(grad_out)?;
    let mut grad_net = grad_out.clone();
    let gd = grad_net.data_mut();
    for bi in 0..b {
        for a in 0..h {
            for ca in 0..w {
                if mask.is_kept(a, ca) {
                    let base = ((bi * h + a) * w + ca) * 2;
                    gd[base] = T::zero();
                    gd[base + 1] = T::zero();
                }
            }
        }
    }
    Ok((grad_net, grad_out.clone()))
}
