//! Mask learning with a concrete selector layer: temperature-annealed
//! Gumbel-softmax feature selection trained end to end with a small dense
//! reconstruction decoder. After training, the selector's argmax positions
//! are exported as a discrete feedback mask for the main pipeline.
//!
//! Selection operates on the `na x nc` complex entry positions: a selected
//! position contributes both its re and im features, so the exported mask
//! matches the masking module's format exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::masking::Mask;
use crate::nn::{AdamConfig, AdamState};
use crate::numerics::{RealTensor, Scalar};

/// Concrete selector layer: one row of log-selection-weights per output
/// neuron. Parametrized by `log(alpha)` so the alphas stay positive under
/// unconstrained updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcreteSelectorParams<T> {
    /// `[k, d]`, row i holds neuron i's log-alphas.
    pub log_alphas: RealTensor<T>,
    pub temperature: f64,
}

impl<T: Scalar> ConcreteSelectorParams<T> {
    pub fn new(k: usize, d: usize, seed: u64) -> Result<Self> {
        if k == 0 || k >= d {
            return Err(Error::Argument(format!(
                "selector needs 0 < k < d, got k={k}, d={d}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..k * d)
            .map(|_| T::from_f64((rng.gen::<f64>() * 2.0 - 1.0) * 0.01))
            .collect();
        Ok(ConcreteSelectorParams {
            log_alphas: RealTensor::from_vec(&[k, d], data)?,
            temperature: 1.0,
        })
    }

    pub fn k(&self) -> usize {
        self.log_alphas.dims()[0]
    }

    pub fn d(&self) -> usize {
        self.log_alphas.dims()[1]
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.log_alphas.data().iter().map(|v| v.to_f64().exp()).collect()
    }
}

/// Exponential temperature annealing from `t_start` down to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub t_start: f64,
    pub t_end: f64,
    pub epochs: usize,
}

impl AnnealSchedule {
    pub fn temperature(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.t_end;
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        self.t_start * (self.t_end / self.t_start).powf(frac.min(1.0))
    }
}

/// Standard Gumbel draw from a uniform variate: `g = -log(-log u)`.
pub fn gumbel_sample(u: f64) -> Result<f64> {
    if !(0.0 < u && u < 1.0) {
        return Err(Error::Argument(format!("uniform draw {u} outside (0, 1)")));
    }
    Ok(-(-u.ln()).ln())
}

fn draw_gumbel_matrix<T: Scalar>(k: usize, d: usize, rng: &mut ChaCha8Rng) -> RealTensor<T> {
    let mut out = RealTensor::zeros(&[k, d]);
    for v in out.data_mut() {
        let mut u: f64 = rng.gen();
        while u <= 0.0 {
            u = rng.gen();
        }
        *v = T::from_f64(-(-u.ln()).ln());
    }
    out
}

/// Relaxation weights `m^(i) = softmax((log alpha_i + g_i) / T)` and the
/// selector outputs `<m^(i), x>` for one input vector. The Gumbel noise is
/// passed in so the map stays deterministic for gradient checking.
pub fn selector_forward_relaxed<T: Scalar>(
    params: &ConcreteSelectorParams<T>,
    x: &[T],
    gumbel: &RealTensor<T>,
) -> Result<(Vec<T>, RealTensor<T>)> {
    let (k, d) = (params.k(), params.d());
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: format!("input of length {d}"),
            got: format!("{}", x.len()),
        });
    }
    if gumbel.dims() != [k, d] {
        return Err(Error::DimensionMismatch {
            expected: format!("[{k}, {d}] gumbel draws"),
            got: format!("{:?}", gumbel.dims()),
        });
    }
    let inv_t = T::from_f64(1.0 / params.temperature);
    let mut weights = RealTensor::zeros(&[k, d]);
    let mut outputs = vec![T::zero(); k];
    for i in 0..k {
        let row_in = &params.log_alphas.data()[i * d..(i + 1) * d];
        let g_row = &gumbel.data()[i * d..(i + 1) * d];
        let row_out = &mut weights.data_mut()[i * d..(i + 1) * d];
        let mut max_logit = T::from_f64(f64::NEG_INFINITY);
        for j in 0..d {
            let logit = (row_in[j] + g_row[j]) * inv_t;
            row_out[j] = logit;
            max_logit = max_logit.max_val(logit);
        }
        let mut denom = T::zero();
        for v in row_out.iter_mut() {
            let e = T::from_f64((v.to_f64() - max_logit.to_f64()).exp());
            *v = e;
            denom += e;
        }
        let mut acc = T::zero();
        for (j, v) in row_out.iter_mut().enumerate() {
            *v = *v / denom;
            acc += *v * x[j];
        }
        outputs[i] = acc;
    }
    Ok((outputs, weights))
}

/// Hard selection: neuron i reads the input feature with the largest alpha.
pub fn selector_forward_hard<T: Scalar>(
    params: &ConcreteSelectorParams<T>,
    x: &[T],
) -> Result<Vec<T>> {
    if x.len() != params.d() {
        return Err(Error::DimensionMismatch {
            expected: format!("input of length {}", params.d()),
            got: format!("{}", x.len()),
        });
    }
    Ok(selected_positions_raw(params)
        .into_iter()
        .map(|j| x[j])
        .collect())
}

fn selected_positions_raw<T: Scalar>(params: &ConcreteSelectorParams<T>) -> Vec<usize> {
    let (k, d) = (params.k(), params.d());
    (0..k)
        .map(|i| {
            let row = &params.log_alphas.data()[i * d..(i + 1) * d];
            let mut best = 0usize;
            for j in 1..d {
                if row[j] > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Gradient of the selector outputs with respect to the log-alphas, given
/// the upstream output gradients and the cached relaxation weights:
/// `d<m_i, x>/d(log a_ij) = m_ij (x_j - <m_i, x>) / T`.
pub fn selector_backward<T: Scalar>(
    params: &ConcreteSelectorParams<T>,
    x: &[T],
    weights: &RealTensor<T>,
    grad_outputs: &[T],
) -> Result<RealTensor<T>> {
    let (k, d) = (params.k(), params.d());
    if grad_outputs.len() != k {
        return Err(Error::DimensionMismatch {
            expected: format!("{k} output gradients"),
            got: format!("{}", grad_outputs.len()),
        });
    }
    let inv_t = T::from_f64(1.0 / params.temperature);
    let mut grad = RealTensor::zeros(&[k, d]);
    for i in 0..k {
        let m = &weights.data()[i * d..(i + 1) * d];
        let mut mx = T::zero();
        for j in 0..d {
            mx += m[j] * x[j];
        }
        let g_out = grad_outputs[i];
        let g_row = &mut grad.data_mut()[i * d..(i + 1) * d];
        for j in 0..d {
            g_row[j] = g_out * m[j] * (x[j] - mx) * inv_t;
        }
    }
    Ok(grad)
}

/// Settings for the mask-learning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeConfig {
    /// Number of selected positions; the exported mask has exactly this
    /// many ones.
    pub k: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for CaeConfig {
    fn default() -> Self {
        CaeConfig {
            k: 32,
            epochs: 60,
            batch_size: 32,
            t_start: 10.0,
            t_end: 0.01,
            learning_rate: 1e-2,
            seed: 5,
        }
    }
}

/// Result of a mask-learning run.
#[derive(Debug, Clone)]
pub struct CaeRun {
    pub mask: Mask,
    pub selector: ConcreteSelectorParams<f64>,
    /// Mean reconstruction loss per epoch.
    pub loss_curve: Vec<(usize, f64)>,
    /// Mean max relaxation weight per epoch (sharpening diagnostic).
    pub sharpness_curve: Vec<f64>,
}

struct Dense {
    w: Vec<f64>, // [out, in] row-major
    b: Vec<f64>,
    n_in: usize,
    n_out: usize,
}

impl Dense {
    fn new(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Dense {
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        Dense {
            w: (0..n_in * n_out)
                .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * bound)
                .collect(),
            b: vec![0.0; n_out],
            n_in,
            n_out,
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        for o in 0..self.n_out {
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = 0.0;
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            y[o] += acc;
        }
        y
    }

    /// Returns grad wrt x; accumulates grads into `gw`, `gb`.
    fn backward(&self, x: &[f64], gy: &[f64], gw: &mut [f64], gb: &mut [f64]) -> Vec<f64> {
        let mut gx = vec![0.0; self.n_in];
        for o in 0..self.n_out {
            let g = gy[o];
            gb[o] += g;
            let row = &self.w[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut gw[o * self.n_in..(o + 1) * self.n_in];
            for j in 0..self.n_in {
                grow[j] += g * x[j];
                gx[j] += g * row[j];
            }
        }
        gx
    }
}

/// Train the concrete autoencoder on uplink channel tensors and export the
/// learned mask. The decoder is a single-hidden-layer dense reconstruction
/// (width `4k`); the recovery network itself is trained separately on the
/// exported mask.
pub fn train_cae(samples: &[RealTensor<f32>], na: usize, nc: usize, config: &CaeConfig) -> Result<CaeRun> {
    if samples.is_empty() {
        return Err(Error::Data("mask optimization needs training samples".into()));
    }
    let d = na * nc;
    if config.k == 0 || config.k >= d {
        return Err(Error::Argument(format!(
            "selected count k={} must be in 1..{d}",
            config.k
        )));
    }
    for s in samples {
        if s.dims() != [na, nc, 2] {
            return Err(Error::DimensionMismatch {
                expected: format!("[{na}, {nc}, 2] tensors"),
                got: format!("{:?}", s.dims()),
            });
        }
    }

    // Split each sample into its re and im position-planes.
    let planes: Vec<(Vec<f64>, Vec<f64>)> = samples
        .iter()
        .map(|s| {
            let mut re = Vec::with_capacity(d);
            let mut im = Vec::with_capacity(d);
            for px in s.data().chunks_exact(2) {
                re.push(px[0] as f64);
                im.push(px[1] as f64);
            }
            (re, im)
        })
        .collect();

    let k = config.k;
    let hidden = 4 * k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut selector = ConcreteSelectorParams::<f64>::new(k, d, config.seed ^ 0x5eed)?;
    let mut dense1 = Dense::new(2 * k, hidden, &mut rng);
    let mut dense2 = Dense::new(hidden, 2 * d, &mut rng);
    let mut adam = AdamState::new(AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    });
    let schedule = AnnealSchedule {
        t_start: config.t_start,
        t_end: config.t_end,
        epochs: config.epochs,
    };

    let n = planes.len();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut sharpness_curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        selector.temperature = schedule.temperature(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        {
            use rand::seq::SliceRandom;
            let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
            shuffle_rng.set_stream(epoch as u64 + 1);
            order.shuffle(&mut shuffle_rng);
        }
        let mut epoch_loss = 0.0f64;
        let mut epoch_sharpness = 0.0f64;
        let mut n_batches = 0usize;
        let mut i = 0usize;
        while i < n {
            let j = (i + config.batch_size).min(n);
            let batch = &order[i..j];
            let b = batch.len() as f64;
            let gumbel: RealTensor<f64> = draw_gumbel_matrix(k, d, &mut rng);

            let mut g_logalpha = vec![0.0f64; k * d];
            let mut g_w1 = vec![0.0f64; dense1.w.len()];
            let mut g_b1 = vec![0.0f64; dense1.b.len()];
            let mut g_w2 = vec![0.0f64; dense2.w.len()];
            let mut g_b2 = vec![0.0f64; dense2.b.len()];
            let mut batch_loss = 0.0f64;
            let mut batch_sharpness = 0.0f64;

            for &idx in batch {
                let (re, im) = &planes[idx];
                let (out_re, w_re) = selector_forward_relaxed(&selector, re, &gumbel)?;
                let (out_im, w_im) = selector_forward_relaxed(&selector, im, &gumbel)?;
                // Same relaxation weights: both planes share the selector.
                debug_assert_eq!(w_re.data().len(), w_im.data().len());

                let z: Vec<f64> = out_re.iter().chain(out_im.iter()).copied().collect();
                let h_pre = dense1.forward(&z);
                let h: Vec<f64> = h_pre.iter().map(|&v| v.max(0.0)).collect();
                let x_hat = dense2.forward(&h);

                let mut g_xhat = vec![0.0f64; 2 * d];
                for j2 in 0..d {
                    let dr = x_hat[j2] - re[j2];
                    let di = x_hat[d + j2] - im[j2];
                    batch_loss += dr * dr + di * di;
                    g_xhat[j2] = 2.0 * dr / b;
                    g_xhat[d + j2] = 2.0 * di / b;
                }

                let g_h = dense2.backward(&h, &g_xhat, &mut g_w2, &mut g_b2);
                let g_hpre: Vec<f64> = g_h
                    .iter()
                    .zip(&h_pre)
                    .map(|(&g, &v)| if v > 0.0 { g } else { 0.0 })
                    .collect();
                let g_z = dense1.backward(&z, &g_hpre, &mut g_w1, &mut g_b1);

                let g_re = selector_backward(&selector, re, &w_re, &g_z[..k])?;
                let g_im = selector_backward(&selector, im, &w_im, &g_z[k..])?;
                for ((acc, a), b2) in g_logalpha
                    .iter_mut()
                    .zip(g_re.data())
                    .zip(g_im.data())
                {
                    *acc += a + b2;
                }

                // Sharpening diagnostic: mean max relaxation weight.
                for irow in 0..k {
                    let row = &w_re.data()[irow * d..(irow + 1) * d];
                    batch_sharpness += row.iter().copied().fold(0.0f64, f64::max);
                }
            }

            adam.step(
                vec![
                    selector.log_alphas.data_mut(),
                    dense1.w.as_mut_slice(),
                    dense1.b.as_mut_slice(),
                    dense2.w.as_mut_slice(),
                    dense2.b.as_mut_slice(),
                ],
                &[g_logalpha, g_w1, g_b1, g_w2, g_b2],
            )?;

            epoch_loss += batch_loss / b;
            epoch_sharpness += batch_sharpness / (b * k as f64);
            n_batches += 1;
            i = j;
        }
        loss_curve.push((epoch, epoch_loss / n_batches as f64));
        sharpness_curve.push(epoch_sharpness / n_batches as f64);
    }

    let mask = export_mask(&selector, na, nc)?;
    Ok(CaeRun {
        mask,
        selector,
        loss_curve,
        sharpness_curve,
    })
}

/// Export the discrete mask: each neuron selects its argmax alpha; a
/// duplicate falls back to that neuron's next-highest alpha not yet taken.
pub fn export_mask(
    selector: &ConcreteSelectorParams<f64>,
    na: usize,
    nc: usize,
) -> Result<Mask> {
    let (k, d) = (selector.k(), selector.d());
    if d != na * nc {
        return Err(Error::DimensionMismatch {
            expected: format!("{} positions", na * nc),
            got: format!("{d}"),
        });
    }
    let mut taken = vec![false; d];
    for i in 0..k {
        let row = &selector.log_alphas.data()[i * d..(i + 1) * d];
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        let slot = order.iter().find(|&&j| !taken[j]).copied().ok_or_else(|| {
            Error::Optimization("could not resolve duplicate selections".into())
        })?;
        taken[slot] = true;
    }
    let pattern: Vec<bool> = (0..na * nc)
        .map(|flat| taken[flat])
        .collect();
    Mask::from_pattern(na, nc, pattern)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gumbel_hand_values() {
        assert!((gumbel_sample(1.0 / std::f64::consts::E).unwrap()).abs() < 1e-12);
        let u = (-std::f64::consts::E).exp();
        assert!((gumbel_sample(u).unwrap() + 1.0).abs() < 1e-12);
        assert!((gumbel_sample(0.5).unwrap() - 0.36651).abs() < 1e-4);
        assert!(gumbel_sample(0.0).is_err());
        assert!(gumbel_sample(1.0).is_err());
    }

    #[test]
    fn relaxation_weights_are_probabilities() {
        let params = ConcreteSelectorParams::<f64>::new(2, 5, 3).unwrap();
        let x = vec![0.5, -1.0, 2.0, 0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let gumbel = draw_gumbel_matrix(2, 5, &mut rng);
        let (_, weights) = selector_forward_relaxed(&params, &x, &gumbel).unwrap();
        for i in 0..2 {
            let row = &weights.data()[i * 5..(i + 1) * 5];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn hand_softmax_case() {
        // alpha = (1, 2, 4), g = 0, T = 1: m = (1/7, 2/7, 4/7).
        let mut params = ConcreteSelectorParams::<f64>::new(1, 3, 0).unwrap();
        params.temperature = 1.0;
        let la = params.log_alphas.data_mut();
        la[0] = 1.0f64.ln();
        la[1] = 2.0f64.ln();
        la[2] = 4.0f64.ln();
        let gumbel = RealTensor::zeros(&[1, 3]);
        let x = vec![1.0, 0.0, 0.0];
        let (_, weights) = selector_forward_relaxed(&params, &x, &gumbel).unwrap();
        assert!((weights.data()[0] - 1.0 / 7.0).abs() < 1e-12);
        assert!((weights.data()[1] - 2.0 / 7.0).abs() < 1e-12);
        assert!((weights.data()[2] - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn low_temperature_approaches_one_hot() {
        let mut params = ConcreteSelectorParams::<f64>::new(1, 4, 0).unwrap();
        params.temperature = 1e-3;
        let la = params.log_alphas.data_mut();
        la.copy_from_slice(&[0.1, 0.9, 0.3, 0.2]);
        let gumbel = RealTensor::zeros(&[1, 4]);
        let x = vec![5.0, 7.0, -1.0, 0.0];
        let (out, weights) = selector_forward_relaxed(&params, &x, &gumbel).unwrap();
        assert!(weights.data()[1] > 0.999);
        assert!((out[0] - 7.0).abs() < 1e-2);
        // Hard mode selects the argmax exactly.
        let hard = selector_forward_hard(&params, &x).unwrap();
        assert_eq!(hard, vec![7.0]);
    }

    #[test]
    fn selector_gradient_matches_finite_differences() {
        let mut params = ConcreteSelectorParams::<f64>::new(2, 4, 9).unwrap();
        params.temperature = 0.7;
        let x = vec![0.3, -0.8, 1.2, 0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let gumbel = draw_gumbel_matrix(2, 4, &mut rng);
        let grad_out = vec![1.0, -0.5];

        let (_, weights) = selector_forward_relaxed(&params, &x, &gumbel).unwrap();
        let analytic = selector_backward(&params, &x, &weights, &grad_out).unwrap();

        let eps = 1e-6;
        for idx in 0..8 {
            let mut plus = params.clone();
            plus.log_alphas.data_mut()[idx] += eps;
            let (out_p, _) = selector_forward_relaxed(&plus, &x, &gumbel).unwrap();
            let mut minus = params.clone();
            minus.log_alphas.data_mut()[idx] -= eps;
            let (out_m, _) = selector_forward_relaxed(&minus, &x, &gumbel).unwrap();
            let fd: f64 = grad_out
                .iter()
                .enumerate()
                .map(|(i, &g)| g * (out_p[i] - out_m[i]) / (2.0 * eps))
                .sum();
            let an = analytic.data()[idx];
            assert!(
                (fd - an).abs() < 1e-6 * fd.abs().max(1.0),
                "idx {idx}: fd {fd} vs analytic {an}"
            );
        }
    }

    #[test]
    fn export_mask_resolves_duplicates() {
        let mut selector = ConcreteSelectorParams::<f64>::new(2, 4, 0).unwrap();
        // Both neurons prefer position 2; the second must fall back.
        let la = selector.log_alphas.data_mut();
        la.copy_from_slice(&[0.0, 0.0, 5.0, 1.0, 0.0, 0.0, 5.0, 2.0]);
        let mask = export_mask(&selector, 2, 2).unwrap();
        assert_eq!(mask.ones_count(), 2);
        assert!(mask.is_kept(1, 0)); // flat position 2
        assert!(mask.is_kept(1, 1)); // flat position 3, the fallback
    }

    #[test]
    fn cae_recovers_planted_support() {
        // Energy confined to a known subset of positions; the learned mask
        // must land inside it.
        let na = 4;
        let nc = 8;
        let d = na * nc;
        let k = 4;
        let support = [3usize, 9, 17, 26];
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let samples: Vec<RealTensor<f32>> = (0..256)
            .map(|_| {
                let mut t = RealTensor::<f32>::zeros(&[na, nc, 2]);
                for &pos in &support {
                    let v = rng.gen::<f32>() * 2.0 - 1.0;
                    let w = rng.gen::<f32>() * 2.0 - 1.0;
                    t.data_mut()[2 * pos] = v;
                    t.data_mut()[2 * pos + 1] = w;
                }
                t
            })
            .collect();
        let config = CaeConfig {
            k,
            epochs: 40,
            batch_size: 32,
            learning_rate: 0.05,
            seed: 1,
            ..CaeConfig::default()
        };
        let run = train_cae(&samples, na, nc, &config).unwrap();
        assert_eq!(run.mask.ones_count(), k);
        let mut hits = 0;
        for &pos in &support {
            if run.mask.is_kept(pos / nc, pos % nc) {
                hits += 1;
            }
        }
        assert!(hits >= 3, "only {hits}/4 planted positions recovered");
        let _ = d;
    }

    #[test]
    fn cae_sharpens_over_training() {
        let na = 2;
        let nc = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<RealTensor<f32>> = (0..64)
            .map(|_| {
                let data = (0..na * nc * 2).map(|_| rng.gen::<f32>() - 0.5).collect();
                RealTensor::from_vec(&[na, nc, 2], data).unwrap()
            })
            .collect();
        let config = CaeConfig {
            k: 2,
            epochs: 30,
            batch_size: 16,
            ..CaeConfig::default()
        };
        let run = train_cae(&samples, na, nc, &config).unwrap();
        let head: f64 = run.sharpness_curve[..5].iter().sum::<f64>() / 5.0;
        let tail: f64 =
            run.sharpness_curve[run.sharpness_curve.len() - 5..].iter().sum::<f64>() / 5.0;
        assert!(tail > head, "no sharpening: head {head}, tail {tail}");
    }

    #[test]
    fn anneal_schedule_endpoints() {
        let s = AnnealSchedule {
            t_start: 10.0,
            t_end: 0.01,
            epochs: 50,
        };
        assert!((s.temperature(0) - 10.0).abs() < 1e-12);
        assert!((s.temperature(49) - 0.01).abs() < 1e-12);
        assert!(s.temperature(25) < 10.0);
        assert!(s.temperature(25) > 0.01);
    }
}
