//! Uplink-only supervised training of the reconstruction network, and the
//! downlink recovery path that applies the trained network unchanged.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::masking::{apply_mask, Mask};
use crate::nn::{
    apply_adam, backward_batch, forward, forward_infer_batch, forward_train_batch, scatter_batch,
    AdamConfig, AdamState, ModelParams,
};
use crate::numerics::RealTensor;

/// Training-loop settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Early stopping: stop after this many epochs without the validation
    /// loss improving by at least `min_delta`.
    pub patience: usize,
    pub min_delta: f64,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            batches_per_epoch: 300,
            max_epochs: 40,
            seed: 7,
            patience: 10,
            min_delta: 1e-5,
            learning_rate: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.batches_per_epoch == 0 || self.max_epochs == 0 {
            return Err(Error::Configuration(
                "batch_size, batches_per_epoch and max_epochs must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the loss curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Result of a training run: the best-validation parameters and the curve.
#[derive(Debug, Clone)]
pub struct TrainingRun {
    pub model: ModelParams<f32>,
    pub curve: Vec<EpochLoss>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

fn require_uplink(samples: &[&ChannelSample], what: &str) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Data(format!("{what} dataset is empty")));
    }
    if let Some(s) = samples.iter().find(|s| !s.is_uplink()) {
        return Err(Error::Data(format!(
            "{what} dataset must contain only uplink samples, found tag '{}'",
            s.scenario_tag
        )));
    }
    Ok(())
}

/// Mean over the batch of the squared Frobenius error between the
/// reconstruction and the true channel tensor.
pub fn loss(model: &ModelParams<f32>, batch: &[&ChannelSample], mask: &Mask) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let mut total = 0.0f64;
    for sample in batch {
        let target = sample.to_real_tensor();
        let fb = apply_mask(&target, mask)?;
        let recon = forward(model, &fb, mask)?;
        let mut err = 0.0f64;
        for (r, t) in recon.data().iter().zip(target.data()) {
            let d = (*r - *t) as f64;
            err += d * d;
        }
        total += err;
    }
    let value = total / batch.len() as f64;
    if !value.is_finite() {
        return Err(Error::Divergence {
            epoch: 0,
            batch: 0,
            detail: "non-finite loss".into(),
        });
    }
    Ok(value)
}

struct PreparedSet {
    targets: Vec<RealTensor<f32>>,
    feedbacks: Vec<crate::masking::FeedbackVector<f32>>,
}

fn prepare(samples: &[&ChannelSample], mask: &Mask) -> Result<PreparedSet> {
    let mut targets = Vec::with_capacity(samples.len());
    let mut feedbacks = Vec::with_capacity(samples.len());
    for s in samples {
        let t = s.to_real_tensor();
        feedbacks.push(apply_mask(&t, mask)?);
        targets.push(t);
    }
    Ok(PreparedSet { targets, feedbacks })
}

fn batched_loss(
    model: &ModelParams<f32>,
    set: &PreparedSet,
    mask: &Mask,
    chunk: usize,
) -> Result<f64> {
    let mut total = 0.0f64;
    let n = set.targets.len();
    let mut i = 0;
    while i < n {
        let j = (i + chunk).min(n);
        let fbs: Vec<_> = set.feedbacks[i..j].to_vec();
        let x0 = scatter_batch(&fbs, mask)?;
        let out_batch = forward_infer_batch(model, &x0, mask)?;
        let plane = mask.na() * mask.nc() * 2;
        for (bi, target) in set.targets[i..j].iter().enumerate() {
            let out = &out_batch.data()[bi * plane..(bi + 1) * plane];
            for (r, t) in out.iter().zip(target.data()) {
                let d = (*r - *t) as f64;
                total += d * d;
            }
        }
        i = j;
    }
    Ok(total / n as f64)
}

/// Train on uplink samples only. The validation set is used exclusively to
/// compute the validation loss; the parameters with the best validation
/// loss are retained.
pub fn train(
    mut model: ModelParams<f32>,
    train_set: &[&ChannelSample],
    val_set: &[&ChannelSample],
    mask: &Mask,
    config: &TrainConfig,
) -> Result<TrainingRun> {
    config.validate()?;
    require_uplink(train_set, "training")?;
    require_uplink(val_set, "validation")?;

    let train_data = prepare(train_set, mask)?;
    let val_data = prepare(val_set, mask)?;

    let mut adam = AdamState::new(AdamConfig {
        lr: config.learning_rate,
        ..AdamConfig::default()
    });

    let mut curve = Vec::with_capacity(config.max_epochs);
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut best_model = model.clone();
    let mut epochs_since_improvement = 0usize;

    let n = train_data.targets.len();
    let plane = mask.na() * mask.nc() * 2;

    for epoch in 0..config.max_epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0f64;
        for batch_idx in 0..config.batches_per_epoch {
            // Cycle through the shuffled order when the epoch asks for more
            // samples than the dataset holds.
            let indices: Vec<usize> = (0..config.batch_size)
                .map(|k| order[(batch_idx * config.batch_size + k) % n])
                .collect();
            let fbs: Vec<_> = indices
                .iter()
                .map(|&i| train_data.feedbacks[i].clone())
                .collect();
            let x0 = scatter_batch(&fbs, mask)?;
            let trace = forward_train_batch(&mut model, x0, mask)?;

            let b = indices.len();
            let mut grad = RealTensor::<f32>::zeros(trace.output.dims());
            let scale = 2.0f32 / b as f32;
            let mut batch_loss_acc = 0.0f64;
            for (bi, &sample_idx) in indices.iter().enumerate() {
                let target = &train_data.targets[sample_idx];
                let out = &trace.output.data()[bi * plane..(bi + 1) * plane];
                let gslice = &mut grad.data_mut()[bi * plane..(bi + 1) * plane];
                for ((g, r), t) in gslice.iter_mut().zip(out).zip(target.data()) {
                    let d = *r - *t;
                    *g = scale * d;
                    batch_loss_acc += (d as f64) * (d as f64);
                }
            }
            let batch_loss = batch_loss_acc / b as f64;
            if !batch_loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx,
                    detail: format!("loss became {batch_loss}"),
                });
            }
            epoch_loss += batch_loss;

            let grads = backward_batch(&model, &trace, &grad, mask)?;
            apply_adam(&mut model, &grads, &mut adam).map_err(|e| match e {
                Error::Divergence { detail, .. } => Error::Divergence {
                    epoch,
                    batch: batch_idx,
                    detail,
                },
                other => other,
            })?;
        }
        let train_loss = epoch_loss / config.batches_per_epoch as f64;
        let val_loss = batched_loss(&model, &val_data, mask, config.batch_size.max(1))?;
        curve.push(EpochLoss {
            epoch,
            train_loss,
            val_loss,
        });

        if val_loss < best_val - config.min_delta {
            best_val = val_loss;
            best_epoch = epoch;
            best_model = model.clone();
            epochs_since_improvement = 0;
        } else {
            if val_loss < best_val {
                // Still keep the strictly better parameters even when the
                // improvement is below the plateau threshold.
                best_val = val_loss;
                best_epoch = epoch;
                best_model = model.clone();
            }
            epochs_since_improvement += 1;
            if epochs_since_improvement >= config.patience {
                break;
            }
        }
    }

    Ok(TrainingRun {
        model: best_model,
        curve,
        best_epoch,
        best_val_loss: best_val,
    })
}

/// Downlink recovery: mask the true DL matrix (simulating the terminal's
/// feedback), run the uplink-trained network in inference mode, and return
/// the complex reconstruction. No parameter adaptation happens here.
pub fn recover_dl(
    model: &ModelParams<f32>,
    dl_true: &ChannelSample,
    mask: &Mask,
) -> Result<ChannelSample> {
    let tensor = dl_true.to_real_tensor();
    let fb = apply_mask(&tensor, mask)?;
    let recon = forward(model, &fb, mask)?;
    Ok(ChannelSample {
        matrix: ChannelSample::matrix_from_tensor(&recon)?,
        path_gain_db: dl_true.path_gain_db,
        scenario_tag: dl_true.scenario_tag.clone(),
        location_id: dl_true.location_id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_dataset, ScenarioConfig};
    use crate::masking::uniform_mask;
    use crate::nn::Architecture;

    fn tiny_setup() -> (ScenarioConfig, Mask, ModelParams<f32>) {
        let mut c = ScenarioConfig::desk_default();
        c.n_antennas_y = 2;
        c.n_antennas_z = 2;
        c.n_carriers = 8;
        c.n_paths = 4;
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let arch = Architecture {
            hidden_channels: vec![4, 4],
            dilations: vec![2, 1],
        };
        let model = ModelParams::<f32>::new(&arch, 1).unwrap();
        (c, mask, model)
    }

    #[test]
    fn loss_zero_when_reconstruction_exact() {
        // A full mask makes the residual passthrough exact everywhere.
        let mask = crate::masking::Mask::from_pattern(2, 2, vec![true; 4]).unwrap();
        let arch = Architecture {
            hidden_channels: vec![4],
            dilations: vec![1],
        };
        let model = ModelParams::<f32>::new(&arch, 2).unwrap();
        let c = {
            let mut c = ScenarioConfig::desk_default();
            c.n_antennas_y = 2;
            c.n_antennas_z = 1;
            c.n_carriers = 2;
            c
        };
        let data = generate_dataset(&c, 3, (0.4, 0.3, 0.3)).unwrap();
        let ul = &data.train[0].ul;
        let value = loss(&model, &[ul], &mask).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn loss_counts_unobserved_energy_for_zero_network() {
        // With all-zero weights the network output is zero, so the loss is
        // exactly the energy of the unobserved entries.
        let (c, mask, mut model) = tiny_setup();
        for layer in &mut model.layers {
            if let crate::nn::Layer::Conv(conv) = layer {
                for w in conv.weight.data_mut() {
                    *w = 0.0;
                }
            }
        }
        let data = generate_dataset(&c, 3, (0.4, 0.3, 0.3)).unwrap();
        let ul = &data.train[0].ul;
        let tensor = ul.to_real_tensor();
        let mut unobserved_energy = 0.0f64;
        for a in 0..4 {
            for cc in 0..8 {
                if !mask.is_kept(a, cc) {
                    unobserved_energy += (tensor.get3(a, cc, 0) as f64).powi(2)
                        + (tensor.get3(a, cc, 1) as f64).powi(2);
                }
            }
        }
        let value = loss(&model, &[ul], &mask).unwrap();
        assert!(
            (value - unobserved_energy).abs() < 1e-6 * unobserved_energy.max(1.0),
            "loss {value} vs energy {unobserved_energy}"
        );
    }

    #[test]
    fn loss_invariant_to_batch_order() {
        let (c, mask, model) = tiny_setup();
        let data = generate_dataset(&c, 4, (0.5, 0.25, 0.25)).unwrap();
        let a = &data.train[0].ul;
        let b = &data.train[1].ul;
        let l1 = loss(&model, &[a, b], &mask).unwrap();
        let l2 = loss(&model, &[b, a], &mask).unwrap();
        assert_eq!(l1, l2);
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let (c, mask, model) = tiny_setup();
        let data = generate_dataset(&c, 6, (0.5, 0.25, 0.25)).unwrap();
        let train_refs: Vec<&ChannelSample> = data.train.iter().map(|p| &p.ul).collect();
        let val_refs: Vec<&ChannelSample> = data.val.iter().map(|p| &p.ul).collect();
        let before = model.clone();
        let config = TrainConfig {
            batch_size: 2,
            batches_per_epoch: 2,
            max_epochs: 1,
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        let run = train(model, &train_refs, &val_refs, &mask, &config).unwrap();
        // Trainable parameters unchanged under lr = 0 (running statistics of
        // the batch norms may move; compare convs and gamma/beta only).
        for (la, lb) in run.model.layers.iter().zip(before.layers.iter()) {
            match (la, lb) {
                (crate::nn::Layer::Conv(a), crate::nn::Layer::Conv(b)) => {
                    assert_eq!(a.weight.data(), b.weight.data());
                    assert_eq!(a.bias, b.bias);
                }
                (crate::nn::Layer::Norm(a), crate::nn::Layer::Norm(b)) => {
                    assert_eq!(a.gamma, b.gamma);
                    assert_eq!(a.beta, b.beta);
                }
                _ => {}
            }
        }
    }

    #[test]
    fn training_improves_validation_loss() {
        let (c, mask, model) = tiny_setup();
        let data = generate_dataset(&c, 80, (0.8, 0.1, 0.1)).unwrap();
        let train_refs: Vec<&ChannelSample> = data.train.iter().map(|p| &p.ul).collect();
        let val_refs: Vec<&ChannelSample> = data.val.iter().map(|p| &p.ul).collect();
        let config = TrainConfig {
            batch_size: 8,
            batches_per_epoch: 8,
            max_epochs: 12,
            patience: 12,
            ..TrainConfig::default()
        };
        let run = train(model, &train_refs, &val_refs, &mask, &config).unwrap();
        let first = run.curve.first().unwrap().val_loss;
        assert!(run.best_val_loss < first, "no improvement: {:?}", run.curve);
        // Retained checkpoint is at least as good as the final epoch.
        let last = run.curve.last().unwrap().val_loss;
        assert!(run.best_val_loss <= last + 1e-12);
    }

    #[test]
    fn train_rejects_downlink_samples() {
        let (c, mask, model) = tiny_setup();
        let data = generate_dataset(&c, 6, (0.5, 0.25, 0.25)).unwrap();
        let mixed: Vec<&ChannelSample> = data.train.iter().map(|p| &p.dl).collect();
        let val_refs: Vec<&ChannelSample> = data.val.iter().map(|p| &p.ul).collect();
        let res = train(model, &mixed, &val_refs, &mask, &TrainConfig::default());
        assert!(matches!(res, Err(Error::Data(_))));
    }

    #[test]
    fn recover_dl_preserves_observed_entries() {
        let (c, mask, model) = tiny_setup();
        let data = generate_dataset(&c, 4, (0.5, 0.25, 0.25)).unwrap();
        let dl = &data.test[0].dl;
        let recon = recover_dl(&model, dl, &mask).unwrap();
        for (a, cc) in mask.kept_positions() {
            let orig = dl.matrix[(a, cc)];
            let got = recon.matrix[(a, cc)];
            // Entries were quantized to f32 at generation, so the
            // passthrough is exact.
            assert_eq!(orig.re as f32, got.re as f32);
            assert_eq!(orig.im as f32, got.im as f32);
        }
        // Deterministic inference.
        let again = recover_dl(&model, dl, &mask).unwrap();
        assert_eq!(recon.matrix, again.matrix);
    }
}
