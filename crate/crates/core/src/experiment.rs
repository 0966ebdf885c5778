//! Experiment stages tying the modules into the full pipeline: dataset
//! generation, uplink training, downlink evaluation against the
//! interpolation baseline, multi-user rate curves, the MMD test battery,
//! and mask optimization.
//!
//! All stages derive their data deterministically from the configuration,
//! so a run is reproducible bit for bit from the manifest it writes.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{generate_dataset, generate_pair, Band, ChannelSample, ScenarioConfig};
use crate::error::{Error, Result};
use crate::io::{
    load_checkpoint, load_mask, read_dataset, save_checkpoint, save_mask, write_cae_curve,
    write_dataset, write_loss_curve, write_metrics, write_mmd_report, write_rate_rows, Checkpoint,
    ExperimentConfig, MaskSource, RateRow,
};
use crate::masking::{random_mask, uniform_mask, Mask};
use crate::maskopt::{train_cae, CaeConfig};
use crate::metrics::{cosine_similarity, linear_interp_recover, nmse, MetricsReport};
use crate::mmd::{mmd2_unbiased, median_bandwidth, tpr_battery, SampleSet, TprBatteryReport};
use crate::nn::{Architecture, ModelParams};
use crate::numerics::median;
use crate::precoding::{evaluate_rate, MultiUserChannel};
use crate::training::{recover_dl, train, TrainingRun};

pub const MANIFEST_NAME: &str = "manifest.toml";

fn ensure_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_manifest(config: &ExperimentConfig, out: &Path) -> Result<()> {
    config.save(&out.join(MANIFEST_NAME))
}

/// Build the mask described by the configuration.
pub fn build_mask(config: &ExperimentConfig, out: &Path) -> Result<Mask> {
    let na = config.scenario.n_antennas();
    let nc = config.scenario.n_carriers;
    match config.mask.source {
        MaskSource::Uniform => uniform_mask(na, nc, config.mask.eta),
        MaskSource::Random => {
            let ones = (config.mask.eta * (na * nc) as f64).round() as usize;
            random_mask(na, nc, ones, config.mask.seed)
        }
        MaskSource::Cae => {
            let path = if config.mask.file.is_empty() {
                out.join("mask_cae.bin")
            } else {
                PathBuf::from(&config.mask.file)
            };
            if !path.exists() {
                return Err(Error::Configuration(format!(
                    "CAE mask {} not found; run the maskopt stage first",
                    path.display()
                )));
            }
            load_mask(&path)
        }
        MaskSource::File => load_mask(Path::new(&config.mask.file)),
    }
}

fn checkpoint_path(config: &ExperimentConfig, out: &Path) -> PathBuf {
    if config.model.checkpoint.is_empty() {
        out.join("checkpoint.bin")
    } else {
        PathBuf::from(&config.model.checkpoint)
    }
}

/// Generate the paired datasets and persist them: UL train/val/test plus a
/// DL test set per configured gap.
pub fn run_generate(config: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    ensure_out(out)?;
    let mut written = Vec::new();

    let base = generate_dataset(
        &config.scenario,
        config.dataset.n_samples,
        config.dataset.split,
    )?;
    let splits: [(&str, Vec<&ChannelSample>); 3] = [
        ("ul_train.bin", base.train.iter().map(|p| &p.ul).collect()),
        ("ul_val.bin", base.val.iter().map(|p| &p.ul).collect()),
        ("ul_test.bin", base.test.iter().map(|p| &p.ul).collect()),
    ];
    for (name, samples) in splits {
        let path = out.join(name);
        write_dataset(&path, &samples)?;
        written.push(path);
    }
    for &gap in &config.evaluation.gaps_mhz {
        let scenario = config.scenario_with_gap(gap);
        let data = generate_dataset(&scenario, config.dataset.n_samples, config.dataset.split)?;
        let dl: Vec<&ChannelSample> = data.test.iter().map(|p| &p.dl).collect();
        let path = out.join(format!("dl_test_gap{gap}.bin"));
        write_dataset(&path, &dl)?;
        written.push(path);
    }
    write_manifest(config, out)?;
    Ok(written)
}

/// Train the network on uplink data only and write the checkpoint and loss
/// curve.
pub fn run_train(config: &ExperimentConfig, out: &Path) -> Result<TrainingRun> {
    ensure_out(out)?;
    let mask = build_mask(config, out)?;
    let data = generate_dataset(
        &config.scenario,
        config.dataset.n_samples,
        config.dataset.split,
    )?;
    let arch = Architecture {
        hidden_channels: config.model.hidden_channels.clone(),
        dilations: config.model.dilations.clone(),
    };
    let model = ModelParams::<f32>::new(&arch, config.model.init_seed)?;
    let train_refs: Vec<&ChannelSample> = data.train.iter().map(|p| &p.ul).collect();
    let val_refs: Vec<&ChannelSample> = data.val.iter().map(|p| &p.ul).collect();
    let run = train(model, &train_refs, &val_refs, &mask, &config.training)?;

    let ckpt = Checkpoint {
        model: run.model.clone(),
        mask,
        best_epoch: run.best_epoch as u32,
        curve: run.curve.clone(),
    };
    save_checkpoint(&checkpoint_path(config, out), &ckpt)?;
    write_loss_curve(&out.join("loss_curve.csv"), &run.curve)?;
    write_manifest(config, out)?;
    Ok(run)
}

/// Metric summaries for one gap.
#[derive(Debug, Clone)]
pub struct GapEvaluation {
    pub gap_label: String,
    pub cnn: MetricsReport,
    pub interp: MetricsReport,
}

#[derive(Debug)]
pub struct EvaluationOutcome {
    pub ul: MetricsReport,
    pub gaps: Vec<GapEvaluation>,
}

/// Evaluate the UL-trained network on the DL test sets of every configured
/// gap, against the linear-interpolation baseline.
pub fn run_evaluate(config: &ExperimentConfig, out: &Path) -> Result<EvaluationOutcome> {
    ensure_out(out)?;
    let ckpt = load_checkpoint(&checkpoint_path(config, out))?;
    let mask = build_mask(config, out)?;
    if mask != ckpt.mask {
        return Err(Error::Configuration(
            "configured mask does not match the checkpoint's mask".into(),
        ));
    }

    let n_eval = config.evaluation.eval_samples;
    let base = generate_dataset(
        &config.scenario,
        config.dataset.n_samples,
        config.dataset.split,
    )?;

    // UL reference: reconstruct held-out UL test samples.
    let ul_samples: Vec<&ChannelSample> =
        base.test.iter().take(n_eval).map(|p| &p.ul).collect();
    let ul_report = evaluate_cnn(&ckpt, &ul_samples, "cnn", "ul")?;
    write_metrics(&out.join("metrics_ul.csv"), std::slice::from_ref(&ul_report))?;

    let mut gaps = Vec::new();
    for &gap in &config.evaluation.gaps_mhz {
        let scenario = config.scenario_with_gap(gap);
        let data = generate_dataset(&scenario, config.dataset.n_samples, config.dataset.split)?;
        let dl_samples: Vec<&ChannelSample> =
            data.test.iter().take(n_eval).map(|p| &p.dl).collect();
        let label = format!("{gap}MHz");
        let cnn = evaluate_cnn(&ckpt, &dl_samples, "cnn", &label)?;
        let interp = evaluate_interp(&ckpt.mask, &dl_samples, &label)?;
        write_metrics(
            &out.join(format!("metrics_gap{gap}.csv")),
            &[cnn.clone(), interp.clone()],
        )?;
        gaps.push(GapEvaluation {
            gap_label: label,
            cnn,
            interp,
        });
    }
    write_manifest(config, out)?;
    Ok(EvaluationOutcome {
        ul: ul_report,
        gaps,
    })
}

fn evaluate_cnn(
    ckpt: &Checkpoint,
    samples: &[&ChannelSample],
    method: &str,
    gap_label: &str,
) -> Result<MetricsReport> {
    let pairs: Result<Vec<(f64, f64)>> = samples
        .par_iter()
        .map(|s| {
            let recon = recover_dl(&ckpt.model, s, &ckpt.mask)?;
            Ok((nmse(s, &recon)?, cosine_similarity(s, &recon)?))
        })
        .collect();
    let (nm, cs): (Vec<f64>, Vec<f64>) = pairs?.into_iter().unzip();
    MetricsReport::from_samples(nm, cs, method, gap_label)
}

fn evaluate_interp(
    mask: &Mask,
    samples: &[&ChannelSample],
    gap_label: &str,
) -> Result<MetricsReport> {
    let pairs: Result<Vec<(f64, f64)>> = samples
        .par_iter()
        .map(|s| {
            let recon = linear_interp_recover(s, mask)?;
            Ok((nmse(s, &recon)?, cosine_similarity(s, &recon)?))
        })
        .collect();
    let (nm, cs): (Vec<f64>, Vec<f64>) = pairs?.into_iter().unzip();
    MetricsReport::from_samples(nm, cs, "interp", gap_label)
}

/// Mean per-user rates at one SNR point.
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub snr_db: f64,
    pub users: usize,
    pub perfect: f64,
    pub cnn: f64,
    pub interp: f64,
}

#[derive(Debug)]
pub struct RateOutcome {
    pub gap_mhz: u32,
    pub points: Vec<RatePoint>,
}

/// Rate evaluation: LISA applied per carrier to randomly selected test
/// channels, with the precoder computed from perfect, CNN-recovered, or
/// interpolated DL CSI and the achieved rate measured on the true channels.
pub fn run_rate(config: &ExperimentConfig, out: &Path) -> Result<Vec<RateOutcome>> {
    ensure_out(out)?;
    let ckpt = load_checkpoint(&checkpoint_path(config, out))?;
    let mut outcomes = Vec::new();
    for &gap in &config.evaluation.gaps_mhz {
        let scenario = config.scenario_with_gap(gap);
        let data = generate_dataset(&scenario, config.dataset.n_samples, config.dataset.split)?;
        let test_dl: Vec<&ChannelSample> = data.test.iter().map(|p| &p.dl).collect();
        let points = rate_points(
            &ckpt,
            &test_dl,
            &config.evaluation.users,
            &config.evaluation.snr_db,
            config.evaluation.rate_instances,
            config.evaluation.rate_seed,
        )?;
        let mut rows = Vec::new();
        for p in &points {
            for (source, value) in [
                ("perfect", p.perfect),
                ("cnn", p.cnn),
                ("interp", p.interp),
            ] {
                rows.push(RateRow {
                    snr_db: p.snr_db,
                    users: p.users,
                    csi_source: source.into(),
                    per_user_rate: value,
                });
            }
        }
        write_rate_rows(&out.join(format!("rate_gap{gap}.csv")), &rows)?;
        outcomes.push(RateOutcome {
            gap_mhz: gap,
            points,
        });
    }
    write_manifest(config, out)?;
    Ok(outcomes)
}

/// Core of the rate evaluation, shared with the acceptance tests.
pub fn rate_points(
    ckpt: &Checkpoint,
    test_dl: &[&ChannelSample],
    user_counts: &[usize],
    snr_grid_db: &[f64],
    instances: usize,
    seed: u64,
) -> Result<Vec<RatePoint>> {
    let mut points = Vec::new();
    for &k_users in user_counts {
        if test_dl.len() < k_users {
            return Err(Error::Data(format!(
                "need at least {k_users} test samples for {k_users}-user rate evaluation"
            )));
        }
        // Draw user groups, then reconstruct each group's CSI once.
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k_users as u64));
        let groups: Vec<Vec<usize>> = (0..instances)
            .map(|_| {
                let mut idx: Vec<usize> = (0..test_dl.len()).collect();
                idx.shuffle(&mut rng);
                idx.truncate(k_users);
                idx
            })
            .collect();

        struct InstanceCsi {
            truth: Vec<ChannelSample>,
            cnn: Vec<ChannelSample>,
            interp: Vec<ChannelSample>,
        }
        let instance_csi: Result<Vec<InstanceCsi>> = groups
            .par_iter()
            .map(|group| {
                let truth: Vec<ChannelSample> =
                    group.iter().map(|&i| test_dl[i].clone()).collect();
                let cnn = truth
                    .iter()
                    .map(|s| recover_dl(&ckpt.model, s, &ckpt.mask))
                    .collect::<Result<Vec<_>>>()?;
                let interp = truth
                    .iter()
                    .map(|s| linear_interp_recover(s, &ckpt.mask))
                    .collect::<Result<Vec<_>>>()?;
                Ok(InstanceCsi { truth, cnn, interp })
            })
            .collect();
        let instance_csi = instance_csi?;

        for &snr_db in snr_grid_db {
            let power = 10f64.powf(snr_db / 10.0);
            let mut sums = [0.0f64; 3];
            let per_instance: Result<Vec<[f64; 3]>> = instance_csi
                .par_iter()
                .map(|inst| {
                    let truth = MultiUserChannel::new(inst.truth.clone(), power)?;
                    let mut vals = [0.0f64; 3];
                    for (slot, csi_samples) in
                        [&inst.truth, &inst.cnn, &inst.interp].into_iter().enumerate()
                    {
                        let csi = MultiUserChannel::new(csi_samples.clone(), power)?;
                        let rates = evaluate_rate(&truth, &csi)?;
                        vals[slot] = rates.iter().sum::<f64>() / k_users as f64;
                    }
                    Ok(vals)
                })
                .collect();
            for vals in per_instance? {
                for (acc, v) in sums.iter_mut().zip(vals) {
                    *acc += v;
                }
            }
            let n = instances as f64;
            points.push(RatePoint {
                snr_db,
                users: k_users,
                perfect: sums[0] / n,
                cnn: sums[1] / n,
                interp: sums[2] / n,
            });
        }
    }
    Ok(points)
}

/// Draw `n` fresh normalized samples of one band from dedicated location
/// streams, flattened for the MMD machinery.
pub fn draw_sample_set(
    scenario: &ScenarioConfig,
    band: Band,
    base_location: u64,
    n: usize,
) -> Result<SampleSet> {
    let samples: Result<Vec<ChannelSample>> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let pair = generate_pair(scenario, base_location + i)?;
            Ok(match band {
                Band::Ul => pair.ul,
                Band::Dl => pair.dl,
            })
        })
        .collect();
    let samples = samples?;
    let label = scenario.sample_tag(band);
    SampleSet::from_channel_samples(&samples, &label)
}

/// One named two-sample comparison of the test battery.
#[derive(Debug, Clone)]
pub struct MmdComparison {
    pub label: String,
    pub tpr: f64,
    pub median_observed: f64,
}

#[derive(Debug)]
pub struct MmdOutcome {
    pub comparisons: Vec<MmdComparison>,
}

fn battery_for_comparison(
    config: &ExperimentConfig,
    label: &str,
) -> Result<TprBatteryReport> {
    let m = &config.mmdtest;
    let n = m.n;
    let scenario = config.scenario.clone();
    // Disjoint location ranges per iteration and per side.
    let span = (2 * n) as u64;
    let p_source = {
        let scenario = scenario.clone();
        move |iter: usize| draw_sample_set(&scenario, Band::Ul, iter as u64 * span, n)
    };
    // The q side always draws from its own disjoint location range.
    let make_q = |scenario_q: ScenarioConfig, band: Band| {
        move |iter: usize| draw_sample_set(&scenario_q, band, iter as u64 * span + n as u64, n)
    };

    match label {
        "null" => tpr_battery(
            p_source,
            make_q(scenario, Band::Ul),
            m.iterations,
            m.permutations,
            m.alpha,
            m.seed,
        ),
        "other-cell" => tpr_battery(
            p_source,
            make_q(config.other_scenario_with_gap(120), Band::Dl),
            m.iterations,
            m.permutations,
            m.alpha,
            m.seed.wrapping_add(4),
        ),
        gap if gap.starts_with("gap-") => {
            let mhz: u32 = gap["gap-".len()..]
                .parse()
                .map_err(|_| Error::Configuration(format!("bad comparison '{gap}'")))?;
            tpr_battery(
                p_source,
                make_q(config.scenario_with_gap(mhz), Band::Dl),
                m.iterations,
                m.permutations,
                m.alpha,
                m.seed.wrapping_add(mhz as u64),
            )
        }
        other => Err(Error::Configuration(format!(
            "unknown comparison '{other}' (expected null, gap-<mhz>, other-cell)"
        ))),
    }
}

/// Run the configured MMD comparisons and write one CSV per comparison.
pub fn run_mmdtest(config: &ExperimentConfig, out: &Path) -> Result<MmdOutcome> {
    ensure_out(out)?;
    let mut comparisons = Vec::new();
    for label in &config.mmdtest.comparisons {
        let battery = battery_for_comparison(config, label)?;
        write_mmd_report(&out.join(format!("mmd_{label}.csv")), label, &battery)?;
        let observed: Vec<f64> = battery.tests.iter().map(|t| t.observed).collect();
        comparisons.push(MmdComparison {
            label: label.clone(),
            tpr: battery.tpr,
            median_observed: median(&observed)?,
        });
    }
    write_manifest(config, out)?;
    Ok(MmdOutcome { comparisons })
}

/// Median `n * MMD^2` over repeated paired sets, one value per comparison
/// label. This is the summary behind the gap-trend check.
pub fn mmd_median_trend(
    config: &ExperimentConfig,
    labels: &[&str],
    n: usize,
    n_sets: usize,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    let span = (2 * n) as u64;
    for label in labels {
        let q_scenario = match *label {
            "null" => config.scenario.clone(),
            "other-cell" => config.other_scenario_with_gap(120),
            gap if gap.starts_with("gap-") => {
                let mhz: u32 = gap["gap-".len()..]
                    .parse()
                    .map_err(|_| Error::Configuration(format!("bad comparison '{gap}'")))?;
                config.scenario_with_gap(mhz)
            }
            other => {
                return Err(Error::Configuration(format!("unknown comparison '{other}'")));
            }
        };
        let band = if *label == "null" { Band::Ul } else { Band::Dl };
        let values: Result<Vec<f64>> = (0..n_sets)
            .map(|set| {
                let p = draw_sample_set(&config.scenario, Band::Ul, set as u64 * span, n)?;
                let q = draw_sample_set(&q_scenario, band, set as u64 * span + n as u64, n)?;
                let cfg = median_bandwidth(&p, &q)?;
                Ok(n as f64 * mmd2_unbiased(&p, &q, &cfg)?)
            })
            .collect();
        out.push((label.to_string(), median(&values?)?));
    }
    Ok(out)
}

#[derive(Debug)]
pub struct MaskOptOutcome {
    pub mask_path: PathBuf,
    pub final_loss: f64,
    pub ones: usize,
}

/// Learn a mask with the concrete autoencoder on UL training data and
/// export it in the masking module's serialized form.
pub fn run_maskopt(config: &ExperimentConfig, out: &Path) -> Result<MaskOptOutcome> {
    ensure_out(out)?;
    let na = config.scenario.n_antennas();
    let nc = config.scenario.n_carriers;
    let k = (config.mask.eta * (na * nc) as f64).round() as usize;
    let data = generate_dataset(
        &config.scenario,
        config.dataset.n_samples,
        config.dataset.split,
    )?;
    let tensors: Vec<crate::numerics::RealTensor<f32>> = data
        .train
        .iter()
        .take(config.maskopt.n_samples)
        .map(|p| p.ul.to_real_tensor())
        .collect();
    let cae_config = CaeConfig {
        k,
        ..config.maskopt.cae.clone()
    };
    let run = train_cae(&tensors, na, nc, &cae_config)?;
    let mask_path = if config.mask.file.is_empty() {
        out.join("mask_cae.bin")
    } else {
        PathBuf::from(&config.mask.file)
    };
    save_mask(&mask_path, &run.mask)?;
    write_cae_curve(&out.join("cae_loss.csv"), &run.loss_curve)?;
    write_manifest(config, out)?;
    Ok(MaskOptOutcome {
        mask_path,
        final_loss: run.loss_curve.last().map(|&(_, l)| l).unwrap_or(f64::NAN),
        ones: run.mask.ones_count(),
    })
}

/// Reload a dataset written by [`run_generate`]; used by tooling and tests.
pub fn load_generated_ul_train(config: &ExperimentConfig, out: &Path) -> Result<Vec<ChannelSample>> {
    read_dataset(
        &out.join("ul_train.bin"),
        &config.scenario.sample_tag(Band::Ul),
    )
}
