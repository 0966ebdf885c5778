//! Kernel two-sample machinery: unbiased squared maximum mean discrepancy,
//! median-heuristic Gaussian kernel, and the permutation test with its
//! true-positive-rate battery.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::numerics::{percentile, percentile_sorted};

/// A set of equal-length real vectors, one per draw.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub vectors: Vec<Vec<f64>>,
    pub label: String,
}

impl SampleSet {
    pub fn new(vectors: Vec<Vec<f64>>, label: &str) -> Result<SampleSet> {
        if vectors.len() < 2 {
            return Err(Error::Argument("sample set needs at least 2 vectors".into()));
        }
        let d = vectors[0].len();
        if d == 0 || vectors.iter().any(|v| v.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: format!("vectors of length {d}"),
                got: "mixed lengths".into(),
            });
        }
        Ok(SampleSet {
            vectors,
            label: label.to_string(),
        })
    }

    /// Flatten normalized channel matrices into real vectors of length
    /// `2 * Na * Nc` (re/im interleaved), the test's input representation.
    pub fn from_channel_samples(samples: &[ChannelSample], label: &str) -> Result<SampleSet> {
        let vectors = samples
            .iter()
            .map(|s| {
                s.matrix
                    .data()
                    .iter()
                    .flat_map(|z| [z.re, z.im])
                    .collect::<Vec<f64>>()
            })
            .collect();
        SampleSet::new(vectors, label)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].len()
    }
}

/// Gaussian kernel bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelConfig {
    pub sigma50: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Median pairwise Euclidean distance over the aggregate sample, self-pairs
/// excluded.
pub fn median_bandwidth(p: &SampleSet, q: &SampleSet) -> Result<KernelConfig> {
    let aggregate: Vec<&Vec<f64>> = p.vectors.iter().chain(q.vectors.iter()).collect();
    if aggregate.len() < 2 {
        return Err(Error::Argument("aggregate sample too small".into()));
    }
    let mut dists = Vec::with_capacity(aggregate.len() * (aggregate.len() - 1) / 2);
    for i in 0..aggregate.len() {
        for j in (i + 1)..aggregate.len() {
            dists.push(sq_dist(aggregate[i], aggregate[j]).sqrt());
        }
    }
    let sigma50 = percentile(&dists, 0.5)?;
    if sigma50 <= 0.0 {
        return Err(Error::DegenerateKernel);
    }
    Ok(KernelConfig { sigma50 })
}

/// Gaussian kernel `k(p, q) = exp(-||p - q||^2 / sigma50^2)`.
pub fn gaussian_kernel(p: &[f64], q: &[f64], cfg: &KernelConfig) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("length {}", p.len()),
            got: format!("{}", q.len()),
        });
    }
    Ok((-sq_dist(p, q) / (cfg.sigma50 * cfg.sigma50)).exp())
}

/// Gram matrix of the pooled sample under the Gaussian kernel, as a flat
/// `(2n)^2` row-major buffer.
struct PooledGram {
    k: Vec<f64>,
    size: usize,
}

impl PooledGram {
    fn compute(pooled: &[&Vec<f64>], cfg: &KernelConfig) -> PooledGram {
        let size = pooled.len();
        let inv = 1.0 / (cfg.sigma50 * cfg.sigma50);
        // Upper triangle in parallel rows, mirrored afterwards.
        let mut k = vec![0.0f64; size * size];
        k.par_chunks_mut(size).enumerate().for_each(|(i, row)| {
            row[i] = 1.0;
            for j in (i + 1)..size {
                row[j] = (-sq_dist(pooled[i], pooled[j]) * inv).exp();
            }
        });
        for i in 0..size {
            for j in (i + 1)..size {
                k[j * size + i] = k[i * size + j];
            }
        }
        PooledGram { k, size }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.size + j]
    }

    /// Unbiased squared MMD for a split of the pooled indices into two
    /// equal halves, respecting the positional pairing of the halves.
    /// Accumulated per pair as `h_ij`, so identical halves give exactly 0.
    fn mmd2(&self, a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        debug_assert_eq!(n, b.len());
        let mut acc = 0.0;
        for i in 0..n {
            let ai = a[i];
            let bi = b[i];
            for j in 0..n {
                if i == j {
                    continue;
                }
                acc += self.at(ai, a[j]) + self.at(bi, b[j])
                    - self.at(ai, b[j])
                    - self.at(bi, a[j]);
            }
        }
        acc / (n * (n - 1)) as f64
    }
}

/// Unbiased estimator of the squared MMD between two equal-size sample
/// sets. May be negative.
pub fn mmd2_unbiased(p: &SampleSet, q: &SampleSet, cfg: &KernelConfig) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Argument(format!(
            "equal sample sizes required, got {} and {}",
            p.len(),
            q.len()
        )));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("dimension {}", p.dim()),
            got: format!("{}", q.dim()),
        });
    }
    let pooled: Vec<&Vec<f64>> = p.vectors.iter().chain(q.vectors.iter()).collect();
    let gram = PooledGram::compute(&pooled, cfg);
    let n = p.len();
    let a: Vec<usize> = (0..n).collect();
    let b: Vec<usize> = (n..2 * n).collect();
    Ok(gram.mmd2(&a, &b))
}

/// Outcome of one two-sample permutation test. All statistics are reported
/// on the `n * MMD^2` scale.
#[derive(Debug, Clone, Serialize)]
pub struct MmdTestReport {
    pub observed: f64,
    pub threshold: f64,
    pub reject: bool,
    pub alpha: f64,
    pub n: usize,
    pub sigma50: f64,
    #[serde(skip)]
    pub null_sample: Vec<f64>,
}

/// Two-sample permutation test. The kernel bandwidth is the median distance
/// of the original aggregate and is held fixed across permutations (the
/// aggregate, and therefore the median, is permutation invariant). The null
/// sample is produced by seeded shuffle-and-split resampling of the pooled
/// vectors without replacement; the null hypothesis is rejected when the
/// observed statistic exceeds the `1 - alpha` percentile of the null.
pub fn permutation_test(
    p: &SampleSet,
    q: &SampleSet,
    n_permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<MmdTestReport> {
    if n_permutations < 100 {
        return Err(Error::Argument(
            "permutation test needs at least 100 permutations".into(),
        ));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Argument("alpha must be in (0, 1)".into()));
    }
    if p.len() != q.len() {
        return Err(Error::Argument("equal sample sizes required".into()));
    }
    let n = p.len();
    let cfg = median_bandwidth(p, q)?;
    let pooled: Vec<&Vec<f64>> = p.vectors.iter().chain(q.vectors.iter()).collect();
    let gram = PooledGram::compute(&pooled, &cfg);

    let a: Vec<usize> = (0..n).collect();
    let b: Vec<usize> = (n..2 * n).collect();
    let observed = n as f64 * gram.mmd2(&a, &b);

    let null_sample: Vec<f64> = (0..n_permutations as u64)
        .into_par_iter()
        .map(|perm| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(perm.wrapping_add(1));
            let mut indices: Vec<usize> = (0..2 * n).collect();
            indices.shuffle(&mut rng);
            n as f64 * gram.mmd2(&indices[..n], &indices[n..])
        })
        .collect();

    let mut sorted = null_sample.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = percentile_sorted(&sorted, 1.0 - alpha)?;
    Ok(MmdTestReport {
        observed,
        threshold,
        reject: observed > threshold,
        alpha,
        n,
        sigma50: cfg.sigma50,
        null_sample,
    })
}

/// Aggregate of a repeated-test battery.
#[derive(Debug, Clone, Serialize)]
pub struct TprBatteryReport {
    pub tests: Vec<MmdTestReport>,
    pub tpr: f64,
    pub alpha: f64,
}

/// Run the permutation test on `n_iterations` independently generated
/// sample pairs and report the fraction of rejections.
pub fn tpr_battery(
    mut source_p: impl FnMut(usize) -> Result<SampleSet>,
    mut source_q: impl FnMut(usize) -> Result<SampleSet>,
    n_iterations: usize,
    n_permutations: usize,
    alpha: f64,
    seed: u64,
) -> Result<TprBatteryReport> {
    if n_iterations == 0 {
        return Err(Error::Argument("need at least one iteration".into()));
    }
    let mut tests = Vec::with_capacity(n_iterations);
    let mut rejections = 0usize;
    for iter in 0..n_iterations {
        let p = source_p(iter)?;
        let q = source_q(iter)?;
        let report = permutation_test(
            &p,
            &q,
            n_permutations,
            alpha,
            seed.wrapping_add(iter as u64).wrapping_mul(0x9e3779b97f4a7c15),
        )?;
        if report.reject {
            rejections += 1;
        }
        tests.push(report);
    }
    Ok(TprBatteryReport {
        tpr: rejections as f64 / n_iterations as f64,
        tests,
        alpha,
    })
}
