//! Simplified geometric multipath channel generator.
//!
//! Channels are sums of plane-wave paths over a uniform planar array: each
//! path carries a delay, azimuth/elevation direction, power and a per-band
//! random phase. Paired uplink/downlink samples share the path geometry and
//! differ only in center frequency and phases, which preserves the spatial
//! consistency the rest of the pipeline depends on. Element positions are
//! fixed in meters, so array phases scale with the carrier (beam squint).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Propagation constant used by the phase math (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Elevation sector half-width for path directions (radians).
const ELEVATION_SECTOR: f64 = std::f64::consts::FRAC_PI_4;

/// Frequency band of a channel sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    Ul,
    Dl,
}

impl Band {
    pub fn label(self) -> &'static str {
        match self {
            Band::Ul => "ul",
            Band::Dl => "dl",
        }
    }
}

/// Scenario parameters for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Human-readable scenario label carried into sample tags and reports.
    pub tag: String,
    pub n_antennas_y: usize,
    pub n_antennas_z: usize,
    pub n_carriers: usize,
    pub bandwidth_hz: f64,
    pub ul_center_hz: f64,
    pub dl_center_hz: f64,
    pub n_paths: usize,
    pub cell_radius_m: f64,
    pub element_spacing_m: f64,
    pub delay_spread_s: f64,
    pub power_decay: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    /// Desk-scale default: 4x4 array, 32 carriers, 8 paths, 120 MHz gap.
    pub fn desk_default() -> Self {
        let ul_center_hz = 2.5e9;
        ScenarioConfig {
            tag: "umi-desk".to_string(),
            n_antennas_y: 4,
            n_antennas_z: 4,
            n_carriers: 32,
            bandwidth_hz: 8.0e6,
            ul_center_hz,
            dl_center_hz: 2.62e9,
            n_paths: 8,
            cell_radius_m: 150.0,
            element_spacing_m: half_wavelength(ul_center_hz),
            delay_spread_s: 1.0e-7,
            power_decay: 1.0,
            seed: 42,
        }
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas_y * self.n_antennas_z
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_carriers < 2 {
            return Err(Error::Configuration("n_carriers must be >= 2".into()));
        }
        if self.n_paths < 1 {
            return Err(Error::Configuration("n_paths must be >= 1".into()));
        }
        if self.dl_center_hz <= self.ul_center_hz {
            return Err(Error::Configuration(
                "dl_center_hz must exceed ul_center_hz".into(),
            ));
        }
        if self.bandwidth_hz >= self.ul_center_hz {
            return Err(Error::Configuration(
                "bandwidth_hz must be below ul_center_hz".into(),
            ));
        }
        if self.n_antennas_y == 0 || self.n_antennas_z == 0 {
            return Err(Error::Configuration("empty antenna grid".into()));
        }
        Ok(())
    }

    pub fn center_hz(&self, band: Band) -> f64 {
        match band {
            Band::Ul => self.ul_center_hz,
            Band::Dl => self.dl_center_hz,
        }
    }

    /// The `n`-th of `n_carriers` equispaced carrier frequencies centered on
    /// the band center; spacing is `bandwidth_hz / n_carriers`.
    pub fn carrier_hz(&self, band: Band, n: usize) -> f64 {
        let spacing = self.bandwidth_hz / self.n_carriers as f64;
        self.center_hz(band) + (n as f64 - (self.n_carriers as f64 - 1.0) / 2.0) * spacing
    }

    pub fn sample_tag(&self, band: Band) -> String {
        format!("{}:{}", self.tag, band.label())
    }
}

pub fn half_wavelength(center_hz: f64) -> f64 {
    SPEED_OF_LIGHT / center_hz / 2.0
}

/// Multipath geometry for one location, shared between the UL and DL bands.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub delays_s: Vec<f64>,
    pub azimuths: Vec<f64>,
    pub elevations: Vec<f64>,
    /// Linear powers, normalized to sum to one.
    pub powers: Vec<f64>,
    /// Per-band path phases, drawn independently.
    pub ul_phases: Vec<f64>,
    pub dl_phases: Vec<f64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.delays_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays_s.is_empty()
    }

    pub fn phases(&self, band: Band) -> &[f64] {
        match band {
            Band::Ul => &self.ul_phases,
            Band::Dl => &self.dl_phases,
        }
    }

    /// Draw a path set: exponential delays (sorted), uniform azimuth,
    /// sector-limited elevation, exponentially decaying powers over the
    /// sorted delays, and independent per-band phases.
    pub fn sample(config: &ScenarioConfig, rng: &mut impl Rng) -> PathSet {
        let l = config.n_paths;
        let mut delays: Vec<f64> = (0..l)
            .map(|_| -config.delay_spread_s * (1.0 - rng.gen::<f64>()).ln())
            .collect();
        delays.sort_by(f64::total_cmp);
        let azimuths: Vec<f64> = (0..l)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * std::f64::consts::PI)
            .collect();
        let elevations: Vec<f64> = (0..l)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * ELEVATION_SECTOR)
            .collect();
        let raw: Vec<f64> = delays
            .iter()
            .map(|&tau| (-config.power_decay * tau / config.delay_spread_s).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let powers = raw.iter().map(|&p| p / total).collect();
        let ul_phases: Vec<f64> = (0..l)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * std::f64::consts::PI)
            .collect();
        let dl_phases: Vec<f64> = (0..l)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * std::f64::consts::PI)
            .collect();
        PathSet {
            delays_s: delays,
            azimuths,
            elevations,
            powers,
            ul_phases,
            dl_phases,
        }
    }
}

/// One channel matrix (antennas x carriers) plus its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSample {
    pub matrix: ComplexMatrix,
    pub path_gain_db: f64,
    pub scenario_tag: String,
    pub location_id: u64,
}

impl ChannelSample {
    pub fn is_uplink(&self) -> bool {
        self.scenario_tag.ends_with(":ul")
    }

    /// Stack re/im into an `[na, nc, 2]` single-precision tensor, the
    /// network's working representation.
    pub fn to_real_tensor(&self) -> crate::numerics::RealTensor<f32> {
        let na = self.matrix.rows();
        let nc = self.matrix.cols();
        let mut data = Vec::with_capacity(na * nc * 2);
        for z in self.matrix.data() {
            data.push(z.re as f32);
            data.push(z.im as f32);
        }
        crate::numerics::RealTensor::from_vec(&[na, nc, 2], data)
            .expect("matrix entries are finite")
    }

    /// Rebuild a complex matrix from an `[na, nc, 2]` tensor.
    pub fn matrix_from_tensor<T: crate::numerics::Scalar>(
        t: &crate::numerics::RealTensor<T>,
    ) -> Result<ComplexMatrix> {
        match t.dims() {
            [na, nc, 2] => {
                let data = t
                    .data()
                    .chunks_exact(2)
                    .map(|p| Complex64::new(p[0].to_f64(), p[1].to_f64()))
                    .collect();
                ComplexMatrix::from_vec(*na, *nc, data)
            }
            other => Err(Error::DimensionMismatch {
                expected: "[na, nc, 2]".into(),
                got: format!("{other:?}"),
            }),
        }
    }
}

/// Array response of the UPA at `carrier_hz` for a plane wave from
/// `(azimuth, elevation)`. Element k at position r_k carries the phase
/// `exp(-j 2π f/c <r_k, u>)`; positions are fixed in meters, so the phases
/// scale with the carrier.
pub fn steering_vector(
    config: &ScenarioConfig,
    carrier_hz: f64,
    azimuth: f64,
    elevation: f64,
) -> Result<Vec<Complex64>> {
    if carrier_hz <= 0.0 {
        return Err(Error::Argument("carrier frequency must be positive".into()));
    }
    let d = config.element_spacing_m;
    // Array in the y-z plane; propagation direction for (azimuth, elevation).
    let uy = elevation.cos() * azimuth.sin();
    let uz = elevation.sin();
    let k = 2.0 * std::f64::consts::PI * carrier_hz / SPEED_OF_LIGHT;
    let mut out = Vec::with_capacity(config.n_antennas());
    for iy in 0..config.n_antennas_y {
        for iz in 0..config.n_antennas_z {
            let proj = d * (iy as f64 * uy + iz as f64 * uz);
            out.push(Complex64::from_polar(1.0, -k * proj));
        }
    }
    Ok(out)
}

/// Superimpose all paths: column n is
/// `sum_l sqrt(p_l) e^{j phase_l} a(f_n, dir_l) e^{-j 2π f_n tau_l}`.
pub fn synthesize_channel(
    config: &ScenarioConfig,
    paths: &PathSet,
    band: Band,
    location_id: u64,
) -> Result<ChannelSample> {
    config.validate()?;
    if paths.is_empty() {
        return Err(Error::Argument("empty path set".into()));
    }
    let na = config.n_antennas();
    let nc = config.n_carriers;
    let mut matrix = ComplexMatrix::zeros(na, nc);
    let phases = paths.phases(band);
    for n in 0..nc {
        let f_n = self::carrier(config, band, n);
        for l in 0..paths.len() {
            let a = steering_vector(config, f_n, paths.azimuths[l], paths.elevations[l])?;
            let gain = paths.powers[l].sqrt()
                * Complex64::from_polar(
                    1.0,
                    phases[l] - 2.0 * std::f64::consts::PI * f_n * paths.delays_s[l],
                );
            for (k, &ak) in a.iter().enumerate() {
                matrix[(k, n)] += gain * ak;
            }
        }
    }
    Ok(ChannelSample {
        matrix,
        path_gain_db: 0.0,
        scenario_tag: config.sample_tag(band),
        location_id,
    })
}

fn carrier(config: &ScenarioConfig, band: Band, n: usize) -> f64 {
    config.carrier_hz(band, n)
}

/// Remove the per-sample path gain: the matrix is scaled by
/// `10^{-PG_dB/20}` where `PG_dB = 10 log10` of the mean squared entry
/// magnitude of the raw matrix, so the output has unit mean entry power.
pub fn normalize(sample: &ChannelSample) -> Result<ChannelSample> {
    let power = sample.matrix.mean_entry_power();
    if power <= 0.0 {
        return Err(Error::DegenerateSample(
            "cannot normalize an all-zero channel matrix".into(),
        ));
    }
    let pg_db = 10.0 * power.log10();
    let mut matrix = sample.matrix.clone();
    matrix.scale(10f64.powf(-pg_db / 20.0));
    Ok(ChannelSample {
        matrix,
        path_gain_db: pg_db,
        scenario_tag: sample.scenario_tag.clone(),
        location_id: sample.location_id,
    })
}

/// A paired uplink/downlink observation of one location.
#[derive(Debug, Clone)]
pub struct PairedSample {
    pub ul: ChannelSample,
    pub dl: ChannelSample,
}

/// Train/validation/test splits of paired samples.
#[derive(Debug, Clone)]
pub struct DatasetSplits {
    pub train: Vec<PairedSample>,
    pub val: Vec<PairedSample>,
    pub test: Vec<PairedSample>,
}

impl DatasetSplits {
    pub fn ul_train(&self) -> Vec<&ChannelSample> {
        self.train.iter().map(|p| &p.ul).collect()
    }

    pub fn ul_val(&self) -> Vec<&ChannelSample> {
        self.val.iter().map(|p| &p.ul).collect()
    }
}

/// Generate one normalized sample pair for `location_id`. The random stream
/// is a dedicated ChaCha stream per location, so parallel and serial
/// generation agree bit for bit.
pub fn generate_pair(config: &ScenarioConfig, location_id: u64) -> Result<PairedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(location_id.wrapping_add(1));
    let paths = PathSet::sample(config, &mut rng);
    let ul = normalize(&synthesize_channel(config, &paths, Band::Ul, location_id)?)?;
    let dl = normalize(&synthesize_channel(config, &paths, Band::Dl, location_id)?)?;
    Ok(PairedSample {
        ul: quantize_sample(ul),
        dl: quantize_sample(dl),
    })
}

/// Round matrix entries and metadata to f32 storage precision; datasets are
/// persisted as 32-bit floats and training runs in single precision, so
/// quantizing at generation time makes file round-trips bit-identical.
fn quantize_sample(mut s: ChannelSample) -> ChannelSample {
    for z in s.matrix.data_mut() {
        *z = Complex64::new(z.re as f32 as f64, z.im as f32 as f64);
    }
    s.path_gain_db = s.path_gain_db as f32 as f64;
    s
}

/// Generate `n_samples` paired UL/DL samples at independent locations and
/// split them into train/val/test by the given fractions.
pub fn generate_dataset(
    config: &ScenarioConfig,
    n_samples: usize,
    split: (f64, f64, f64),
) -> Result<DatasetSplits> {
    config.validate()?;
    if n_samples < 3 {
        return Err(Error::Argument(
            "need at least 3 samples to populate all splits".into(),
        ));
    }
    let (f_train, f_val, f_test) = split;
    if f_train <= 0.0 || f_val <= 0.0 || f_test <= 0.0 {
        return Err(Error::Argument("split fractions must be positive".into()));
    }
    if (f_train + f_val + f_test - 1.0).abs() > 1e-9 {
        return Err(Error::Argument("split fractions must sum to 1".into()));
    }

    let pairs: Result<Vec<PairedSample>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| generate_pair(config, i))
        .collect();
    let mut pairs = pairs?;

    let n_train = (f_train * n_samples as f64).round() as usize;
    let n_val = (f_val * n_samples as f64).round() as usize;
    let n_train = n_train.clamp(1, n_samples - 2);
    let n_val = n_val.clamp(1, n_samples - n_train - 1);

    let test = pairs.split_off(n_train + n_val);
    let val = pairs.split_off(n_train);
    Ok(DatasetSplits {
        train: pairs,
        val,
        test,
    })
}
