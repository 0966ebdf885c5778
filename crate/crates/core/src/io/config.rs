//! Experiment configuration: a human-readable TOML file with explicit
//! seeds. A run's manifest is the resolved configuration written back out,
//! so any run can be reproduced bit for bit from its manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::error::{Error, Result};
use crate::maskopt::CaeConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskSource {
    Uniform,
    Random,
    Cae,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub source: MaskSource,
    pub eta: f64,
    /// Seed for the random mask source.
    pub seed: u64,
    /// Path to a serialized mask for the file source (and where the cae
    /// stage writes its result).
    pub file: String,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig {
            source: MaskSource::Uniform,
            eta: 0.0625,
            seed: 13,
            file: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub split: (f64, f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            n_samples: 12_500,
            split: (0.8, 0.1, 0.1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden_channels: Vec<usize>,
    pub dilations: Vec<usize>,
    pub init_seed: u64,
    /// Checkpoint location; empty means `<out>/checkpoint.bin`.
    pub checkpoint: String,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let arch = crate::nn::Architecture::desk_default();
        ModelConfig {
            hidden_channels: arch.hidden_channels,
            dilations: arch.dilations,
            init_seed: 1,
            checkpoint: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    /// UL-to-DL frequency gaps to evaluate, in MHz.
    pub gaps_mhz: Vec<u32>,
    pub users: Vec<usize>,
    pub snr_db: Vec<f64>,
    /// Monte-Carlo instances per SNR point of the rate evaluation.
    pub rate_instances: usize,
    /// Test samples used for the NMSE / cosine metrics.
    pub eval_samples: usize,
    pub rate_seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            gaps_mhz: vec![120, 240, 480],
            users: vec![1, 2, 4, 8],
            snr_db: vec![-10.0, 0.0, 10.0, 20.0, 30.0],
            rate_instances: 100,
            eval_samples: 500,
            rate_seed: 4242,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdConfig {
    /// Samples per set and test.
    pub n: usize,
    pub iterations: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    /// Comparisons to run: `null`, `gap-<mhz>`, `other-cell`.
    pub comparisons: Vec<String>,
}

impl Default for MmdConfig {
    fn default() -> Self {
        MmdConfig {
            n: 200,
            iterations: 40,
            permutations: 200,
            alpha: 0.05,
            seed: 99,
            comparisons: vec![
                "null".into(),
                "gap-120".into(),
                "gap-240".into(),
                "gap-480".into(),
                "other-cell".into(),
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskOptConfig {
    #[serde(flatten)]
    pub cae: CaeConfig,
    /// Training samples drawn from the UL training split.
    pub n_samples: usize,
}

impl Default for MaskOptConfig {
    fn default() -> Self {
        MaskOptConfig {
            cae: CaeConfig::default(),
            n_samples: 2000,
        }
    }
}

/// Full experiment description. Every stage reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// Scenario for the cross-cell comparisons; defaults to a cell with
    /// three times the delay spread and flatter power decay.
    pub other_scenario: ScenarioConfig,
    pub dataset: DatasetConfig,
    pub mask: MaskConfig,
    pub model: ModelConfig,
    pub training: TrainConfig,
    pub evaluation: EvaluationConfig,
    pub mmdtest: MmdConfig,
    pub maskopt: MaskOptConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let scenario = ScenarioConfig::desk_default();
        // The cross-cell comparison uses a macro-cell-like environment:
        // longer delay spread, flatter power profile, more paths.
        let mut other = scenario.clone();
        other.tag = "uma-desk".into();
        other.delay_spread_s = scenario.delay_spread_s * 4.0;
        other.power_decay = 0.25;
        other.n_paths = 2 * scenario.n_paths;
        other.seed = scenario.seed.wrapping_add(7_777);
        ExperimentConfig {
            scenario,
            other_scenario: other,
            dataset: DatasetConfig::default(),
            mask: MaskConfig::default(),
            model: ModelConfig::default(),
            training: TrainConfig::default(),
            evaluation: EvaluationConfig::default(),
            mmdtest: MmdConfig::default(),
            maskopt: MaskOptConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Configuration(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Configuration(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| Error::Configuration(format!("cannot serialize config: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.other_scenario.validate()?;
        self.training.validate()?;
        if self.mask.eta <= 0.0 || self.mask.eta >= 1.0 {
            return Err(Error::Configuration(format!(
                "mask eta {} outside (0, 1)",
                self.mask.eta
            )));
        }
        if matches!(self.mask.source, MaskSource::File) && self.mask.file.is_empty() {
            return Err(Error::Configuration(
                "mask source 'file' requires mask.file".into(),
            ));
        }
        if !(0.0 < self.mmdtest.alpha && self.mmdtest.alpha < 1.0) {
            return Err(Error::Configuration("mmdtest alpha outside (0, 1)".into()));
        }
        Ok(())
    }

    /// Scenario with the DL center moved to `ul + gap`.
    pub fn scenario_with_gap(&self, gap_mhz: u32) -> ScenarioConfig {
        let mut s = self.scenario.clone();
        s.dl_center_hz = s.ul_center_hz + gap_mhz as f64 * 1e6;
        s
    }

    pub fn other_scenario_with_gap(&self, gap_mhz: u32) -> ScenarioConfig {
        let mut s = self.other_scenario.clone();
        s.dl_center_hz = s.ul_center_hz + gap_mhz as f64 * 1e6;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_roundtrips_through_toml() {
        let cfg = ExperimentConfig::default();
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let cfg: ExperimentConfig = toml::from_str(
            r#"
            [scenario]
            tag = "custom"
            n_antennas_y = 2
            n_antennas_z = 2
            n_carriers = 16
            bandwidth_hz = 8e6
            ul_center_hz = 2.5e9
            dl_center_hz = 2.62e9
            n_paths = 4
            cell_radius_m = 150.0
            element_spacing_m = 0.06
            delay_spread_s = 1e-7
            power_decay = 1.0
            seed = 5
            "#,
        )
        .unwrap();
        assert_eq!(cfg.scenario.tag, "custom");
        assert_eq!(cfg.dataset.n_samples, 12_500);
    }

    #[test]
    fn gap_override() {
        let cfg = ExperimentConfig::default();
        let s = cfg.scenario_with_gap(240);
        assert_eq!(s.dl_center_hz, 2.5e9 + 240e6);
    }

    #[test]
    fn invalid_eta_rejected() {
        let mut cfg = ExperimentConfig::default();
        cfg.mask.eta = 1.5;
        assert!(cfg.validate().is_err());
    }
}
