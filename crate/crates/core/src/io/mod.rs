//! Persistence and configuration: binary dataset/checkpoint/mask formats,
//! TOML experiment configuration, and CSV report writers.

mod checkpoint;
mod config;
mod dataset;
mod report;

pub use checkpoint::{
    load_checkpoint, load_mask, save_checkpoint, save_mask, Checkpoint, CHECKPOINT_MAGIC,
    MASK_MAGIC,
};
pub use config::{
    DatasetConfig, EvaluationConfig, ExperimentConfig, MaskConfig, MaskOptConfig, MaskSource,
    MmdConfig, ModelConfig,
};
pub use dataset::{read_dataset, write_dataset, DATASET_MAGIC, DATASET_VERSION};
pub use report::{
    write_cae_curve, write_loss_curve, write_metrics, write_mmd_report, write_rate_rows, RateRow,
};
