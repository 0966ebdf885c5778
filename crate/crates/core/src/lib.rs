//! Uplink-trained CSI recovery for FDD massive MIMO.
//!
//! The pipeline: a geometric multipath simulator produces paired
//! uplink/downlink channel datasets; a dilated-convolution network learns
//! to reconstruct full channel matrices from a sparse binary feedback mask
//! using uplink data only; the unchanged network is then applied to
//! downlink feedback and evaluated against a linear-interpolation baseline
//! via NMSE, cosine similarity and multi-user rates under successive
//! zero-forcing precoding. A kernel two-sample permutation test (maximum
//! mean discrepancy with the median-heuristic Gaussian kernel) quantifies
//! how far the uplink and downlink channel distributions actually are
//! apart, which is the statistical basis for the transfer.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod io;
pub mod masking;
pub mod maskopt;
pub mod metrics;
pub mod mmd;
pub mod nn;
pub mod numerics;
pub mod precoding;
pub mod training;

pub use error::{Error, Result};
