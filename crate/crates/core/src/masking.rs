//! Binary feedback masks and the gather/scatter between full channel
//! tensors and the compressed feedback vector.
//!
//! The feedback ordering is canonical and versioned: carrier-major, then
//! antenna, with the real part before the imaginary part of each kept
//! entry. Uplink training and downlink feedback must agree on this byte for
//! byte, since the trained network only ever sees vectors in this layout.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{RealTensor, Scalar};

/// Binary selection pattern over an antennas x carriers grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    na: usize,
    nc: usize,
    pattern: Vec<bool>,
    eta: f64,
}

impl Mask {
    pub fn from_pattern(na: usize, nc: usize, pattern: Vec<bool>) -> Result<Mask> {
        if pattern.len() != na * nc {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pattern bits", na * nc),
                got: format!("{}", pattern.len()),
            });
        }
        let ones = pattern.iter().filter(|&&b| b).count();
        if ones == 0 {
            return Err(Error::Argument("mask selects no entries".into()));
        }
        Ok(Mask {
            na,
            nc,
            pattern,
            eta: ones as f64 / (na * nc) as f64,
        })
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn nc(&self) -> usize {
        self.nc
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    #[inline]
    pub fn is_kept(&self, antenna: usize, carrier: usize) -> bool {
        self.pattern[antenna * self.nc + carrier]
    }

    pub fn ones_count(&self) -> usize {
        self.pattern.iter().filter(|&&b| b).count()
    }

    /// Number of real values in the feedback vector (re and im per kept
    /// complex entry).
    pub fn feedback_len(&self) -> usize {
        2 * self.ones_count()
    }

    /// Kept positions in canonical feedback order: carrier-major, then
    /// antenna.
    pub fn kept_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.ones_count());
        for carrier in 0..self.nc {
            for antenna in 0..self.na {
                if self.is_kept(antenna, carrier) {
                    out.push((antenna, carrier));
                }
            }
        }
        out
    }

    /// Carriers with at least one kept antenna.
    pub fn observed_carriers(&self) -> Vec<usize> {
        (0..self.nc)
            .filter(|&c| (0..self.na).any(|a| self.is_kept(a, c)))
            .collect()
    }
}

/// Compressed CSI feedback: the kept entries of one channel tensor in
/// canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackVector<T> {
    pub values: Vec<T>,
    pub mask_id: String,
}

/// Equidistant mask: `2*eta*nc` equally spaced carriers, every second
/// antenna on each selected carrier.
pub fn uniform_mask(na: usize, nc: usize, eta: f64) -> Result<Mask> {
    let carriers_f = 2.0 * eta * nc as f64;
    let n_sel = carriers_f.round() as usize;
    if n_sel == 0 || (carriers_f - n_sel as f64).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "2*eta*nc = {carriers_f} must be a positive integer"
        )));
    }
    if n_sel > nc {
        return Err(Error::Argument("more selected carriers than carriers".into()));
    }
    if na % 2 != 0 {
        return Err(Error::Argument("antenna count must be even".into()));
    }
    let mut pattern = vec![false; na * nc];
    for i in 0..n_sel {
        let carrier = i * nc / n_sel;
        for antenna in (0..na).step_by(2) {
            pattern[antenna * nc + carrier] = true;
        }
    }
    Mask::from_pattern(na, nc, pattern)
}

/// Random mask with exactly `ones` kept positions, drawn without
/// replacement under a fixed seed.
pub fn random_mask(na: usize, nc: usize, ones: usize, seed: u64) -> Result<Mask> {
    if ones == 0 || ones > na * nc {
        return Err(Error::Argument(format!(
            "ones count {ones} outside 1..={}",
            na * nc
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..na * nc).collect();
    indices.shuffle(&mut rng);
    let mut pattern = vec![false; na * nc];
    for &idx in indices.iter().take(ones) {
        pattern[idx] = true;
    }
    Mask::from_pattern(na, nc, pattern)
}

/// Gather the kept entries of an `[na, nc, 2]` tensor into a feedback
/// vector in canonical order.
pub fn apply_mask<T: Scalar>(h: &RealTensor<T>, mask: &Mask) -> Result<FeedbackVector<T>> {
    check_dims(h, mask)?;
    let mut values = Vec::with_capacity(mask.feedback_len());
    for (antenna, carrier) in mask.kept_positions() {
        values.push(h.get3(antenna, carrier, 0));
        values.push(h.get3(antenna, carrier, 1));
    }
    Ok(FeedbackVector {
        values,
        mask_id: mask_id(mask),
    })
}

/// Scatter a feedback vector back into a sparse `[na, nc, 2]` tensor; all
/// off-mask entries are exactly zero.
pub fn scatter_to_sparse<T: Scalar>(fb: &FeedbackVector<T>, mask: &Mask) -> Result<RealTensor<T>> {
    if fb.values.len() != mask.feedback_len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} feedback values", mask.feedback_len()),
            got: format!("{}", fb.values.len()),
        });
    }
    let mut out = RealTensor::zeros(&[mask.na(), mask.nc(), 2]);
    for (i, (antenna, carrier)) in mask.kept_positions().into_iter().enumerate() {
        out.set3(antenna, carrier, 0, fb.values[2 * i]);
        out.set3(antenna, carrier, 1, fb.values[2 * i + 1]);
    }
    Ok(out)
}

/// Stable identifier tying feedback vectors to the mask that produced them.
pub fn mask_id(mask: &Mask) -> String {
    // FNV-1a over the pattern bits.
    let mut hash: u64 = 0xcbf29ce484222325;
    for carrier in 0..mask.nc() {
        for antenna in 0..mask.na() {
            hash ^= mask.is_kept(antenna, carrier) as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    }
    format!("{}x{}-{:016x}", mask.na(), mask.nc(), hash)
}

fn check_dims<T: Scalar>(h: &RealTensor<T>, mask: &Mask) -> Result<()> {
    if h.dims() != [mask.na(), mask.nc(), 2] {
        return Err(Error::DimensionMismatch {
            expected: format!("[{}, {}, 2]", mask.na(), mask.nc()),
            got: format!("{:?}", h.dims()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_scale_uniform_mask() {
        // eta = 0.025 on 64x160: 8 carriers x 32 antennas = 256 kept complex
        // entries = 512 real feedback values, compression ratio 40.
        let m = uniform_mask(64, 160, 0.025).unwrap();
        assert_eq!(m.ones_count(), 256);
        assert_eq!(m.feedback_len(), 512);
        assert_eq!(m.observed_carriers(), vec![0, 20, 40, 60, 80, 100, 120, 140]);
        for c in m.observed_carriers() {
            for a in 0..64 {
                assert_eq!(m.is_kept(a, c), a % 2 == 0);
            }
        }
    }

    #[test]
    fn degenerate_full_mask() {
        // 2*eta*nc = nc selects every carrier; with every antenna this would
        // be the identity, here every second antenna by construction.
        let m = uniform_mask(2, 4, 0.5).unwrap();
        assert_eq!(m.observed_carriers().len(), 4);
    }

    #[test]
    fn small_uniform_mask_counts() {
        let m = uniform_mask(4, 8, 0.125).unwrap();
        assert_eq!(m.ones_count(), 4);
        assert_eq!(m.feedback_len(), 8);
        assert_eq!(m.observed_carriers(), vec![0, 4]);
        assert_eq!((m.ones_count() as f64), m.eta() * 4.0 * 8.0);
    }

    #[test]
    fn non_integer_carrier_count_is_error() {
        assert!(uniform_mask(4, 10, 0.12).is_err());
        assert!(uniform_mask(3, 8, 0.125).is_err());
    }

    #[test]
    fn gather_hand_case() {
        // 2x2x2 tensor, keep (a0,c0) and (a1,c1).
        let t = RealTensor::from_vec(
            &[2, 2, 2],
            vec![1.0f32, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
        )
        .unwrap();
        let mask = Mask::from_pattern(2, 2, vec![true, false, false, true]).unwrap();
        let fb = apply_mask(&t, &mask).unwrap();
        // Canonical order: carrier 0 antenna 0, then carrier 1 antenna 1.
        assert_eq!(fb.values, vec![1.0, 2.0, 7.0, 8.0]);
        let back = scatter_to_sparse(&fb, &mask).unwrap();
        assert_eq!(back.get3(0, 0, 0), 1.0);
        assert_eq!(back.get3(0, 0, 1), 2.0);
        assert_eq!(back.get3(1, 1, 0), 7.0);
        assert_eq!(back.get3(1, 1, 1), 8.0);
        assert_eq!(back.get3(0, 1, 0), 0.0);
        assert_eq!(back.get3(1, 0, 1), 0.0);
    }

    #[test]
    fn full_mask_is_identity() {
        let t = RealTensor::from_vec(&[2, 2, 2], (1..=8).map(|v| v as f32).collect()).unwrap();
        let mask = Mask::from_pattern(2, 2, vec![true; 4]).unwrap();
        let fb = apply_mask(&t, &mask).unwrap();
        assert_eq!(fb.values.len(), 8);
        let back = scatter_to_sparse(&fb, &mask).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn zero_tensor_gives_zero_feedback() {
        let t = RealTensor::<f32>::zeros(&[4, 8, 2]);
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let fb = apply_mask(&t, &mask).unwrap();
        assert!(fb.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let t = RealTensor::<f32>::zeros(&[2, 8, 2]);
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        assert!(apply_mask(&t, &mask).is_err());
        let fb = FeedbackVector {
            values: vec![0.0f32; 3],
            mask_id: String::new(),
        };
        assert!(scatter_to_sparse(&fb, &mask).is_err());
    }

    #[test]
    fn random_mask_deterministic() {
        let a = random_mask(4, 8, 6, 11).unwrap();
        let b = random_mask(4, 8, 6, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.ones_count(), 6);
    }
}
