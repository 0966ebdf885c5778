//! Linear-interpolation reference reconstruction and the evaluation
//! metrics (NMSE and per-carrier cosine similarity).

use num_complex::Complex64;
use serde::Serialize;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::masking::Mask;
use crate::numerics::{quartiles, ComplexMatrix, Quartiles};

/// Per-sample metric sequences plus their box statistics.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub nmse: Vec<f64>,
    pub cosine: Vec<f64>,
    pub nmse_box: Quartiles,
    pub cosine_box: Quartiles,
    pub method: String,
    pub gap_label: String,
}

impl MetricsReport {
    pub fn from_samples(
        nmse: Vec<f64>,
        cosine: Vec<f64>,
        method: &str,
        gap_label: &str,
    ) -> Result<MetricsReport> {
        let nmse_box = quartiles(&nmse)?;
        let cosine_box = quartiles(&cosine)?;
        Ok(MetricsReport {
            nmse,
            cosine,
            nmse_box,
            cosine_box,
            method: method.to_string(),
            gap_label: gap_label.to_string(),
        })
    }

    pub fn mean_nmse(&self) -> f64 {
        crate::numerics::mean(&self.nmse)
    }

    pub fn mean_cosine(&self) -> f64 {
        crate::numerics::mean(&self.cosine)
    }
}

/// Reconstruct a full channel matrix from the observed entries by linear
/// interpolation, first across carriers on each observed antenna row, then
/// across the antenna index for unobserved rows. Values beyond the
/// outermost observed positions are held constant.
pub fn linear_interp_recover(dl_true: &ChannelSample, mask: &Mask) -> Result<ChannelSample> {
    let na = mask.na();
    let nc = mask.nc();
    if dl_true.matrix.rows() != na || dl_true.matrix.cols() != nc {
        return Err(Error::DimensionMismatch {
            expected: format!("{na}x{nc} channel"),
            got: format!("{}x{}", dl_true.matrix.rows(), dl_true.matrix.cols()),
        });
    }
    if mask.observed_carriers().len() < 2 {
        return Err(Error::Argument(
            "linear interpolation needs at least 2 observed carriers".into(),
        ));
    }

    let mut out = ComplexMatrix::zeros(na, nc);
    let mut row_observed = vec![false; na];

    // Frequency-domain interpolation per observed antenna row.
    for a in 0..na {
        let obs: Vec<usize> = (0..nc).filter(|&c| mask.is_kept(a, c)).collect();
        if obs.is_empty() {
            continue;
        }
        row_observed[a] = true;
        interpolate_axis(
            &mut |c| dl_true.matrix[(a, c)],
            &obs,
            nc,
            &mut |c, v| out[(a, c)] = v,
        );
    }

    // Antenna-axis completion for unobserved rows, per carrier.
    let obs_rows: Vec<usize> = (0..na).filter(|&a| row_observed[a]).collect();
    if obs_rows.is_empty() {
        return Err(Error::Argument("mask observes no antenna row".into()));
    }
    for c in 0..nc {
        let column: Vec<Complex64> = (0..na).map(|a| out[(a, c)]).collect();
        interpolate_axis(
            &mut |a| column[a],
            &obs_rows,
            na,
            &mut |a, v| {
                if !row_observed[a] {
                    out[(a, c)] = v;
                }
            },
        );
    }

    Ok(ChannelSample {
        matrix: out,
        path_gain_db: dl_true.path_gain_db,
        scenario_tag: dl_true.scenario_tag.clone(),
        location_id: dl_true.location_id,
    })
}

/// Linear interpolation along one axis between observed indices, holding
/// the end values outside the observed span. `obs` must be ascending.
fn interpolate_axis(
    get: &mut impl FnMut(usize) -> Complex64,
    obs: &[usize],
    len: usize,
    set: &mut impl FnMut(usize, Complex64),
) {
    for i in 0..len {
        let v = if i <= obs[0] {
            get(obs[0])
        } else if i >= *obs.last().unwrap() {
            get(*obs.last().unwrap())
        } else {
            // Bracketing observed indices; hi_pos is the first obs >= i, so
            // an observed i lands exactly on get(hi) with t = 1.
            let hi_pos = obs.partition_point(|&o| o < i);
            let lo = obs[hi_pos - 1];
            let hi = obs[hi_pos];
            let t = (i - lo) as f64 / (hi - lo) as f64;
            get(lo) * (1.0 - t) + get(hi) * t
        };
        set(i, v);
    }
}

/// Normalized mean square error of one reconstruction:
/// `||est - true||_F^2 / ||true||_F^2`.
pub fn nmse(truth: &ChannelSample, est: &ChannelSample) -> Result<f64> {
    let (t, e) = (&truth.matrix, &est.matrix);
    if t.rows() != e.rows() || t.cols() != e.cols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", t.rows(), t.cols()),
            got: format!("{}x{}", e.rows(), e.cols()),
        });
    }
    let denom: f64 = t.data().iter().map(|z| z.norm_sqr()).sum();
    if denom == 0.0 {
        return Err(Error::DegenerateSample("true channel is all zero".into()));
    }
    let num: f64 = t
        .data()
        .iter()
        .zip(e.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(num / denom)
}

/// Mean over carriers of the normalized inner-product magnitude between the
/// true and reconstructed channel columns.
pub fn cosine_similarity(truth: &ChannelSample, est: &ChannelSample) -> Result<f64> {
    let (t, e) = (&truth.matrix, &est.matrix);
    if t.rows() != e.rows() || t.cols() != e.cols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", t.rows(), t.cols()),
            got: format!("{}x{}", e.rows(), e.cols()),
        });
    }
    let nc = t.cols();
    let mut acc = 0.0f64;
    for c in 0..nc {
        let mut dot = Complex64::new(0.0, 0.0);
        let mut nt = 0.0f64;
        let mut ne = 0.0f64;
        for a in 0..t.rows() {
            let tv = t[(a, c)];
            let ev = e[(a, c)];
            dot += ev.conj() * tv;
            nt += tv.norm_sqr();
            ne += ev.norm_sqr();
        }
        if nt == 0.0 || ne == 0.0 {
            return Err(Error::DegenerateSample(format!(
                "zero column {c} in cosine similarity"
            )));
        }
        acc += dot.norm() / (nt.sqrt() * ne.sqrt());
    }
    Ok(acc / nc as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::masking::{uniform_mask, Mask};

    fn sample_from(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> ChannelSample {
        let mut m = ComplexMatrix::zeros(rows, cols);
        for a in 0..rows {
            for c in 0..cols {
                m[(a, c)] = f(a, c);
            }
        }
        ChannelSample {
            matrix: m,
            path_gain_db: 0.0,
            scenario_tag: "t:dl".into(),
            location_id: 0,
        }
    }

    #[test]
    fn nmse_trivial_cases() {
        let t = sample_from(2, 2, |a, c| Complex64::new(1.0 + a as f64, c as f64));
        assert_eq!(nmse(&t, &t).unwrap(), 0.0);
        let zero = sample_from(2, 2, |_, _| Complex64::new(0.0, 0.0));
        assert_eq!(nmse(&t, &zero).unwrap(), 1.0);
        let double = sample_from(2, 2, |a, c| Complex64::new(2.0 * (1.0 + a as f64), 2.0 * c as f64));
        assert!((nmse(&t, &double).unwrap() - 1.0).abs() < 1e-12);
        assert!(nmse(&zero, &t).is_err());
    }

    #[test]
    fn cosine_trivial_cases() {
        let t = sample_from(2, 3, |a, c| Complex64::new(a as f64 + 1.0, c as f64 - 1.0));
        // Per-column complex scaling leaves the metric at 1.
        let scaled = sample_from(2, 3, |a, c| {
            Complex64::from_polar(2.0, 0.7 * c as f64) * Complex64::new(a as f64 + 1.0, c as f64 - 1.0)
        });
        assert!((cosine_similarity(&t, &scaled).unwrap() - 1.0).abs() < 1e-12);

        // Orthogonal columns.
        let e1 = sample_from(2, 1, |a, _| {
            if a == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let e2 = sample_from(2, 1, |a, _| {
            if a == 1 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        assert!(cosine_similarity(&e1, &e2).unwrap() < 1e-12);
    }

    #[test]
    fn cosine_hand_inner_product() {
        // h = [1, 0], est = [1, 1]: rho = 1/sqrt(2).
        let h = sample_from(2, 1, |a, _| {
            if a == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let est = sample_from(2, 1, |_, _| Complex64::new(1.0, 0.0));
        let rho = cosine_similarity(&h, &est).unwrap();
        assert!((rho - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn interp_exact_on_affine_channel_full_rows() {
        // All antennas observed on 2 carriers; channel affine in the carrier
        // index is recovered exactly between them.
        let mask = Mask::from_pattern(
            2,
            4,
            vec![
                true, false, false, true, //
                true, false, false, true,
            ],
        )
        .unwrap();
        let truth = sample_from(2, 4, |a, c| {
            Complex64::new(1.0 + a as f64 + 0.5 * c as f64, -0.25 * c as f64)
        });
        let rec = linear_interp_recover(&truth, &mask).unwrap();
        for a in 0..2 {
            for c in 0..4 {
                assert!(
                    (rec.matrix[(a, c)] - truth.matrix[(a, c)]).norm() < 1e-12,
                    "mismatch at ({a},{c})"
                );
            }
        }
    }

    #[test]
    fn interp_exact_on_constant_channel() {
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let truth = sample_from(4, 8, |_, _| Complex64::new(0.7, -0.3));
        let rec = linear_interp_recover(&truth, &mask).unwrap();
        for a in 0..4 {
            for c in 0..8 {
                assert!((rec.matrix[(a, c)] - truth.matrix[(a, c)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn interp_hand_case_with_unobserved_row() {
        // 2 antennas x 4 carriers, antenna 0 observed at carriers 0 and 2.
        let mask = Mask::from_pattern(
            2,
            4,
            vec![
                true, false, true, false, //
                false, false, false, false,
            ],
        )
        .unwrap();
        let truth = sample_from(2, 4, |a, c| Complex64::new((a * 10 + c) as f64, 0.0));
        let rec = linear_interp_recover(&truth, &mask).unwrap();
        // Row 0: observed 0 and 2, midpoint at 1, held at 3.
        assert!((rec.matrix[(0, 0)].re - 0.0).abs() < 1e-12);
        assert!((rec.matrix[(0, 1)].re - 1.0).abs() < 1e-12);
        assert!((rec.matrix[(0, 2)].re - 2.0).abs() < 1e-12);
        assert!((rec.matrix[(0, 3)].re - 2.0).abs() < 1e-12);
        // Row 1 is unobserved: copied from the only observed row.
        for c in 0..4 {
            assert_eq!(rec.matrix[(1, c)], rec.matrix[(0, c)]);
        }
    }

    #[test]
    fn interp_reproduces_observed_entries() {
        let mask = uniform_mask(4, 8, 0.125).unwrap();
        let truth = sample_from(4, 8, |a, c| {
            Complex64::new((a as f64 * 1.3).sin(), (c as f64 * 0.7).cos())
        });
        let rec = linear_interp_recover(&truth, &mask).unwrap();
        for (a, c) in mask.kept_positions() {
            assert_eq!(rec.matrix[(a, c)], truth.matrix[(a, c)]);
        }
    }

    #[test]
    fn interp_needs_two_carriers() {
        let mask = Mask::from_pattern(2, 4, vec![true, false, false, false, false, false, false, false])
            .unwrap();
        let truth = sample_from(2, 4, |_, _| Complex64::new(1.0, 0.0));
        assert!(linear_interp_recover(&truth, &mask).is_err());
    }
}
