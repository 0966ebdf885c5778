use serde::Serialize;

use crate::error::{Error, Result};

/// Box statistics of a sample: quartiles plus the 1.5·IQR whisker fences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
}

/// Percentile with linear interpolation between closest ranks, matching the
/// convention of the standard plotting libraries. `p` is in [0, 1] and
/// `sorted` must be ascending.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::Argument("percentile of empty sequence".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("percentile p={p} outside [0,1]")));
    }
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = lo.min(n - 2) + 1;
    let frac = h - lo as f64;
    Ok(sorted[lo] + frac * (sorted[hi] - sorted[lo]))
}

pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    percentile_sorted(&sorted, p)
}

/// Quartiles and whisker fences (`q1 - 1.5·IQR`, `q3 + 1.5·IQR`).
pub fn quartiles(values: &[f64]) -> Result<Quartiles> {
    if values.is_empty() {
        return Err(Error::Argument("quartiles of empty sequence".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = percentile_sorted(&sorted, 0.25)?;
    let median = percentile_sorted(&sorted, 0.5)?;
    let q3 = percentile_sorted(&sorted, 0.75)?;
    let iqr = q3 - q1;
    Ok(Quartiles {
        q1,
        median,
        q3,
        whisker_lo: q1 - 1.5 * iqr,
        whisker_hi: q3 + 1.5 * iqr,
    })
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> Result<f64> {
    percentile(values, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_constant() {
        let q = quartiles(&[5.0, 5.0, 5.0, 5.0]).unwrap();
        assert_eq!(q.q1, 5.0);
        assert_eq!(q.median, 5.0);
        assert_eq!(q.q3, 5.0);
        assert_eq!(q.whisker_lo, 5.0);
        assert_eq!(q.whisker_hi, 5.0);
    }

    #[test]
    fn quartiles_hand_case() {
        // Linear interpolation between closest ranks on 1..=8.
        let q = quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert!((q.q1 - 2.75).abs() < 1e-12);
        assert!((q.median - 4.5).abs() < 1e-12);
        assert!((q.q3 - 6.25).abs() < 1e-12);
        assert!((q.whisker_lo - (2.75 - 1.5 * 3.5)).abs() < 1e-12);
        assert!((q.whisker_hi - (6.25 + 1.5 * 3.5)).abs() < 1e-12);
    }

    #[test]
    fn quartiles_two_points() {
        let q = quartiles(&[0.0, 10.0]).unwrap();
        assert!((q.median - 5.0).abs() < 1e-12);
    }

    #[test]
    fn quartiles_empty_is_error() {
        assert!(quartiles(&[]).is_err());
    }

    #[test]
    fn percentile_endpoints() {
        let v = [3.0, 1.0, 2.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 1.0).unwrap(), 3.0);
    }
}
