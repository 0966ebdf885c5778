//! Successive zero-forcing precoding with combined user selection (the
//! linear allocation scheme used for the rate evaluation) and water-filling
//! power allocation.
//!
//! Per carrier, users are selected greedily by the norm of their channel
//! component orthogonal to the span of the already selected channels. The
//! stacked selected channels are LQ-decomposed and a second precoding step
//! diagonalizes the effective channel, giving a zero-forcing solution whose
//! per-stream gains are water-filled under the total power budget. Noise
//! power is normalized to one, so the SNR axis equals the transmit power.

use num_complex::Complex64;

use crate::channel::ChannelSample;
use crate::error::{Error, Result};
use crate::numerics::{lq_decompose, solve_lower_triangular, ComplexMatrix};

/// Orthogonal-component threshold below which a candidate user is dropped.
pub const SELECTION_TOLERANCE: f64 = 1e-9;

/// A multi-user downlink instance: one channel matrix per single-antenna
/// user, shared dimensions, unit noise power and a total power budget.
#[derive(Debug, Clone)]
pub struct MultiUserChannel {
    pub users: Vec<ChannelSample>,
    pub total_power: f64,
}

impl MultiUserChannel {
    pub fn new(users: Vec<ChannelSample>, total_power: f64) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::Argument("no users".into()));
        }
        let (na, nc) = (users[0].matrix.rows(), users[0].matrix.cols());
        if users
            .iter()
            .any(|u| u.matrix.rows() != na || u.matrix.cols() != nc)
        {
            return Err(Error::DimensionMismatch {
                expected: format!("{na}x{nc} for every user"),
                got: "mixed user dimensions".into(),
            });
        }
        if total_power <= 0.0 {
            return Err(Error::Argument("total power must be positive".into()));
        }
        Ok(MultiUserChannel { users, total_power })
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_carriers(&self) -> usize {
        self.users[0].matrix.cols()
    }

    /// Channel vectors of all users on one carrier.
    pub fn carrier_channels(&self, carrier: usize) -> Vec<Vec<Complex64>> {
        self.users.iter().map(|u| u.matrix.col(carrier)).collect()
    }
}

/// Allocation on a single carrier: selected users in selection order, their
/// unit-norm precoding vectors, powers and rate contributions.
#[derive(Debug, Clone)]
pub struct PrecodingAllocation {
    pub selected: Vec<usize>,
    pub precoders: Vec<Vec<Complex64>>,
    pub gains: Vec<f64>,
    pub powers: Vec<f64>,
    pub rates: Vec<f64>,
}

impl PrecodingAllocation {
    pub fn empty() -> Self {
        PrecodingAllocation {
            selected: Vec::new(),
            precoders: Vec::new(),
            gains: Vec::new(),
            powers: Vec::new(),
            rates: Vec::new(),
        }
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

/// Water-filling over parallel channels with gains `g_i`:
/// `p_i = max(0, mu - 1/g_i)` with `mu` chosen so the powers sum to the
/// budget. Zero gains are excluded; if every gain is zero the allocation is
/// all zero.
pub fn waterfill(gains: &[f64], total_power: f64) -> Result<Vec<f64>> {
    if total_power <= 0.0 {
        return Err(Error::Argument("power budget must be positive".into()));
    }
    if gains.iter().any(|&g| g < 0.0 || !g.is_finite()) {
        return Err(Error::Argument("gains must be finite and nonnegative".into()));
    }
    let mut powers = vec![0.0; gains.len()];
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Ok(powers);
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]));

    // Shrink the active set until the weakest active channel stays
    // nonnegative at the common water level.
    let mut inv_sum = 0.0;
    let inv: Vec<f64> = order.iter().map(|&i| 1.0 / gains[i]).collect();
    for v in &inv {
        inv_sum += v;
    }
    let mut m = order.len();
    loop {
        let mu = (total_power + inv_sum) / m as f64;
        if mu >= inv[m - 1] || m == 1 {
            for (rank, &i) in order.iter().take(m).enumerate() {
                powers[i] = (mu - inv[rank]).max(0.0);
            }
            break;
        }
        inv_sum -= inv[m - 1];
        m -= 1;
    }
    Ok(powers)
}

/// Greedy successive user selection plus diagonalizing zero-forcing on one
/// carrier. `channels[k]` is user k's length-`Na` channel vector.
pub fn lisa_select(channels: &[Vec<Complex64>], total_power: f64) -> Result<PrecodingAllocation> {
    if channels.is_empty() {
        return Err(Error::Argument("no users".into()));
    }
    let na = channels[0].len();
    if na == 0 || channels.iter().any(|h| h.len() != na) {
        return Err(Error::DimensionMismatch {
            expected: format!("length-{na} channel per user"),
            got: "mixed lengths".into(),
        });
    }

    // Successive selection: maximize the norm of the component orthogonal
    // to the span of the already selected channels.
    let mut basis: Vec<Vec<Complex64>> = Vec::new();
    let mut selected: Vec<usize> = Vec::new();
    let mut remaining: Vec<usize> = (0..channels.len()).collect();
    while !remaining.is_empty() && selected.len() < na {
        let mut best: Option<(usize, f64, Vec<Complex64>)> = None;
        for (pos, &k) in remaining.iter().enumerate() {
            let mut resid = channels[k].clone();
            for q in &basis {
                let dot: Complex64 = q
                    .iter()
                    .zip(&resid)
                    .map(|(qi, ri)| qi.conj() * ri)
                    .sum();
                for (r, qi) in resid.iter_mut().zip(q) {
                    *r -= dot * qi;
                }
            }
            let norm = resid.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if best.as_ref().map_or(true, |(_, bn, _)| norm > *bn) {
                best = Some((pos, norm, resid));
            }
        }
        let (pos, norm, resid) = best.expect("remaining is non-empty");
        if norm < SELECTION_TOLERANCE {
            break;
        }
        let q: Vec<Complex64> = resid.iter().map(|z| z / norm).collect();
        basis.push(q);
        selected.push(remaining.remove(pos));
    }

    if selected.is_empty() {
        return Ok(PrecodingAllocation::empty());
    }

    // Stack the selected rows h_k^H and factor S = L Q.
    let m = selected.len();
    let mut s = ComplexMatrix::zeros(m, na);
    for (i, &k) in selected.iter().enumerate() {
        for (j, &v) in channels[k].iter().enumerate() {
            s[(i, j)] = v.conj();
        }
    }
    let (l, q_rows) = lq_decompose(&s)?;

    // Second step: T = Q^H L^{-1} diagonalizes S T = I; normalizing column
    // i to unit norm leaves the effective gain 1 / ||L^{-1} e_i||^2.
    let mut precoders = Vec::with_capacity(m);
    let mut gains = Vec::with_capacity(m);
    for i in 0..m {
        let mut e = vec![Complex64::new(0.0, 0.0); m];
        e[i] = Complex64::new(1.0, 0.0);
        let c = solve_lower_triangular(&l, &e)?;
        let c_norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // t = Q^H c, with ||t|| = ||c|| because Q has orthonormal rows.
        let mut t = vec![Complex64::new(0.0, 0.0); na];
        for (row, ci) in c.iter().enumerate() {
            for (tj, qv) in t.iter_mut().zip(q_rows.row(row)) {
                *tj += qv.conj() * ci;
            }
        }
        for tj in &mut t {
            *tj /= c_norm;
        }
        precoders.push(t);
        gains.push(1.0 / (c_norm * c_norm));
    }

    let powers = waterfill(&gains, total_power)?;
    let rates = powers
        .iter()
        .zip(&gains)
        .map(|(&p, &g)| (1.0 + p * g).log2())
        .collect();
    Ok(PrecodingAllocation {
        selected,
        precoders,
        gains,
        powers,
        rates,
    })
}

/// Mean per-user achievable rate when the precoder and powers are computed
/// from `csi` but transmission happens over `truth`. Residual inter-user
/// interference is treated as noise:
/// `rate_k = log2(1 + p_k |h_k^H w_k|^2 / (1 + sum_{j!=k} p_j |h_k^H w_j|^2))`.
/// Users left unselected on a carrier contribute zero rate there.
pub fn evaluate_rate(truth: &MultiUserChannel, csi: &MultiUserChannel) -> Result<Vec<f64>> {
    if truth.n_users() != csi.n_users() {
        return Err(Error::Argument(format!(
            "user count mismatch: {} true vs {} CSI",
            truth.n_users(),
            csi.n_users()
        )));
    }
    if truth.n_carriers() != csi.n_carriers() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} carriers", truth.n_carriers()),
            got: format!("{}", csi.n_carriers()),
        });
    }
    let k_users = truth.n_users();
    let nc = truth.n_carriers();
    let mut rates = vec![0.0f64; k_users];
    for carrier in 0..nc {
        let alloc = lisa_select(&csi.carrier_channels(carrier), csi.total_power)?;
        if alloc.selected.is_empty() {
            continue;
        }
        let true_channels = truth.carrier_channels(carrier);
        for (i, &user) in alloc.selected.iter().enumerate() {
            if alloc.powers[i] == 0.0 {
                continue;
            }
            let h = &true_channels[user];
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, w) in alloc.precoders.iter().enumerate() {
                if alloc.powers[j] == 0.0 {
                    continue;
                }
                let dot: Complex64 = h.iter().zip(w).map(|(hv, wv)| hv.conj() * wv).sum();
                let p_gain = alloc.powers[j] * dot.norm_sqr();
                if j == i {
                    signal = p_gain;
                } else {
                    interference += p_gain;
                }
            }
            rates[user] += (1.0 + signal / (1.0 + interference)).log2();
        }
    }
    for r in &mut rates {
        *r /= nc as f64;
    }
    Ok(rates)
}

/// Allocation sum rate for a forced selection order (used by the
/// exhaustive-ordering oracle in tests).
pub fn allocation_rate_for_order(
    channels: &[Vec<Complex64>],
    order: &[usize],
    total_power: f64,
) -> Result<f64> {
    let na = channels[0].len();
    let mut s = ComplexMatrix::zeros(order.len(), na);
    for (i, &k) in order.iter().enumerate() {
        for (j, &v) in channels[k].iter().enumerate() {
            s[(i, j)] = v.conj();
        }
    }
    let (l, _q) = lq_decompose(&s)?;
    let mut gains = Vec::with_capacity(order.len());
    for i in 0..order.len() {
        let mut e = vec![Complex64::new(0.0, 0.0); order.len()];
        e[i] = Complex64::new(1.0, 0.0);
        let c = solve_lower_triangular(&l, &e)?;
        gains.push(1.0 / c.iter().map(|z| z.norm_sqr()).sum::<f64>());
    }
    let powers = waterfill(&gains, total_power)?;
    Ok(powers
        .iter()
        .zip(&gains)
        .map(|(&p, &g)| (1.0 + p * g).log2())
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn waterfill_single_channel() {
        let p = waterfill(&[0.7], 2.5).unwrap();
        assert!((p[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn waterfill_hand_kkt_case() {
        // g = [1, 0.25], P = 3: the weaker channel sits exactly at the
        // activation boundary and receives nothing.
        let p = waterfill(&[1.0, 0.25], 3.0).unwrap();
        assert_eq!(p, vec![3.0, 0.0]);
        let rate: f64 = p
            .iter()
            .zip([1.0, 0.25])
            .map(|(&pi, gi)| (1.0 + pi * gi).log2())
            .sum();
        assert!((rate - 2.0).abs() < 1e-12);
    }

    #[test]
    fn waterfill_symmetric() {
        let p = waterfill(&[1.0, 1.0], 2.0).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!((p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn waterfill_all_zero_gains() {
        let p = waterfill(&[0.0, 0.0], 5.0).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
    }

    #[test]
    fn waterfill_budget_and_kkt_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.gen_range(1..6);
            let gains: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0).collect();
            let total = 0.1 + rng.gen::<f64>() * 10.0;
            let p = waterfill(&gains, total).unwrap();
            if gains.iter().any(|&g| g > 0.0) {
                let sum: f64 = p.iter().sum();
                assert!((sum - total).abs() < 1e-12, "budget violated: {sum}");
                let levels: Vec<f64> = p
                    .iter()
                    .zip(&gains)
                    .filter(|(&pi, _)| pi > 0.0)
                    .map(|(&pi, &gi)| pi + 1.0 / gi)
                    .collect();
                for w in levels.windows(2) {
                    assert!((w[0] - w[1]).abs() < 1e-9, "water level drift");
                }
            }
        }
    }

    #[test]
    fn single_user_is_matched_filter() {
        let h = vec![c(1.0, 0.5), c(-0.25, 0.75), c(0.0, -1.0)];
        let norm_sqr: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        let p = 3.7;
        let alloc = lisa_select(&[h.clone()], p).unwrap();
        assert_eq!(alloc.selected, vec![0]);
        assert!((alloc.gains[0] - norm_sqr).abs() < 1e-9);
        let expected = (1.0 + p * norm_sqr).log2();
        assert!((alloc.sum_rate() - expected).abs() < 1e-9);
        // Matched-filter direction.
        let w = &alloc.precoders[0];
        let dot: Complex64 = h.iter().zip(w).map(|(hv, wv)| hv.conj() * wv).sum();
        assert!((dot.norm_sqr() - norm_sqr).abs() < 1e-9);
    }

    #[test]
    fn two_orthogonal_users_split_evenly() {
        let h1 = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let h2 = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let alloc = lisa_select(&[h1, h2], 2.0).unwrap();
        assert_eq!(alloc.selected.len(), 2);
        for i in 0..2 {
            assert!((alloc.powers[i] - 1.0).abs() < 1e-12);
            assert!((alloc.rates[i] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_channels_give_zero_allocation() {
        let h = vec![c(0.0, 0.0); 4];
        let alloc = lisa_select(&[h.clone(), h], 2.0).unwrap();
        assert!(alloc.selected.is_empty());
        assert_eq!(alloc.sum_rate(), 0.0);
    }

    #[test]
    fn greedy_matches_exhaustive_orderings_two_users() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut matches = 0;
        let trials = 100;
        for _ in 0..trials {
            let channels: Vec<Vec<Complex64>> = (0..2)
                .map(|_| {
                    (0..4)
                        .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                        .collect()
                })
                .collect();
            let p = 4.0;
            let greedy = lisa_select(&channels, p).unwrap().sum_rate();
            let mut best = 0.0f64;
            for order in [vec![0usize, 1], vec![1, 0]] {
                if let Ok(rate) = allocation_rate_for_order(&channels, &order, p) {
                    best = best.max(rate);
                }
            }
            if greedy >= best - 1e-9 {
                matches += 1;
            }
        }
        assert!(matches * 100 >= trials * 95, "only {matches}/{trials} matched");
    }

    #[test]
    fn perfect_csi_has_no_interference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let channels: Vec<Vec<Complex64>> = (0..3)
            .map(|_| {
                (0..4)
                    .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        let p = 6.0;
        let alloc = lisa_select(&channels, p).unwrap();
        for (i, &ki) in alloc.selected.iter().enumerate() {
            for (j, w) in alloc.precoders.iter().enumerate() {
                let dot: Complex64 = channels[ki]
                    .iter()
                    .zip(w)
                    .map(|(hv, wv)| hv.conj() * wv)
                    .sum();
                if i == j {
                    assert!((dot.norm_sqr() - alloc.gains[i]).abs() < 1e-9);
                } else {
                    assert!(dot.norm() < 1e-9, "leakage {}", dot.norm());
                }
            }
        }
    }

    #[test]
    fn perfect_csi_rate_monotone_in_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let channels: Vec<Vec<Complex64>> = (0..4)
            .map(|_| {
                (0..4)
                    .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    .collect()
            })
            .collect();
        let mut last = 0.0;
        for p_db in [-10.0f64, 0.0, 10.0, 20.0, 30.0] {
            let p = 10f64.powf(p_db / 10.0);
            let rate = lisa_select(&channels, p).unwrap().sum_rate();
            assert!(rate >= last - 1e-12);
            last = rate;
        }
    }
}
