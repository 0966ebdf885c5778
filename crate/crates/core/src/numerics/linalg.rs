use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexMatrix;

/// Relative tolerance below which a diagonal entry of the L factor marks the
/// input as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// LQ decomposition of a wide matrix: `m = L * Q` with `L` lower triangular
/// (real, nonnegative diagonal) and `Q` having orthonormal rows.
///
/// Computed as a Householder QR of the conjugate transpose, so one routine
/// serves both factorization needs.
pub fn lq_decompose(m: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    if m.rows() > m.cols() {
        return Err(Error::Argument(format!(
            "lq_decompose expects rows <= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let a = m.hermitian();
    let (q, r) = qr_decompose(&a)?;

    // L = R^H is lower triangular with the same (real) diagonal.
    let l = r.hermitian();
    let q_rows = q.hermitian();

    let mut min_d = f64::INFINITY;
    let mut max_d: f64 = 0.0;
    let mut min_idx = 0;
    for i in 0..l.rows() {
        let d = l[(i, i)].norm();
        if d < min_d {
            min_d = d;
            min_idx = i;
        }
        max_d = max_d.max(d);
    }
    if min_d < RANK_TOLERANCE * max_d {
        return Err(Error::SingularMatrix {
            index: min_idx,
            value: min_d,
        });
    }
    Ok((l, q_rows))
}

/// Thin Householder QR of a tall matrix `a` (rows >= cols): `a = Q * R` with
/// `Q` having orthonormal columns and `R` upper triangular with real,
/// nonnegative diagonal.
pub fn qr_decompose(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let n = a.rows();
    let m = a.cols();
    if n < m {
        return Err(Error::Argument(format!(
            "qr_decompose expects rows >= cols, got {n}x{m}"
        )));
    }

    let mut work = a.clone();
    // Householder vectors, one per column, stored full-length for simplicity.
    let mut reflectors: Vec<Vec<Complex64>> = Vec::with_capacity(m);

    for k in 0..m {
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        let norm_x: f64 = (k..n).map(|i| work[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm_x > 0.0 {
            let x0 = work[(k, k)];
            // alpha = -exp(i*arg(x0)) * |x|, chosen to avoid cancellation.
            let phase = if x0.norm() > 0.0 {
                x0 / x0.norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            let alpha = -phase * norm_x;
            for i in k..n {
                v[i] = work[(i, k)];
            }
            v[k] -= alpha;
            let v_norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if v_norm_sqr > 0.0 {
                // Apply H = I - 2 v v^H / |v|^2 to the trailing block.
                for j in k..m {
                    let mut dot = Complex64::new(0.0, 0.0);
                    for i in k..n {
                        dot += v[i].conj() * work[(i, j)];
                    }
                    let scale = dot * (2.0 / v_norm_sqr);
                    for i in k..n {
                        let upd = scale * v[i];
                        work[(i, j)] -= upd;
                    }
                }
            }
            reflectors.push(v);
        } else {
            reflectors.push(v);
        }
    }

    // Accumulate the thin Q by applying the reflectors in reverse to the
    // first m columns of the identity.
    let mut q = ComplexMatrix::zeros(n, m);
    for j in 0..m {
        q[(j, j)] = Complex64::new(1.0, 0.0);
    }
    for k in (0..m).rev() {
        let v = &reflectors[k];
        let v_norm_sqr: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if v_norm_sqr == 0.0 {
            continue;
        }
        for j in 0..m {
            let mut dot = Complex64::new(0.0, 0.0);
            for i in k..n {
                dot += v[i].conj() * q[(i, j)];
            }
            let scale = dot * (2.0 / v_norm_sqr);
            for i in k..n {
                let upd = scale * v[i];
                q[(i, j)] -= upd;
            }
        }
    }

    // Sign convention: rotate each column/row pair so diag(R) is real >= 0.
    let mut r = ComplexMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            r[(i, j)] = work[(i, j)];
        }
    }
    for i in 0..m {
        let d = r[(i, i)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            let inv = phase.conj();
            for j in i..m {
                r[(i, j)] *= inv;
            }
            for row in 0..n {
                q[(row, i)] *= phase;
            }
        }
    }

    Ok((q, r))
}

/// Solve `L x = b` for lower-triangular `L` by forward substitution.
pub fn solve_lower_triangular(l: &ComplexMatrix, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = l.rows();
    if l.cols() != n || b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("square {n}x{n} system"),
            got: format!("{}x{} with rhs {}", l.rows(), l.cols(), b.len()),
        });
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let mut acc = b[i];
        for j in 0..i {
            acc -= l[(i, j)] * x[j];
        }
        let d = l[(i, i)];
        if d.norm() == 0.0 {
            return Err(Error::SingularMatrix {
                index: i,
                value: 0.0,
            });
        }
        x[i] = acc / d;
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        let data = (0..rows * cols)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        ComplexMatrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn lq_identity() {
        let id = ComplexMatrix::identity(2);
        let (l, q) = lq_decompose(&id).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((l[(i, j)] - expect).norm() < 1e-14);
                assert!((q[(i, j)] - expect).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn lq_diagonal() {
        let mut m = ComplexMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(2.0, 0.0);
        m[(1, 1)] = Complex64::new(3.0, 0.0);
        let (l, q) = lq_decompose(&m).unwrap();
        assert!((l[(0, 0)].re - 2.0).abs() < 1e-14);
        assert!((l[(1, 1)].re - 3.0).abs() < 1e-14);
        assert!(l[(0, 1)].norm() < 1e-14);
        assert!((q[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((q[(1, 1)] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn lq_roundtrip_random_wide() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let m = random_matrix(&mut rng, 2, 4);
            let (l, q) = lq_decompose(&m).unwrap();
            let back = l.matmul(&q).unwrap();
            let mut max_err: f64 = 0.0;
            for i in 0..2 {
                for j in 0..4 {
                    max_err = max_err.max((back[(i, j)] - m[(i, j)]).norm());
                }
            }
            assert!(max_err < 1e-12, "reconstruction error {max_err}");

            // Q rows orthonormal.
            let qqh = q.matmul(&q.hermitian()).unwrap();
            let mut ortho_err: f64 = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    ortho_err = ortho_err.max((qqh[(i, j)] - expect).norm());
                }
            }
            assert!(ortho_err < 1e-12);

            // Diagonal real and nonnegative.
            for i in 0..2 {
                assert!(l[(i, i)].im.abs() < 1e-13);
                assert!(l[(i, i)].re >= 0.0);
            }
        }
    }

    #[test]
    fn lq_rank_deficient_errors() {
        let mut m = ComplexMatrix::zeros(2, 3);
        for j in 0..3 {
            m[(0, j)] = Complex64::new(1.0, j as f64);
            m[(1, j)] = Complex64::new(2.0, 2.0 * j as f64);
        }
        assert!(matches!(
            lq_decompose(&m),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn triangular_solve() {
        let mut l = ComplexMatrix::zeros(2, 2);
        l[(0, 0)] = Complex64::new(2.0, 0.0);
        l[(1, 0)] = Complex64::new(1.0, 0.0);
        l[(1, 1)] = Complex64::new(4.0, 0.0);
        let b = vec![Complex64::new(2.0, 0.0), Complex64::new(5.0, 0.0)];
        let x = solve_lower_triangular(&l, &b).unwrap();
        assert!((x[0] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        assert!((x[1] - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }
}
