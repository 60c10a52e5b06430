//! Small dense complex linear algebra: Cholesky, triangular inversion and
//! log-determinants. Matrices are row-major `n x n` slices.

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Lower Cholesky factor of a Hermitian matrix. On failure returns the index
/// of the first non-positive pivot.
pub fn cholesky(a: &[Complex64], n: usize) -> Result<Vec<Complex64>, usize> {
    assert_eq!(a.len(), n * n);
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= l[j * n + k].norm_sqr();
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(j);
        }
        let djj = d.sqrt();
        l[j * n + j] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// Inverse of a lower-triangular matrix with non-zero diagonal.
pub fn invert_lower(l: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut inv = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        inv[i * n + i] = l[i * n + i].inv();
        for j in (0..i).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for k in j..i {
                s += l[i * n + k] * inv[k * n + j];
            }
            inv[i * n + j] = -s / l[i * n + i];
        }
    }
    inv
}

/// Determinant stored as a unit phase times `exp(log_abs)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Determinant {
    pub phase: Complex64,
    pub log_abs: f64,
}

impl Determinant {
    pub fn value(&self) -> Complex64 {
        if self.log_abs == f64::NEG_INFINITY {
            Complex64::new(0.0, 0.0)
        } else {
            self.phase * self.log_abs.exp()
        }
    }

    pub fn is_zero(&self) -> bool {
        self.log_abs == f64::NEG_INFINITY
    }
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &[Complex64], n: usize) -> Determinant {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut phase = Complex64::new(1.0, 0.0);
    let mut log_abs = 0.0;
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, m[r * n + col].norm()))
            .fold((col, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == 0.0 {
            return Determinant { phase: Complex64::new(0.0, 0.0), log_abs: f64::NEG_INFINITY };
        }
        if piv != col {
            for k in 0..n {
                m.swap(piv * n + k, col * n + k);
            }
            phase = -phase;
        }
        let p = m[col * n + col];
        phase *= p / best;
        log_abs += best.ln();
        for r in col + 1..n {
            let f = m[r * n + col] / p;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for k in col + 1..n {
                let v = m[col * n + k];
                m[r * n + k] -= f * v;
            }
        }
    }
    Determinant { phase, log_abs }
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn hermitian_eigenvalues(a: &[Complex64], n: usize) -> Vec<f64> {
    let m = DMatrix::from_row_slice(n, n, a);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// `A B` for row-major square matrices.
pub fn matmul(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Conjugate transpose.
pub fn adjoint(a: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut t = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            t[j * n + i] = a[i * n + j].conj();
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<Complex64> {
        (0..rows * cols)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    /// `G G^*` for a rectangular `n x r` factor: PSD of rank at most `r`.
    fn gram(g: &[Complex64], n: usize, r: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..r {
                    out[i * n + j] += g[i * r + k] * g[j * r + k].conj();
                }
            }
        }
        out
    }

    #[test]
    fn cholesky_and_inverse_reconstruct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 6;
        let a = gram(&random_matrix(&mut rng, n, n + 2), n, n + 2);
        let l = cholesky(&a, n).unwrap();
        let back = matmul(&l, &adjoint(&l, n), n);
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).norm() < 1e-12);
        }
        let li = invert_lower(&l, n);
        let id = matmul(&li, &l, n);
        for i in 0..n {
            for j in 0..n {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[i * n + j] - e).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_reports_pivot() {
        let mut a = vec![Complex64::new(0.0, 0.0); 9];
        a[0] = Complex64::new(1.0, 0.0);
        a[4] = Complex64::new(1.0, 0.0);
        a[8] = Complex64::new(-1.0, 0.0);
        assert_eq!(cholesky(&a, 3), Err(2));
    }

    #[test]
    fn determinant_matches_cholesky_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 5;
        let a = gram(&random_matrix(&mut rng, n, n), n, n);
        let l = cholesky(&a, n).unwrap();
        let prod: f64 = (0..n).map(|i| l[i * n + i].re.powi(2)).product();
        let d = determinant(&a, n).value();
        assert!((d.re - prod).abs() < 1e-10 * prod && d.im.abs() < 1e-10 * prod);
    }

    #[test]
    fn repeated_row_gives_zero_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = random_matrix(&mut rng, 4, 4);
        for k in 0..4 {
            a[3 * 4 + k] = a[4 + k];
        }
        let d = determinant(&a, 4);
        assert!(d.is_zero() || d.value().norm() < 1e-14);
    }

    #[test]
    fn det_of_sum_dominates_summands_on_200_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..200 {
            let n = 1 + trial % 6;
            let ra = 1 + rng.random_range(0..=n);
            let rb = 1 + rng.random_range(0..=n);
            let a = gram(&random_matrix(&mut rng, n, ra), n, ra);
            let b = gram(&random_matrix(&mut rng, n, rb), n, rb);
            let sum: Vec<_> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let da = determinant(&a, n).value().re;
            let db = determinant(&b, n).value().re;
            let ds = determinant(&sum, n).value().re;
            let scale = 1e-10 * (1.0 + ds.abs());
            assert!(ds + scale >= da.max(db), "trial {trial}: {ds} < max({da}, {db})");
        }
    }

    proptest! {
        #[test]
        fn hermitian_eigenvalues_sum_to_trace(seed in 0u64..1000, n in 1usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = gram(&random_matrix(&mut rng, n, n), n, n);
            let ev = hermitian_eigenvalues(&a, n);
            let trace: f64 = (0..n).map(|i| a[i * n + i].re).sum();
            prop_assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-10 * (1.0 + trace));
            prop_assert!(ev[0] > -1e-10 * trace);
        }
    }
}
