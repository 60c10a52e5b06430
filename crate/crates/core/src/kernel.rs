//! Orthonormal polynomial basis of `P^2_N(C, mu)` with
//! `d mu = exp(-beta Phi) dA`, its reproducing kernel, the determinantal
//! correlation densities and the partition function `Z_N`.
//!
//! The basis comes from the Cholesky factor `G = L L^*` of the monomial Gram
//! matrix: row `k` of `L^{-1}` holds the monomial coefficients of the `k`-th
//! orthonormal polynomial, and `L[k][k]` is the norm of the monic orthogonal
//! polynomial of degree `k`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::exec::Exec;
use crate::grid::BoxGrid;
use crate::linalg::{self, Determinant};
use crate::potential::{ComplexPoint, Potential};
use crate::quadrature::{gram_matrix, radial_moments};

/// Largest accepted condition number of the diagonally scaled Gram matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Maximum deviation of the reconstructed basis from orthonormality.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug)]
pub struct BasisOptions {
    pub exec: Exec,
    /// Use one-dimensional radial moments (diagonal Gram matrix) when the
    /// potential is radial.
    pub radial_fast_path: bool,
}

impl Default for BasisOptions {
    fn default() -> Self {
        Self { exec: Exec::default(), radial_fast_path: true }
    }
}

#[derive(Clone, Debug)]
pub struct WeightedBasis {
    n: usize,
    beta: f64,
    potential: Potential,
    /// Row-major lower-triangular `n x n`.
    coeffs: Vec<Complex64>,
    norms: Vec<f64>,
    scaled_condition: f64,
}

/// Builds the basis with default options (radial fast path when possible).
pub fn build_basis(pot: &Potential, beta: f64, n: usize, grid: &BoxGrid) -> Result<WeightedBasis> {
    build_basis_with(pot, beta, n, grid, BasisOptions::default())
}

pub fn build_basis_with(
    pot: &Potential,
    beta: f64,
    n: usize,
    grid: &BoxGrid,
    opts: BasisOptions,
) -> Result<WeightedBasis> {
    if n == 0 {
        return Err(arg("basis dimension must be at least 1"));
    }
    let gram = if opts.radial_fast_path && pot.is_radial() {
        let diag = radial_moments(pot, beta, n)?;
        let mut g = vec![Complex64::new(0.0, 0.0); n * n];
        for (j, d) in diag.into_iter().enumerate() {
            g[j * n + j] = Complex64::new(d, 0.0);
        }
        g
    } else {
        gram_matrix(grid, pot, beta, n, opts.exec)?
    };
    WeightedBasis::from_gram(pot.clone(), beta, n, &gram)
}

impl WeightedBasis {
    /// Orthonormalizes the monomials against a precomputed Gram matrix.
    pub fn from_gram(potential: Potential, beta: f64, n: usize, gram: &[Complex64]) -> Result<Self> {
        if gram.len() != n * n {
            return Err(arg("Gram matrix has the wrong size"));
        }
        let scale: Vec<f64> = (0..n).map(|j| gram[j * n + j].re.sqrt()).collect();
        if let Some(j) = scale.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::IllConditionedMoments { pivot: j });
        }
        let scaled: Vec<Complex64> = (0..n * n)
            .map(|idx| gram[idx] / (scale[idx / n] * scale[idx % n]))
            .collect();
        let ev = linalg::hermitian_eigenvalues(&scaled, n);
        let scaled_condition = if ev[0] > 0.0 { ev[n - 1] / ev[0] } else { f64::INFINITY };
        let l = linalg::cholesky(gram, n).map_err(|pivot| Error::IllConditionedMoments { pivot })?;
        if scaled_condition > CONDITION_LIMIT {
            return Err(Error::Conditioning { condition: scaled_condition, limit: CONDITION_LIMIT });
        }
        let coeffs = linalg::invert_lower(&l, n);
        let norms = (0..n).map(|k| l[k * n + k].re).collect();
        let basis = Self { n, beta, potential, coeffs, norms, scaled_condition };
        let defect = basis.orthonormality_defect(gram);
        if defect > ORTHONORMALITY_TOL {
            return Err(Error::Inconsistency(format!(
                "basis orthonormality defect {defect:.3e} exceeds {ORTHONORMALITY_TOL:.0e}"
            )));
        }
        Ok(basis)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// Coefficient of `z^j` in the `k`-th orthonormal polynomial (`j <= k`).
    pub fn coeff(&self, k: usize, j: usize) -> Complex64 {
        self.coeffs[k * self.n + j]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Norms of the monic orthogonal polynomials.
    pub fn norms(&self) -> &[f64] {
        &self.norms
    }

    pub fn scaled_condition(&self) -> f64 {
        self.scaled_condition
    }

    /// `max |<phi_j, phi_k> - delta_jk|` measured against `gram`.
    pub fn orthonormality_defect(&self, gram: &[Complex64]) -> f64 {
        let n = self.n;
        let cg = linalg::matmul(&self.coeffs, gram, n);
        let m = linalg::matmul(&cg, &linalg::adjoint(&self.coeffs, n), n);
        (0..n * n)
            .map(|idx| {
                let e = if idx / n == idx % n { 1.0 } else { 0.0 };
                (m[idx] - e).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Values of all orthonormal polynomials at `z` (Horner per polynomial).
    pub fn evaluate(&self, z: ComplexPoint) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let row = &self.coeffs[k * n..k * n + k + 1];
                row.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
            })
            .collect()
    }

    /// `K(z, w) = sum_k phi_k(z) conj(phi_k(w))`.
    pub fn kernel(&self, z: ComplexPoint, w: ComplexPoint) -> Complex64 {
        let pz = self.evaluate(z);
        let pw = self.evaluate(w);
        pz.iter().zip(&pw).map(|(a, b)| a * b.conj()).sum()
    }

    /// `K(z, z)`, real and non-negative.
    pub fn kernel_diagonal(&self, z: ComplexPoint) -> f64 {
        self.evaluate(z).iter().map(|v| v.norm_sqr()).sum()
    }

    /// `K(z, z)` for many points.
    pub fn kernel_diagonal_batch(&self, zs: &[ComplexPoint], exec: Exec) -> Vec<f64> {
        exec.map_range(zs.len(), |i| self.kernel_diagonal(zs[i]))
    }

    /// `log Z_N = log N! + 2 sum_k log ||monic_k||`.
    pub fn log_partition_function(&self) -> f64 {
        ln_factorial(self.n) + 2.0 * self.norms.iter().map(|v| v.ln()).sum::<f64>()
    }

    pub fn to_cache(&self) -> BasisCache {
        let n = self.n;
        let mut coeffs = Vec::with_capacity(n * (n + 1) / 2);
        for k in 0..n {
            for j in 0..=k {
                let c = self.coeff(k, j);
                coeffs.push([c.re, c.im]);
            }
        }
        BasisCache {
            n,
            beta: self.beta,
            potential: self.potential.descriptor(),
            norms: self.norms.clone(),
            coeffs,
        }
    }

    /// Restores a cached basis; `potential` must match the stored descriptor.
    pub fn from_cache(cache: &BasisCache, potential: Potential) -> Result<Self> {
        if cache.potential != potential.descriptor() {
            return Err(arg("cached basis was built for a different potential"));
        }
        let n = cache.n;
        if cache.norms.len() != n || cache.coeffs.len() != n * (n + 1) / 2 {
            return Err(arg("basis cache has inconsistent sizes"));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n * n];
        let mut it = cache.coeffs.iter();
        for k in 0..n {
            for j in 0..=k {
                let [re, im] = *it.next().expect("size checked");
                coeffs[k * n + j] = Complex64::new(re, im);
            }
        }
        Ok(Self {
            n,
            beta: cache.beta,
            potential,
            coeffs,
            norms: cache.norms.clone(),
            scaled_condition: f64::NAN,
        })
    }
}

/// On-disk form of a [`WeightedBasis`]: coefficients are the lower triangle
/// in row-major order as `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisCache {
    #[serde(rename = "N")]
    pub n: usize,
    pub beta: f64,
    pub potential: serde_json::Value,
    pub norms: Vec<f64>,
    pub coeffs: Vec<[f64; 2]>,
}

impl BasisCache {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// `[K(z_j, w_k)]_{j,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelMatrix {
    n: usize,
    entries: Vec<Complex64>,
}

impl KernelMatrix {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, j: usize, k: usize) -> Complex64 {
        self.entries[j * self.n + k]
    }

    pub fn determinant(&self) -> Determinant {
        linalg::determinant(&self.entries, self.n)
    }

    /// Eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.n;
        let herm: Vec<Complex64> = (0..n * n)
            .map(|idx| 0.5 * (self.entries[idx] + self.entries[(idx % n) * n + idx / n].conj()))
            .collect();
        linalg::hermitian_eigenvalues(&herm, n)
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|j| self.get(j, j).re).sum()
    }

    /// Hermitian up to rounding with eigenvalues `>= -1e-10 * trace`.
    pub fn is_hermitian_psd(&self) -> bool {
        let n = self.n;
        let scale = self.trace().abs().max(f64::MIN_POSITIVE);
        for j in 0..n {
            for k in 0..n {
                if (self.get(j, k) - self.get(k, j).conj()).norm() > 1e-12 * scale {
                    return false;
                }
            }
        }
        self.eigenvalues()[0] >= -1e-10 * scale
    }
}

pub fn kernel_matrix(
    basis: &WeightedBasis,
    zs: &[ComplexPoint],
    ws: &[ComplexPoint],
) -> Result<KernelMatrix> {
    if zs.is_empty() || zs.len() != ws.len() {
        return Err(arg(format!(
            "kernel matrix needs two non-empty lists of equal length, got {} and {}",
            zs.len(),
            ws.len()
        )));
    }
    let n = zs.len();
    let pz: Vec<_> = zs.iter().map(|&z| basis.evaluate(z)).collect();
    let pw: Vec<_> = ws.iter().map(|&w| basis.evaluate(w)).collect();
    let mut entries = Vec::with_capacity(n * n);
    for a in &pz {
        for b in &pw {
            entries.push(a.iter().zip(b).map(|(x, y)| x * y.conj()).sum());
        }
    }
    Ok(KernelMatrix { n, entries })
}

/// Density of the `n`-point correlation measure with respect to Lebesgue
/// measure on `C^n`: `det[K(z_j, z_k)] * prod exp(-beta Phi(z_j))`.
pub fn correlation_density(basis: &WeightedBasis, zs: &[ComplexPoint]) -> Result<f64> {
    let n = zs.len();
    if n == 0 || n > basis.dimension() {
        return Err(arg(format!(
            "correlation order {n} must be between 1 and N = {}",
            basis.dimension()
        )));
    }
    let det = kernel_matrix(basis, zs, zs)?.determinant();
    if det.is_zero() {
        return Ok(0.0);
    }
    let mut log_weight = 0.0;
    for &z in zs {
        log_weight -= basis.beta() * basis.potential().phi(z)?;
    }
    Ok((det.value().re).max(0.0) * (log_weight).exp())
}

/// `Z_N = N! prod_k ||monic_k||^2`.
pub fn compute_z(basis: &WeightedBasis) -> f64 {
    basis.log_partition_function().exp()
}

/// Whether `det K^n_N(zs, zs) <= det K^n_{N+1}(zs, zs)` up to `1e-10` of
/// the Hadamard bound `prod K_{N+1}(z_i, z_i)`.
pub fn check_monotone_growth(
    basis_n: &WeightedBasis,
    basis_next: &WeightedBasis,
    zs: &[ComplexPoint],
) -> Result<bool> {
    if basis_n.potential() != basis_next.potential()
        || basis_n.beta() != basis_next.beta()
        || basis_next.dimension() != basis_n.dimension() + 1
    {
        return Err(arg("monotone growth check needs consecutive bases of one weight"));
    }
    let a = kernel_matrix(basis_n, zs, zs)?.determinant().value().re;
    let next = kernel_matrix(basis_next, zs, zs)?;
    let b = next.determinant().value().re;
    let bound: f64 = (0..next.size()).map(|j| next.get(j, j).re).product();
    Ok(a <= b + 1e-10 * bound)
}

/// Whether `det(A + B) >= max(det A, det B)` for Hermitian positive
/// semi-definite `A`, `B` (row-major, `n x n`), up to `1e-10` of the
/// Hadamard bound `prod (A + B)_ii`.
pub fn det_sum_dominates(a: &[Complex64], b: &[Complex64], n: usize) -> Result<bool> {
    if n == 0 || a.len() != n * n || b.len() != n * n {
        return Err(arg("matrices must be square and of equal size"));
    }
    let sum: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let da = linalg::determinant(a, n).value().re;
    let db = linalg::determinant(b, n).value().re;
    let ds = linalg::determinant(&sum, n).value().re;
    let bound: f64 = (0..n).map(|i| sum[i * n + i].re).product();
    Ok(ds >= da.max(db) - 1e-10 * bound)
}

pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}
