//! Discrete measures on a grid, their logarithmic potentials and energies.
//!
//! A node weight stands for a density that is constant over the node's cell.
//! Cells within two cells of the evaluation point are integrated exactly
//! against `log(1/|z - w|)`; farther cells use the midpoint rule, whose
//! `h^2` error term vanishes because the kernel is harmonic there.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{BoxGrid, ScalarField};
use crate::potential::Potential;

use super::droplet::Droplet;
use super::obstacle::ObstacleSolution;

/// `exp` of the mean of `log|z|` over the unit square for `z` uniform and the
/// square centered at the origin.
pub const POINT_SELF_RADIUS: f64 = 0.346_048_816_099_827_96;

/// `exp` of the mean of `log|z - w|` for `z`, `w` independent and uniform on
/// the unit square.
pub const PAIR_SELF_RADIUS: f64 = 0.447_049_155_903_954_33;

/// Cells closer than this many cells (per axis) are integrated exactly.
const NEAR_CELLS: i64 = 2;

/// Relative threshold below which `Delta Phi` counts as zero.
pub const HARMONIC_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub grid: BoxGrid,
    /// Density at each node.
    pub weights: Vec<f64>,
    /// `h^2 sum weights`.
    pub total: f64,
}

impl DiscreteMeasure {
    pub fn new(grid: BoxGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(crate::error::arg("weight count does not match the grid"));
        }
        if let Some(index) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::NonFinite { index });
        }
        let total = weights.iter().sum::<f64>() * grid.cell_area();
        Ok(Self { grid, weights, total })
    }

    /// Uniform probability density on `{z : inside(z)}` (cell centers).
    pub fn uniform(grid: BoxGrid, inside: impl Fn(Complex64) -> bool) -> Result<Self> {
        let mask: Vec<bool> = (0..grid.len()).map(|k| inside(grid.point_at(k))).collect();
        let count = mask.iter().filter(|b| **b).count();
        if count == 0 {
            return Err(crate::error::arg("uniform measure on an empty set"));
        }
        let w = 1.0 / (count as f64 * grid.cell_area());
        Self::new(grid, mask.into_iter().map(|b| if b { w } else { 0.0 }).collect())
    }

    pub fn support(&self) -> Vec<bool> {
        self.weights.iter().map(|w| *w > 0.0).collect()
    }

    /// `int f d sigma`.
    pub fn integrate(&self, f: impl Fn(Complex64) -> Result<f64>) -> Result<f64> {
        let mut s = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            if *w > 0.0 {
                s += w * f(self.grid.point_at(k))?;
            }
        }
        Ok(s * self.grid.cell_area())
    }

    pub fn to_field(&self) -> Result<ScalarField> {
        ScalarField::new(self.grid, self.weights.clone())
    }
}

/// `{Delta Phi <= eps}` at the nodes, `eps = HARMONIC_EPS * max Delta Phi`.
pub fn harmonicity_set(pot: &Potential, grid: &BoxGrid) -> Result<Vec<bool>> {
    let lap: Vec<f64> =
        (0..grid.len()).map(|k| pot.laplacian(grid.point_at(k))).collect::<Result<_>>()?;
    let eps = HARMONIC_EPS * lap.iter().fold(0.0f64, |a, v| a.max(*v));
    Ok(lap.into_iter().map(|l| l <= eps).collect())
}

/// `Delta Phi / (4 pi tau)` times the cell coverage of the coincidence set.
/// Nodes with `Delta Phi <= eps` are trimmed; a clearly negative Laplacian
/// inside the coincidence set (away from its boundary band) is an error.
pub fn equilibrium_measure(pot: &Potential, droplet: &Droplet) -> Result<DiscreteMeasure> {
    let g = droplet.grid;
    let m = g.nodes_per_side();
    let lap: Vec<f64> =
        (0..g.len()).map(|k| pot.laplacian(g.point_at(k))).collect::<Result<_>>()?;
    let eps = HARMONIC_EPS * lap.iter().fold(0.0f64, |a, v| a.max(*v));
    let scale = 1.0 / (4.0 * PI * droplet.tau);
    let mut weights = vec![0.0; g.len()];
    for k in 0..g.len() {
        let cov = droplet.coverage[k];
        if cov <= 0.0 {
            continue;
        }
        if lap[k] > eps {
            weights[k] = lap[k] * cov * scale;
        } else if lap[k] < -eps {
            let (i, j) = (k % m, k / m);
            let interior = i > 0
                && j > 0
                && i + 1 < m
                && j + 1 < m
                && [k - 1, k + 1, k - m, k + m].iter().all(|&n| droplet.indicator[n]);
            if droplet.indicator[k] && interior {
                let z = g.point_at(k);
                return Err(Error::Inconsistency(format!(
                    "negative Laplacian {:.3e} inside the coincidence set at ({}, {})",
                    lap[k], z.re, z.im
                )));
            }
        }
    }
    DiscreteMeasure::new(g, weights)
}

/// `-1/2 int int_{[x1,x2] x [y1,y2]} log(x^2 + y^2)`, i.e. the integral of
/// `log(1/|w|)` over the rectangle.
pub fn rect_log_integral(x1: f64, x2: f64, y1: f64, y2: f64) -> f64 {
    fn g(x: f64, y: f64) -> f64 {
        let r2 = x * x + y * y;
        if r2 == 0.0 {
            return 0.0;
        }
        let mut v = x * y * r2.ln() - 3.0 * x * y;
        if x != 0.0 {
            v += x * x * (y / x).atan();
        }
        if y != 0.0 {
            v += y * y * (x / y).atan();
        }
        v
    }
    -0.5 * (g(x2, y2) - g(x1, y2) - g(x2, y1) + g(x1, y1))
}

/// Mean of `log(1/|z - w|)` over the cell centered at `center` (side `h`).
fn cell_mean(z: Complex64, center: Complex64, h: f64) -> f64 {
    let d = center - z;
    rect_log_integral(d.re - 0.5 * h, d.re + 0.5 * h, d.im - 0.5 * h, d.im + 0.5 * h) / (h * h)
}

/// `L[sigma](z) = int log(1/|z - w|) d sigma(w)`.
pub fn log_potential(measure: &DiscreteMeasure, z: Complex64) -> f64 {
    let g = &measure.grid;
    let h = g.spacing();
    let m = g.nodes_per_side();
    let near = (NEAR_CELLS as f64 + 0.5) * h;
    let mut s = 0.0;
    for (k, &w) in measure.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let c = g.point(k % m, k / m);
        let d = c - z;
        let kern = if d.re.abs() <= near && d.im.abs() <= near {
            cell_mean(z, c, h)
        } else {
            -d.norm().ln()
        };
        s += w * kern;
    }
    s * g.cell_area()
}

/// Kernel table `K(dx, dy)` on offsets in cells, for the convolution.
fn kernel_value(dx: i64, dy: i64, h: f64) -> f64 {
    if dx.abs() <= NEAR_CELLS && dy.abs() <= NEAR_CELLS {
        let c = Complex64::new(dx as f64 * h, dy as f64 * h);
        cell_mean(Complex64::new(0.0, 0.0), c, h)
    } else {
        -(h * ((dx * dx + dy * dy) as f64).sqrt()).ln()
    }
}

fn fft_rows(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>, exec: Exec) {
    exec.for_each_chunk_mut(data, n * 8, |_, rows| {
        for row in rows.chunks_mut(n) {
            fft.process(row);
        }
    });
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = data[i * n + j];
        }
    }
    out
}

fn fft2(data: &mut Vec<Complex64>, n: usize, fft: &Arc<dyn Fft<f64>>, exec: Exec) {
    fft_rows(data, n, fft, exec);
    let mut t = transpose(data, n);
    fft_rows(&mut t, n, fft, exec);
    *data = transpose(&t, n);
}

/// `L[sigma]` at every node, by zero-padded FFT convolution.
pub fn log_potential_field(measure: &DiscreteMeasure, exec: Exec) -> Result<ScalarField> {
    let g = &measure.grid;
    let m = g.nodes_per_side();
    let n = 2 * m;
    let h = g.spacing();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..m {
        for i in 0..m {
            a[j * n + i] = Complex64::new(measure.weights[j * m + i], 0.0);
        }
    }
    let mut k = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        for i in 0..n {
            // Offsets in [-m, m); index m is never reached by a valid pair.
            let dx = if i < m { i as i64 } else { i as i64 - n as i64 };
            let dy = if j < m { j as i64 } else { j as i64 - n as i64 };
            k[j * n + i] = Complex64::new(kernel_value(dx, dy, h), 0.0);
        }
    }
    fft2(&mut a, n, &forward, exec);
    fft2(&mut k, n, &forward, exec);
    for (x, y) in a.iter_mut().zip(&k) {
        *x *= y;
    }
    fft2(&mut a, n, &inverse, exec);
    let norm = g.cell_area() / (n * n) as f64;
    let values = (0..m * m).map(|idx| a[(idx / m) * n + idx % m].re * norm).collect();
    ScalarField::new(*g, values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub theta: f64,
    /// `int Phi d sigma`.
    pub phi_moment: f64,
    /// `int int log(1/|z - w|) d sigma d sigma`.
    pub log_energy: f64,
    /// `2 theta int Phi d sigma + log_energy`.
    pub energy: f64,
}

impl EnergyReport {
    /// Constant in `L[sigma_hat] - V_hat_tau / (2 tau)` on the plane:
    /// `log_energy + phi_moment / (2 tau)`.
    pub fn c_tau(&self, tau: f64) -> f64 {
        self.log_energy + self.phi_moment / (2.0 * tau)
    }
}

/// Weighted logarithmic energy of `measure` at `theta`.
pub fn energy(measure: &DiscreteMeasure, pot: &Potential, theta: f64, exec: Exec) -> Result<EnergyReport> {
    if !(theta.is_finite() && theta > 0.0) {
        return Err(crate::error::arg(format!("theta must be positive, got {theta}")));
    }
    let field = log_potential_field(measure, exec)?;
    energy_with_field(measure, pot, theta, &field)
}

/// As [`energy`], reusing a precomputed [`log_potential_field`].
pub fn energy_with_field(
    measure: &DiscreteMeasure,
    pot: &Potential,
    theta: f64,
    field: &ScalarField,
) -> Result<EnergyReport> {
    let h2 = measure.grid.cell_area();
    let phi_moment = measure.integrate(|z| pot.phi(z))?;
    let self_shift = (POINT_SELF_RADIUS / PAIR_SELF_RADIUS).ln();
    let mut log_energy = 0.0;
    for (w, l) in measure.weights.iter().zip(field.values()) {
        if *w > 0.0 {
            log_energy += w * (l + w * h2 * self_shift);
        }
    }
    log_energy *= h2;
    Ok(EnergyReport { theta, phi_moment, log_energy, energy: 2.0 * theta * phi_moment + log_energy })
}

/// Mean and standard deviation over all nodes of `L[sigma_hat] - V_hat/(2 tau)`.
pub fn potential_identity(
    sol: &ObstacleSolution,
    field: &ScalarField,
) -> Result<(f64, f64)> {
    let env = sol.envelope()?;
    let diffs: Vec<f64> = field
        .values()
        .iter()
        .zip(env.values())
        .map(|(l, v)| l - v / (2.0 * sol.tau))
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}
