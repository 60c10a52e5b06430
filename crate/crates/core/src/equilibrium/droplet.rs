//! Coincidence sets of obstacle solutions and their geometry.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::grid::BoxGrid;
use crate::potential::Potential;

use super::obstacle::{solve_obstacle_with, ObstacleOptions, ObstacleSolution};

/// Minimum distance, in cells, between the coincidence set and the box edge.
pub const EDGE_MARGIN: usize = 10;

/// The complement of the droplet, i.e. the coincidence set `{V_hat = V}`.
#[derive(Clone, Debug)]
pub struct Droplet {
    pub grid: BoxGrid,
    /// Node lies in the coincidence set (cell center classification).
    pub indicator: Vec<bool>,
    /// Fraction of each cell covered by the coincidence set.
    pub coverage: Vec<f64>,
    pub tau: f64,
    /// `h^2 sum_{indicator} Delta Phi / (4 pi)`.
    pub mass: f64,
    pub delta: f64,
}

/// Classifies nodes with `u <= delta`. Cells whose center lies outside the
/// coincidence set (coverage below one half) are dropped from the indicator.
pub fn extract_droplet(sol: &ObstacleSolution, delta: f64) -> Result<Droplet> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(arg(format!("coincidence threshold must be non-negative, got {delta}")));
    }
    let grid = sol.grid;
    let u = sol.u.values();
    let lap = sol.laplacian.values();
    let mut coverage = sol.coverage(delta);
    for (k, c) in coverage.iter_mut().enumerate() {
        if lap[k] <= 0.0 && u[k] <= delta {
            *c = 1.0;
        }
    }
    let m = grid.nodes_per_side();
    let indicator: Vec<bool> = coverage.iter().map(|&c| c >= 0.5).collect();
    for (k, &inside) in indicator.iter().enumerate() {
        if inside && grid.edge_distance(k % m, k / m) < EDGE_MARGIN {
            return Err(Error::GridTooSmall(format!(
                "coincidence set comes within {EDGE_MARGIN} cells of the box edge"
            )));
        }
    }
    let mass = indicator
        .iter()
        .zip(lap)
        .filter(|(i, _)| **i)
        .map(|(_, l)| l)
        .sum::<f64>()
        * grid.cell_area()
        / (4.0 * PI);
    Ok(Droplet { grid, indicator, coverage, tau: sol.tau, mass, delta })
}

impl Droplet {
    /// `h^2 sum coverage`.
    pub fn area(&self) -> f64 {
        self.coverage.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|b| **b).count()
    }

    /// Points on the boundary of the coincidence set, one per grid edge that
    /// crosses it, placed using the coverage of the adjacent cells.
    pub fn boundary_points(&self) -> Vec<Complex64> {
        let g = &self.grid;
        let m = g.nodes_per_side();
        let h = g.spacing();
        let mut pts = Vec::new();
        let mut push = |a: usize, b: usize, dir: Complex64| {
            // a inside, b outside, b = a + dir * h
            let za = g.point_at(a);
            let (k, zk) = if self.coverage[b] > 0.0 { (b, g.point_at(b)) } else { (a, za) };
            let t = ((zk - za).re * dir.re + (zk - za).im * dir.im) / h + self.coverage[k] - 0.5;
            pts.push(za + dir * (t.clamp(0.0, 1.0) * h));
        };
        for j in 0..m {
            for i in 0..m {
                let k = j * m + i;
                for (di, dj, dir) in [
                    (1isize, 0isize, Complex64::new(1.0, 0.0)),
                    (-1, 0, Complex64::new(-1.0, 0.0)),
                    (0, 1, Complex64::new(0.0, 1.0)),
                    (0, -1, Complex64::new(0.0, -1.0)),
                ] {
                    let (ni, nj) = (i as isize + di, j as isize + dj);
                    if ni < 0 || nj < 0 || ni >= m as isize || nj >= m as isize {
                        continue;
                    }
                    let n = nj as usize * m + ni as usize;
                    if self.indicator[k] && !self.indicator[n] {
                        push(k, n, dir);
                    }
                }
            }
        }
        pts
    }

    /// Area of the symmetric difference with the set `inside`, each cell
    /// resolved with `sub x sub` samples.
    pub fn symmetric_difference_area(&self, inside: impl Fn(Complex64) -> bool, sub: usize) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let sub = sub.max(1);
        let mut total = 0.0;
        for k in 0..g.len() {
            let z = g.point_at(k);
            let mut frac = 0.0;
            for a in 0..sub {
                for b in 0..sub {
                    let off = Complex64::new(
                        ((a as f64 + 0.5) / sub as f64 - 0.5) * h,
                        ((b as f64 + 0.5) / sub as f64 - 0.5) * h,
                    );
                    if inside(z + off) {
                        frac += 1.0;
                    }
                }
            }
            frac /= (sub * sub) as f64;
            let ind = if self.indicator[k] { 1.0 } else { 0.0 };
            total += (ind - frac).abs();
        }
        total * g.cell_area()
    }
}

/// Whether each coincidence set contains the previous one up to a one-cell
/// band and the masses increase.
pub fn droplets_nested(droplets: &[Droplet]) -> Result<bool> {
    for pair in droplets.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.grid != b.grid {
            return Err(arg("nesting check needs droplets on one grid"));
        }
        if !(a.tau < b.tau) {
            return Err(arg("nesting check needs increasing tau"));
        }
        if a.mass >= b.mass {
            return Ok(false);
        }
        let m = a.grid.nodes_per_side();
        for k in 0..a.grid.len() {
            if !a.indicator[k] || b.indicator[k] {
                continue;
            }
            let (i, j) = (k % m, k / m);
            let near = (i.saturating_sub(1)..=(i + 1).min(m - 1))
                .any(|x| (j.saturating_sub(1)..=(j + 1).min(m - 1)).any(|y| b.indicator[y * m + x]));
            if !near {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Solves for every `tau` on a shared grid and checks nesting.
pub fn monotone_tau_check(
    pot: &Potential,
    taus: &[f64],
    grid: &BoxGrid,
    opts: &ObstacleOptions,
) -> Result<bool> {
    if taus.is_empty() {
        return Err(arg("monotone check needs at least one tau"));
    }
    if taus.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(arg("tau values must increase"));
    }
    let mut droplets = Vec::with_capacity(taus.len());
    for &tau in taus {
        let sol = solve_obstacle_with(pot, tau, grid, opts)?;
        droplets.push(extract_droplet(&sol, sol.default_delta())?);
    }
    droplets_nested(&droplets)
}

/// Harmonic test functions with a known value at infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum HarmonicTest {
    /// `h = 1`, `h(inf) = 1`.
    One,
    /// `h = Re(z^-k)`, `h(inf) = 0`.
    ReInvPow(u32),
}

impl HarmonicTest {
    pub fn eval(&self, z: Complex64) -> f64 {
        match *self {
            HarmonicTest::One => 1.0,
            HarmonicTest::ReInvPow(k) => z.powi(-(k as i32)).re,
        }
    }

    pub fn at_infinity(&self) -> f64 {
        match self {
            HarmonicTest::One => 1.0,
            HarmonicTest::ReInvPow(_) => 0.0,
        }
    }
}

/// `|4 pi (tau2 - tau1) h(inf) - int h Delta Phi|` over the difference of the
/// two coincidence sets.
pub fn harmonic_moment_defect(
    pot: &Potential,
    small: &Droplet,
    large: &Droplet,
    test: HarmonicTest,
) -> Result<f64> {
    if small.grid != large.grid {
        return Err(arg("harmonic moment check needs droplets on one grid"));
    }
    if !(0.0 < small.tau && small.tau < large.tau) {
        return Err(arg("harmonic moment check needs 0 < tau1 < tau2"));
    }
    let g = &small.grid;
    if let HarmonicTest::ReInvPow(k) = test {
        if k == 0 {
            return Err(arg("inverse power must be at least 1"));
        }
        let origin = Complex64::new(0.0, 0.0);
        let (ix, iy) = g.cell_of(origin).ok_or_else(|| arg("origin lies outside the grid"))?;
        let m = g.nodes_per_side();
        let around = [(ix, iy), (ix.saturating_sub(1), iy), (ix, iy.saturating_sub(1))];
        if around.iter().any(|&(i, j)| !small.indicator[j * m + i]) {
            return Err(arg("origin must lie inside the smaller coincidence set"));
        }
    }
    let mut rhs = 0.0;
    for k in 0..g.len() {
        let d = large.coverage[k] - small.coverage[k];
        if d != 0.0 {
            let z = g.point_at(k);
            rhs += d * test.eval(z) * pot.laplacian(z)?;
        }
    }
    rhs *= g.cell_area();
    let lhs = 4.0 * PI * (large.tau - small.tau) * test.at_infinity();
    Ok((lhs - rhs).abs())
}

/// Solves both problems and returns [`harmonic_moment_defect`].
pub fn harmonic_moment_check(
    pot: &Potential,
    tau1: f64,
    tau2: f64,
    grid: &BoxGrid,
    test: HarmonicTest,
    opts: &ObstacleOptions,
) -> Result<f64> {
    if !(0.0 < tau1 && tau1 < tau2) {
        return Err(arg("harmonic moment check needs 0 < tau1 < tau2"));
    }
    let a = solve_obstacle_with(pot, tau1, grid, opts)?;
    let b = solve_obstacle_with(pot, tau2, grid, opts)?;
    let da = extract_droplet(&a, a.default_delta())?;
    let db = extract_droplet(&b, b.default_delta())?;
    harmonic_moment_defect(pot, &da, &db, test)
}

/// Ellipse `{z : (z - center)^T A (z - center) = 1}` described by its axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-axis lengths, larger first.
    pub semi_axes: (f64, f64),
    /// Angle of the major axis to the real axis, in `(-pi/2, pi/2]`.
    pub angle: f64,
    /// Shape matrix `A`, row-major.
    shape: [f64; 4],
}

impl Ellipse {
    /// Signed distance along the ray from the center:
    /// `|z - center| - r_ellipse(direction)`.
    pub fn radial_residual(&self, z: Complex64) -> f64 {
        let (dx, dy) = (z.re - self.center.0, z.im - self.center.1);
        let r = (dx * dx + dy * dy).sqrt();
        if r == 0.0 {
            return -self.semi_axes.1;
        }
        let (ux, uy) = (dx / r, dy / r);
        let [a, b, _, c] = self.shape;
        let q = a * ux * ux + 2.0 * b * ux * uy + c * uy * uy;
        r - 1.0 / q.sqrt()
    }

    pub fn area(&self) -> f64 {
        PI * self.semi_axes.0 * self.semi_axes.1
    }
}

/// Least-squares conic `a x^2 + b xy + c y^2 + d x + e y = 1` through the
/// points, reduced to center, axes and orientation.
pub fn fit_ellipse(points: &[Complex64]) -> Result<Ellipse> {
    if points.len() < 5 {
        return Err(arg("an ellipse fit needs at least five points"));
    }
    // Center the data for conditioning.
    let n = points.len() as f64;
    let mean = points.iter().sum::<Complex64>() / n;
    let scale = points.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(arg("ellipse fit points coincide"));
    }
    let design = DMatrix::from_fn(points.len(), 5, |r, col| {
        let p = (points[r] - mean) / scale;
        match col {
            0 => p.re * p.re,
            1 => p.re * p.im,
            2 => p.im * p.im,
            3 => p.re,
            _ => p.im,
        }
    });
    let rhs = DVector::from_element(points.len(), 1.0);
    let coef = design
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::Optimization(format!("ellipse fit failed: {e}")))?;
    let (a, b, c, d, e) = (coef[0], coef[1], coef[2], coef[3], coef[4]);
    let quad = Matrix2::new(a, 0.5 * b, 0.5 * b, c);
    let center = quad
        .try_inverse()
        .ok_or_else(|| Error::Optimization("degenerate conic".into()))?
        * nalgebra::Vector2::new(-0.5 * d, -0.5 * e);
    let k = 1.0 + a * center.x * center.x + b * center.x * center.y + c * center.y * center.y;
    // x^T Q x = k with x = p - center, in scaled coordinates.
    let eig = SymmetricEigen::new(quad / k);
    let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
    if !(l0 > 0.0 && l1 > 0.0) {
        return Err(Error::Optimization("fitted conic is not an ellipse".into()));
    }
    let (major, minor, v) = if l0 <= l1 {
        (1.0 / l0.sqrt(), 1.0 / l1.sqrt(), eig.eigenvectors.column(0).into_owned())
    } else {
        (1.0 / l1.sqrt(), 1.0 / l0.sqrt(), eig.eigenvectors.column(1).into_owned())
    };
    let mut angle = v.y.atan2(v.x);
    if angle <= -PI / 2.0 {
        angle += PI;
    } else if angle > PI / 2.0 {
        angle -= PI;
    }
    let s2 = scale * scale;
    let shape = [a / (k * s2), 0.5 * b / (k * s2), 0.5 * b / (k * s2), c / (k * s2)];
    Ok(Ellipse {
        center: (mean.re + scale * center.x, mean.im + scale * center.y),
        semi_axes: (scale * major, scale * minor),
        angle,
        shape,
    })
}
