//! Projected SOR for the obstacle problem
//!
//! ```text
//! u >= 0,   Delta_h u <= Delta Phi,   u (Delta Phi - Delta_h u) = 0,
//! ```
//!
//! for `u = V_hat - V`, with Dirichlet data `u = -2 tau log|z| + c + Phi` on
//! the outer ring of nodes. The constant `c` is fixed by requiring the
//! coincidence set to carry mass `tau`, using a safeguarded false-position
//! search. Grids are solved coarse to fine, each level warm-started from the
//! previous one.

use std::f64::consts::PI;

use crate::error::{arg, Error, Result};
use crate::exec::Exec;
use crate::grid::{BoxGrid, ScalarField};
use crate::potential::Potential;

use num_complex::Complex64;

/// Coarsest grid used by the cascade.
const MIN_LEVEL_NODES: usize = 64;
/// Rows per parallel task in a sweep.
const ROWS_PER_TASK: usize = 16;
/// Number of trailing sweep updates kept for error reports.
const HISTORY_LEN: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObstacleOptions {
    /// Over-relaxation factor; `None` picks `2/(1 + sin(pi/M))` per level.
    pub omega: Option<f64>,
    /// Sweeps stop once the largest update is below `update_tol (1 + max|u|)`.
    pub update_tol: f64,
    /// Complementarity tolerance relative to `max |Delta Phi|`.
    pub complementarity_tol: f64,
    /// Accepted mismatch between the coincidence mass and `tau`, relative to `tau`.
    pub mass_tol: f64,
    /// Sweep cap per solve; `None` means `200 M`.
    pub max_sweeps: Option<usize>,
    /// Solve on coarser grids first.
    pub cascade: bool,
    pub exec: Exec,
}

impl Default for ObstacleOptions {
    fn default() -> Self {
        Self {
            omega: None,
            update_tol: 1e-9,
            complementarity_tol: 1e-6,
            mass_tol: 1e-4,
            max_sweeps: None,
            cascade: true,
            exec: Exec::default(),
        }
    }
}

impl ObstacleOptions {
    fn validate(&self) -> Result<()> {
        if let Some(w) = self.omega {
            if !(w > 0.0 && w < 2.0) {
                return Err(arg(format!("relaxation factor must lie in (0, 2), got {w}")));
            }
        }
        for (name, v) in [
            ("update_tol", self.update_tol),
            ("complementarity_tol", self.complementarity_tol),
            ("mass_tol", self.mass_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(arg(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Converged obstacle solve on one grid.
#[derive(Clone, Debug)]
pub struct ObstacleSolution {
    pub grid: BoxGrid,
    /// `u = V_hat - V >= 0`.
    pub u: ScalarField,
    /// `Delta Phi` at the nodes.
    pub laplacian: ScalarField,
    pub potential: Potential,
    pub tau: f64,
    /// Additive constant in `V_hat(z) ~ -2 tau log|z| + c` at the box edge.
    pub boundary_constant: f64,
    /// Sweeps spent on the finest grid.
    pub iterations: usize,
    /// Sweeps over all grids and all trial constants.
    pub total_sweeps: usize,
    /// `max |min(u, Delta Phi - Delta_h u)|` over interior nodes.
    pub residual: f64,
    /// Absolute update tolerance that stopped the final solve.
    pub tolerance: f64,
    pub omega: f64,
    /// Coincidence mass (cell coverage weighted) at the default threshold.
    pub mass: f64,
}

impl ObstacleSolution {
    /// Default coincidence threshold, ten times the solver tolerance.
    pub fn default_delta(&self) -> f64 {
        10.0 * self.tolerance
    }

    /// `V_hat = u - Phi` at the nodes.
    pub fn envelope(&self) -> Result<ScalarField> {
        let mut v = self.u.values().to_vec();
        for (k, x) in v.iter_mut().enumerate() {
            *x -= self.potential.phi(self.grid.point_at(k))?;
        }
        ScalarField::new(self.grid, v)
    }

    /// Cell coverage of the coincidence set at threshold `delta`.
    pub fn coverage(&self, delta: f64) -> Vec<f64> {
        coverage_field(&self.grid, self.u.values(), self.laplacian.values(), delta)
    }

    /// `min(u, Delta Phi - Delta_h u)` over interior nodes (ring nodes get 0).
    pub fn complementarity(&self) -> Vec<f64> {
        complementarity_field(&self.grid, self.u.values(), self.laplacian.values())
    }
}

fn complementarity_field(grid: &BoxGrid, u: &[f64], lap: &[f64]) -> Vec<f64> {
    let m = grid.nodes_per_side();
    let inv_h2 = 1.0 / grid.cell_area();
    let mut out = vec![0.0; m * m];
    for j in 1..m - 1 {
        for i in 1..m - 1 {
            let k = j * m + i;
            let lap_u = (u[k - 1] + u[k + 1] + u[k - m] + u[k + m] - 4.0 * u[k]) * inv_h2;
            out[k] = u[k].min(lap[k] - lap_u);
        }
    }
    out
}

/// Share of each cell covered by the coincidence set: `(Delta Phi - Delta_h u)
/// / Delta Phi` clamped to `[0, 1]` on nodes with `u <= delta` and positive
/// `Delta Phi`, zero elsewhere.
///
/// Counting whole cells of `{u <= delta}` overestimates the coincidence set by
/// about half a cell along its boundary; the discrete Riesz measure
/// `Delta Phi - Delta_h u` of the envelope resolves the boundary cells.
pub fn coverage_field(grid: &BoxGrid, u: &[f64], lap: &[f64], delta: f64) -> Vec<f64> {
    let m = grid.nodes_per_side();
    let inv_h2 = 1.0 / grid.cell_area();
    let mut out = vec![0.0; m * m];
    for j in 1..m - 1 {
        for i in 1..m - 1 {
            let k = j * m + i;
            if u[k] > delta || lap[k] <= 0.0 {
                continue;
            }
            let lap_u = (u[k - 1] + u[k + 1] + u[k - m] + u[k + m] - 4.0 * u[k]) * inv_h2;
            out[k] = ((lap[k] - lap_u) / lap[k]).clamp(0.0, 1.0);
        }
    }
    out
}

/// `h^2 / (4 pi) * sum coverage * Delta Phi`.
pub fn coincidence_mass(grid: &BoxGrid, u: &[f64], lap: &[f64], delta: f64) -> f64 {
    let cov = coverage_field(grid, u, lap, delta);
    let total: f64 = cov.iter().zip(lap).map(|(c, l)| c * l).sum();
    total * grid.cell_area() / (4.0 * PI)
}

/// Smallest `R` with `int_{|z|<R} (Delta Phi)^+ / (4 pi) >= tau`.
pub fn mass_radius(pot: &Potential, tau: f64) -> Result<f64> {
    let mass = |r: f64| -> Result<f64> {
        // Gauss-Legendre in r on 8 panels, 96 angles.
        let (x, w) = crate::quadrature::gauss_legendre(12);
        let panels = 8;
        let angles = 96;
        let mut total = 0.0;
        for p in 0..panels {
            let a = r * p as f64 / panels as f64;
            let b = r * (p + 1) as f64 / panels as f64;
            for (xi, wi) in x.iter().zip(&w) {
                let rr = 0.5 * (a + b) + 0.5 * (b - a) * xi;
                let mut ring = 0.0;
                for t in 0..angles {
                    let th = 2.0 * PI * (t as f64 + 0.5) / angles as f64;
                    ring += pot.laplacian(Complex64::from_polar(rr, th))?.max(0.0);
                }
                total += 0.5 * (b - a) * wi * rr * ring * 2.0 * PI / angles as f64;
            }
        }
        Ok(total / (4.0 * PI))
    };
    let mut hi = 0.5;
    let mut iters = 0;
    while mass(hi)? < tau {
        hi *= 2.0;
        iters += 1;
        if iters > 60 {
            return Err(arg("Laplacian of the potential carries too little mass"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass(mid)? >= tau {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `c` making `-2 tau log R + c` meet `-Phi` on average on the circle `|z| = R`.
fn initial_constant(pot: &Potential, tau: f64, r: f64) -> Result<f64> {
    let n = 64;
    let mut mean_phi = 0.0;
    for t in 0..n {
        let th = 2.0 * PI * t as f64 / n as f64;
        mean_phi += pot.phi(Complex64::from_polar(r, th))?;
    }
    Ok(2.0 * tau * r.ln() - mean_phi / n as f64)
}

/// Red-black split of a grid function: node `(i, j)` is red when `i + j` is
/// even and lives at `j * M/2 + i/2` in the array of its color.
struct Psor {
    grid: BoxGrid,
    m: usize,
    half: usize,
    red: Vec<f64>,
    black: Vec<f64>,
    rhs_red: Vec<f64>,
    rhs_black: Vec<f64>,
    /// Full-grid `Delta Phi`.
    lap: Vec<f64>,
    /// Ring data without the constant: `-2 tau log|z| + Phi`.
    ring_base: Vec<f64>,
    omega: f64,
    exec: Exec,
}

struct SolveStats {
    sweeps: usize,
    residual: f64,
    tolerance: f64,
}

impl Psor {
    fn new(grid: BoxGrid, pot: &Potential, tau: f64, omega: f64, exec: Exec) -> Result<Self> {
        let m = grid.nodes_per_side();
        let half = m / 2;
        let lap: Vec<f64> = exec
            .map_range(grid.len(), |k| pot.laplacian(grid.point_at(k)))
            .into_iter()
            .collect::<Result<_>>()?;
        if let Some(index) = lap.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let h2 = grid.cell_area();
        let mut rhs_red = vec![0.0; m * half];
        let mut rhs_black = vec![0.0; m * half];
        for j in 0..m {
            for i in 0..m {
                let slot = j * half + i / 2;
                let v = h2 * lap[j * m + i];
                if (i + j) % 2 == 0 {
                    rhs_red[slot] = v;
                } else {
                    rhs_black[slot] = v;
                }
            }
        }
        let mut ring_base = vec![0.0; m * m];
        for (k, slot) in ring_base.iter_mut().enumerate() {
            let (i, j) = (k % m, k / m);
            if i == 0 || j == 0 || i == m - 1 || j == m - 1 {
                let z = grid.point_at(k);
                *slot = -2.0 * tau * z.norm().ln() + pot.phi(z)?;
            }
        }
        Ok(Self {
            grid,
            m,
            half,
            red: vec![0.0; m * half],
            black: vec![0.0; m * half],
            rhs_red,
            rhs_black,
            lap,
            ring_base,
            omega,
            exec,
        })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let slot = j * self.half + i / 2;
        if (i + j) % 2 == 0 {
            self.red[slot]
        } else {
            self.black[slot]
        }
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let slot = j * self.half + i / 2;
        if (i + j) % 2 == 0 {
            self.red[slot] = v;
        } else {
            self.black[slot] = v;
        }
    }

    fn full(&self) -> Vec<f64> {
        let m = self.m;
        (0..m * m).map(|k| self.get(k % m, k / m)).collect()
    }

    fn load(&mut self, values: &[f64]) {
        let m = self.m;
        for (k, v) in values.iter().enumerate() {
            self.set(k % m, k / m, *v);
        }
    }

    fn set_constant(&mut self, c: f64) {
        let m = self.m;
        for j in 0..m {
            for i in 0..m {
                if i == 0 || j == 0 || i == m - 1 || j == m - 1 {
                    self.set(i, j, self.ring_base[j * m + i] + c);
                }
            }
        }
    }

    /// Relaxes every interior node of one color; returns the largest update
    /// and the largest `|u|` of that color.
    fn sweep_color(&mut self, red: bool) -> (f64, f64) {
        let (m, half, omega, exec) = (self.m, self.half, self.omega, self.exec);
        let (target, other, rhs) = if red {
            (&mut self.red, &self.black, &self.rhs_red)
        } else {
            (&mut self.black, &self.red, &self.rhs_black)
        };
        let parts = exec.map_chunks_mut(target, ROWS_PER_TASK * half, |c, rows| {
            let mut upd = 0.0f64;
            let mut big = 0.0f64;
            for (r, row) in rows.chunks_mut(half).enumerate() {
                let j = c * ROWS_PER_TASK + r;
                if j == 0 || j == m - 1 {
                    big = row.iter().fold(big, |a, v| a.max(v.abs()));
                    continue;
                }
                // Offset of this color within row j.
                let q = if red { j % 2 } else { 1 - j % 2 };
                let (k_lo, k_hi) = if q == 0 { (1, half - 1) } else { (0, half - 2) };
                big = big.max(row[0].abs()).max(row[half - 1].abs());
                let base = j * half;
                for k in k_lo..=k_hi {
                    let (w, e) = if q == 1 { (k, k + 1) } else { (k - 1, k) };
                    let nb = other[base + w] + other[base + e] + other[base - half + k]
                        + other[base + half + k];
                    let gs = 0.25 * (nb - rhs[base + k]);
                    let old = row[k];
                    let new = (old + omega * (gs - old)).max(0.0);
                    row[k] = new;
                    upd = upd.max((new - old).abs());
                    big = big.max(new);
                }
            }
            (upd, big)
        });
        parts.into_iter().fold((0.0, 0.0), |(a, b), (x, y)| (a.max(x), b.max(y)))
    }

    fn residual(&self) -> f64 {
        let u = self.full();
        complementarity_field(&self.grid, &u, &self.lap)
            .into_iter()
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Mass of the discrete Riesz measure of `V_hat` on `{u <= delta}`.
    fn mass(&self, delta: f64) -> f64 {
        let u = self.full();
        coincidence_mass(&self.grid, &u, &self.lap, delta)
    }

    fn solve(&mut self, c: f64, opts: &ObstacleOptions, tol_c: f64) -> Result<SolveStats> {
        self.set_constant(c);
        let cap = opts.max_sweeps.unwrap_or(200 * self.m);
        let mut history = std::collections::VecDeque::with_capacity(HISTORY_LEN);
        let mut next_check = 0;
        for sweep in 1..=cap {
            let (ur, br) = self.sweep_color(true);
            let (ub, bb) = self.sweep_color(false);
            let upd = ur.max(ub);
            let tol = opts.update_tol * (1.0 + br.max(bb));
            if history.len() == HISTORY_LEN {
                history.pop_front();
            }
            history.push_back(upd);
            if !upd.is_finite() {
                break;
            }
            if upd <= tol && sweep >= next_check {
                let residual = self.residual();
                if residual <= tol_c {
                    return Ok(SolveStats { sweeps: sweep, residual, tolerance: tol });
                }
                next_check = sweep + 8;
            }
        }
        Err(Error::NonConvergence { iterations: cap, history: history.into_iter().collect() })
    }
}

/// One evaluated trial constant.
struct Trial {
    c: f64,
    excess: f64,
    u: Vec<f64>,
    stats: SolveStats,
}

pub fn solve_obstacle(pot: &Potential, tau: f64, grid: &BoxGrid) -> Result<ObstacleSolution> {
    solve_obstacle_with(pot, tau, grid, &ObstacleOptions::default())
}

pub fn solve_obstacle_with(
    pot: &Potential,
    tau: f64,
    grid: &BoxGrid,
    opts: &ObstacleOptions,
) -> Result<ObstacleSolution> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(arg(format!("tau must be positive, got {tau}")));
    }
    opts.validate()?;
    let r0 = mass_radius(pot, tau)?;
    if grid.half_width() < 2.0 * r0 {
        return Err(Error::GridTooSmall(format!(
            "box half-width {} is below twice the estimated droplet radius {r0:.4}",
            grid.half_width()
        )));
    }
    let c0 = initial_constant(pot, tau, r0)?;
    let range = (c0 - 20.0 * tau, c0 + 20.0 * tau);

    let mut levels = vec![*grid];
    if opts.cascade {
        let mut m = grid.nodes_per_side();
        while m % 2 == 0 && m / 2 >= MIN_LEVEL_NODES && (m / 2) % 2 == 0 {
            m /= 2;
            levels.push(BoxGrid::new(grid.half_width(), m)?);
        }
        levels.reverse();
    }

    let max_lap_abs = |lap: &[f64]| lap.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut previous: Option<(BoxGrid, Vec<f64>, f64)> = None;
    let mut total_sweeps = 0;
    let count = levels.len();
    for (level, g) in levels.into_iter().enumerate() {
        let finest = level + 1 == count;
        let m = g.nodes_per_side();
        let omega = opts.omega.unwrap_or(2.0 / (1.0 + (PI / m as f64).sin()));
        let mut psor = Psor::new(g, pot, tau, omega, opts.exec)?;
        let tol_c = opts.complementarity_tol * max_lap_abs(&psor.lap).max(f64::MIN_POSITIVE);
        let c_start = match &previous {
            Some((coarse, u, c)) => {
                let coarse_field = ScalarField::new(*coarse, u.clone())?;
                let warm: Vec<f64> = (0..g.len())
                    .map(|k| coarse_field.interpolate(g.point_at(k)).unwrap_or(0.0).max(0.0))
                    .collect();
                psor.load(&warm);
                *c
            }
            None => c0,
        };
        let bracket_tol = if finest { 1e-7 * (1.0 + c_start.abs()) } else { 1e-3 * tau };
        let step = if previous.is_some() { 0.1 * tau } else { tau };
        let mut level_sweeps = 0;
        let mut eval = |psor: &mut Psor, c: f64| -> Result<Trial> {
            let stats = psor.solve(c, opts, tol_c)?;
            level_sweeps += stats.sweeps;
            let excess = psor.mass(10.0 * stats.tolerance) - tau;
            Ok(Trial { c, excess, u: psor.full(), stats })
        };

        let first = eval(&mut psor, c_start)?;
        // `lo` carries too much mass (small c), `hi` too little.
        let (mut lo, mut hi) = if first.excess >= 0.0 { (Some(first), None) } else { (None, Some(first)) };
        let mut width = step;
        while lo.is_none() || hi.is_none() {
            let anchor = lo.as_ref().or(hi.as_ref()).map(|t| t.c).expect("one side set");
            let c = if lo.is_some() { anchor + width } else { anchor - width };
            if c < range.0 || c > range.1 {
                return Err(Error::MassMatching { target: tau, lo: range.0, hi: range.1 });
            }
            let t = eval(&mut psor, c)?;
            if t.excess >= 0.0 {
                lo = Some(t);
            } else {
                hi = Some(t);
            }
            width *= 2.0;
        }
        let (mut lo, mut hi) = (lo.expect("bracketed"), hi.expect("bracketed"));
        // Illinois false position: working excesses are halved on the side
        // that keeps being retained.
        let (mut g_lo, mut g_hi) = (lo.excess, hi.excess);
        let mut last_moved_lo: Option<bool> = None;
        for _ in 0..80 {
            if lo.excess.abs() <= opts.mass_tol * tau
                || hi.excess.abs() <= opts.mass_tol * tau
                || hi.c - lo.c <= bracket_tol
            {
                break;
            }
            let span = hi.c - lo.c;
            let mut c = (lo.c * g_hi - hi.c * g_lo) / (g_hi - g_lo);
            if !(c > lo.c + 0.05 * span && c < hi.c - 0.05 * span) {
                c = 0.5 * (lo.c + hi.c);
            }
            let t = eval(&mut psor, c)?;
            let moved_lo = t.excess >= 0.0;
            if last_moved_lo == Some(moved_lo) {
                if moved_lo {
                    g_hi *= 0.5;
                } else {
                    g_lo *= 0.5;
                }
            }
            if moved_lo {
                g_lo = t.excess;
                lo = t;
            } else {
                g_hi = t.excess;
                hi = t;
            }
            last_moved_lo = Some(moved_lo);
        }
        let best = if lo.excess.abs() <= hi.excess.abs() { lo } else { hi };
        total_sweeps += level_sweeps;
        if finest {
            let u = ScalarField::new(g, best.u)?;
            let laplacian = ScalarField::new(g, psor.lap)?;
            return Ok(ObstacleSolution {
                grid: g,
                u,
                laplacian,
                potential: pot.clone(),
                tau,
                boundary_constant: best.c,
                iterations: level_sweeps,
                total_sweeps,
                residual: best.stats.residual,
                tolerance: best.stats.tolerance,
                omega,
                mass: tau + best.excess,
            });
        }
        previous = Some((g, best.u, best.c));
    }
    unreachable!("the finest level returns")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mass_radius_of_gaussian_is_sqrt_tau() {
        let pot = Potential::gaussian();
        for tau in [0.5, 1.0, 2.0] {
            assert!((mass_radius(&pot, tau).unwrap() - f64::sqrt(tau)).abs() < 1e-9);
        }
        let quartic = Potential::radial_monomial(2).unwrap();
        assert!((mass_radius(&quartic, 1.0).unwrap() - 0.5f64.powf(0.25)).abs() < 1e-6);
    }

    #[test]
    fn initial_constant_is_exact_for_gaussian() {
        let pot = Potential::gaussian();
        for tau in [0.5, 1.0, 3.0] {
            let c = initial_constant(&pot, tau, tau.sqrt()).unwrap();
            assert!((c - tau * (tau.ln() - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn red_black_round_trip() {
        let g = BoxGrid::new(1.0, 16).unwrap();
        let mut p = Psor::new(g, &Potential::gaussian(), 1.0, 1.5, Exec::Sequential).unwrap();
        let vals: Vec<f64> = (0..256).map(|k| k as f64).collect();
        p.load(&vals);
        assert_eq!(p.full(), vals);
    }

    #[test]
    fn sweep_reproduces_plain_gauss_seidel_on_small_grid() {
        // Reference: lexicographic red-then-black PSOR on the full array.
        let g = BoxGrid::new(2.0, 16).unwrap();
        let pot = Potential::gaussian();
        let omega = 1.3;
        let mut p = Psor::new(g, &pot, 1.0, omega, Exec::Sequential).unwrap();
        p.set_constant(-1.0);
        let mut u = p.full();
        let m = 16;
        let h2 = g.cell_area();
        for color in [0, 1] {
            for j in 1..m - 1 {
                for i in 1..m - 1 {
                    if (i + j) % 2 != color {
                        continue;
                    }
                    let k = j * m + i;
                    let gs = 0.25 * (u[k - 1] + u[k + 1] + u[k - m] + u[k + m] - h2 * p.lap[k]);
                    u[k] = (u[k] + omega * (gs - u[k])).max(0.0);
                }
            }
        }
        p.sweep_color(true);
        p.sweep_color(false);
        for (a, b) in p.full().iter().zip(&u) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree() {
        let g = BoxGrid::new(3.0, 64).unwrap();
        let pot = Potential::elbau_felder(0.3).unwrap();
        let opts = ObstacleOptions { cascade: false, ..Default::default() };
        let a = solve_obstacle_with(&pot, 1.0, &g, &ObstacleOptions { exec: Exec::Sequential, ..opts })
            .unwrap();
        let b = solve_obstacle_with(&pot, 1.0, &g, &ObstacleOptions { exec: Exec::Parallel, ..opts })
            .unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.boundary_constant, b.boundary_constant);
    }

    #[test]
    fn gaussian_constant_on_coarse_grid() {
        let g = BoxGrid::new(4.0, 128).unwrap();
        let sol = solve_obstacle(&Potential::gaussian(), 1.0, &g).unwrap();
        assert!((sol.boundary_constant + 1.0).abs() < 2e-3, "{}", sol.boundary_constant);
        assert!((sol.mass - 1.0).abs() < 1e-4);
        assert!(sol.u.values().iter().all(|&v| v >= -1e-12));
        assert!(sol.complementarity().iter().all(|&v| v >= -1e-6 * 4.0));
    }

    #[test]
    fn small_box_is_refused() {
        let g = BoxGrid::new(1.5, 64).unwrap();
        assert!(matches!(
            solve_obstacle(&Potential::gaussian(), 1.0, &g),
            Err(Error::GridTooSmall(_))
        ));
    }

    #[test]
    fn sweep_cap_reports_history() {
        let g = BoxGrid::new(4.0, 64).unwrap();
        let opts = ObstacleOptions { max_sweeps: Some(5), cascade: false, ..Default::default() };
        match solve_obstacle_with(&Potential::gaussian(), 1.0, &g, &opts) {
            Err(Error::NonConvergence { iterations, history }) => {
                assert_eq!(iterations, 5);
                assert_eq!(history.len(), 5);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn bad_options_are_rejected() {
        let g = BoxGrid::new(4.0, 64).unwrap();
        let opts = ObstacleOptions { omega: Some(2.0), ..Default::default() };
        assert!(solve_obstacle_with(&Potential::gaussian(), 1.0, &g, &opts).is_err());
        assert!(solve_obstacle(&Potential::gaussian(), -1.0, &g).is_err());
    }
}
