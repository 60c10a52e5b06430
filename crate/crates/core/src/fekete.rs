//! Weighted Fekete configurations: minimizers of the discrete energy
//!
//! ```text
//! E#(z) = (2 theta / N) sum Phi(z_j) + 1/(N(N-1)) sum_{j != k} log(1/|z_j - z_k|)
//! ```
//!
//! and the estimate `M_{Phi,N}(theta) = exp(-min E#)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{mass_radius, DiscreteMeasure};
use crate::error::{arg, Error, Result};
use crate::exec::Exec;
use crate::grid::BoxGrid;
use crate::potential::{ComplexPoint, Potential};

/// Smallest pair distance accepted during the line search.
pub const MIN_SEPARATION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SharpEnergy {
    pub value: f64,
    /// Two points coincide; `value` is `+inf`.
    pub coincident: bool,
}

pub fn energy_sharp(pot: &Potential, config: &[ComplexPoint], theta: f64) -> Result<SharpEnergy> {
    let n = config.len();
    if n < 2 {
        return Err(arg("the discrete energy needs at least two points"));
    }
    let nf = n as f64;
    let mut phi = 0.0;
    for &z in config {
        phi += pot.phi(z)?;
    }
    let mut log_sum = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            let d = (config[j] - config[k]).norm();
            if d == 0.0 {
                return Ok(SharpEnergy { value: f64::INFINITY, coincident: true });
            }
            log_sum -= d.ln();
        }
    }
    let value = 2.0 * theta * phi / nf + 2.0 * log_sum / (nf * (nf - 1.0));
    Ok(SharpEnergy { value, coincident: false })
}

/// Gradient of `E#` with respect to `(Re z_j, Im z_j)`, stored as complex numbers.
pub fn energy_sharp_gradient(
    pot: &Potential,
    config: &[ComplexPoint],
    theta: f64,
) -> Result<Vec<Complex64>> {
    let n = config.len();
    if n < 2 {
        return Err(arg("the discrete energy needs at least two points"));
    }
    let nf = n as f64;
    let pair = 2.0 / (nf * (nf - 1.0));
    let mut grad = Vec::with_capacity(n);
    for (j, &z) in config.iter().enumerate() {
        let (gx, gy) = pot.gradient(z)?;
        let mut g = Complex64::new(gx, gy) * (2.0 * theta / nf);
        for (k, &w) in config.iter().enumerate() {
            if k != j {
                let d = z - w;
                g -= d / d.norm_sqr() * pair;
            }
        }
        grad.push(g);
    }
    Ok(grad)
}

/// Largest coordinate mismatch between the analytic gradient and central
/// differences with step `step`, together with the largest analytic entry.
pub fn gradient_check(
    pot: &Potential,
    config: &[ComplexPoint],
    theta: f64,
    step: f64,
) -> Result<(f64, f64)> {
    let grad = energy_sharp_gradient(pot, config, theta)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    let mut work = config.to_vec();
    for j in 0..config.len() {
        for dir in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
            work[j] = config[j] + dir * step;
            let up = energy_sharp(pot, &work, theta)?.value;
            work[j] = config[j] - dir * step;
            let down = energy_sharp(pot, &work, theta)?.value;
            work[j] = config[j];
            let fd = (up - down) / (2.0 * step);
            let an = if dir.re == 1.0 { grad[j].re } else { grad[j].im };
            worst = worst.max((fd - an).abs());
            scale = scale.max(an.abs());
        }
    }
    Ok((worst, scale))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeketeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop when `max |grad| <= grad_tol (1 + |E#|)`.
    pub grad_tol: f64,
    pub exec: Exec,
}

impl Default for FeketeOptions {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, max_iterations: 200_000, grad_tol: 1e-8, exec: Exec::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeketeResult {
    pub config: Vec<ComplexPoint>,
    pub energy_sharp: f64,
    /// `exp(-energy_sharp)`.
    pub m_estimate: f64,
    pub restarts_used: usize,
    /// Restarts that reached the gradient tolerance.
    pub converged_restarts: usize,
    /// Index of the restart that produced the result.
    pub best_restart: usize,
    pub gradient_norm: f64,
    pub iterations: usize,
}

struct LocalOptimum {
    config: Vec<ComplexPoint>,
    energy: f64,
    gradient_norm: f64,
    iterations: usize,
}

fn min_separation(config: &[ComplexPoint]) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..config.len() {
        for k in j + 1..config.len() {
            best = best.min((config[j] - config[k]).norm());
        }
    }
    best
}

fn inf_norm(g: &[Complex64]) -> f64 {
    g.iter().fold(0.0f64, |a, v| a.max(v.re.abs()).max(v.im.abs()))
}

/// Gradient descent with a Barzilai-Borwein trial step and Armijo
/// backtracking (with a round-off allowance in the decrease test).
fn descend(
    pot: &Potential,
    mut x: Vec<ComplexPoint>,
    theta: f64,
    opts: &FeketeOptions,
) -> std::result::Result<LocalOptimum, String> {
    let mut f = energy_sharp(pot, &x, theta).map_err(|e| e.to_string())?.value;
    let mut g = energy_sharp_gradient(pot, &x, theta).map_err(|e| e.to_string())?;
    let mut step = 1e-2 / inf_norm(&g).max(1e-12);
    for it in 0..opts.max_iterations {
        let gn = inf_norm(&g);
        if gn <= opts.grad_tol * (1.0 + f.abs()) {
            return Ok(LocalOptimum { config: x, energy: f, gradient_norm: gn, iterations: it });
        }
        let g2: f64 = g.iter().map(|v| v.norm_sqr()).sum();
        let slack = 1e-14 * (1.0 + f.abs());
        let mut alpha = step.clamp(1e-14, 1e6);
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<ComplexPoint> = x.iter().zip(&g).map(|(p, d)| p - d * alpha).collect();
            if min_separation(&trial) >= MIN_SEPARATION {
                let ft = energy_sharp(pot, &trial, theta).map_err(|e| e.to_string())?.value;
                if ft.is_finite() && ft <= f - 1e-4 * alpha * g2 + slack {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            return Err(format!("line search failed at iteration {it} (|grad| = {gn:.3e}, E = {f})"));
        };
        let gnew = energy_sharp_gradient(pot, &xn, theta).map_err(|e| e.to_string())?;
        // BB1 step from the displacement and gradient change.
        let mut ss = 0.0;
        let mut sy = 0.0;
        for j in 0..x.len() {
            let s = xn[j] - x[j];
            let y = gnew[j] - g[j];
            ss += s.norm_sqr();
            sy += s.re * y.re + s.im * y.im;
        }
        step = if sy > 0.0 { ss / sy } else { 2.0 * alpha };
        x = xn;
        f = fnew;
        g = gnew;
    }
    Err(format!("no convergence in {} iterations", opts.max_iterations))
}

/// Multi-start minimization of `E#` from points uniform in the disk that
/// carries the equilibrium mass.
pub fn optimize_fekete(
    pot: &Potential,
    n: usize,
    theta: f64,
    opts: &FeketeOptions,
) -> Result<FeketeResult> {
    if n < 2 {
        return Err(arg(format!("Fekete configurations need N >= 2, got {n}")));
    }
    if opts.restarts == 0 {
        return Err(arg("at least one restart is required"));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(arg(format!("theta must be positive, got {theta}")));
    }
    let radius = mass_radius(pot, 1.0 / (2.0 * theta))?;
    let runs = opts.exec.map_range(opts.restarts, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        let start: Vec<ComplexPoint> = (0..n)
            .map(|_| {
                let rr = radius * rng.random::<f64>().sqrt();
                let t = rng.random::<f64>() * std::f64::consts::TAU;
                Complex64::from_polar(rr, t)
            })
            .collect();
        descend(pot, start, theta, opts)
    });
    let mut best: Option<(usize, LocalOptimum)> = None;
    let mut failures = Vec::new();
    let mut converged = 0;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(opt) => {
                converged += 1;
                if best.as_ref().is_none_or(|(_, b)| opt.energy < b.energy) {
                    best = Some((r, opt));
                }
            }
            Err(msg) => failures.push(format!("restart {r}: {msg}")),
        }
    }
    let Some((best_restart, opt)) = best else {
        return Err(Error::Optimization(failures.join("; ")));
    };
    Ok(FeketeResult {
        m_estimate: (-opt.energy).exp(),
        energy_sharp: opt.energy,
        config: opt.config,
        restarts_used: opts.restarts,
        converged_restarts: converged,
        best_restart,
        gradient_norm: opt.gradient_norm,
        iterations: opt.iterations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotoneReport {
    pub holds: bool,
    /// `(N, M_estimate, energy_sharp)` per requested `N`.
    pub estimates: Vec<(usize, f64, f64)>,
}

/// Whether the estimates `M_{Phi,N}(theta)` do not increase along `ns`
/// (slack `1e-6`).
pub fn m_decreasing_check(
    pot: &Potential,
    theta: f64,
    ns: &[usize],
    opts: &FeketeOptions,
) -> Result<MonotoneReport> {
    if ns.is_empty() || ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(arg("N values must be non-empty and increasing"));
    }
    let mut estimates = Vec::with_capacity(ns.len());
    for &n in ns {
        let r = optimize_fekete(pot, n, theta, opts)?;
        estimates.push((n, r.m_estimate, r.energy_sharp));
    }
    let holds = estimates.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-6);
    Ok(MonotoneReport { holds, estimates })
}

/// Membership in the set of configurations whose energy is within `eps` of
/// `log(1/m_ref)`.
pub fn membership_a(
    pot: &Potential,
    config: &[ComplexPoint],
    theta: f64,
    eps: f64,
    m_ref: f64,
) -> Result<bool> {
    if !(m_ref > 0.0) || eps < 0.0 {
        return Err(arg("membership needs M_ref > 0 and eps >= 0"));
    }
    let e = energy_sharp(pot, config, theta)?;
    Ok(!e.coincident && e.value <= -m_ref.ln() + eps + 1e-9)
}

/// Share of points with `|z| <= radius`.
pub fn fraction_in_k(config: &[ComplexPoint], radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(arg("radius must be positive"));
    }
    if config.is_empty() {
        return Err(arg("empty configuration"));
    }
    let inside = config.iter().filter(|z| z.norm() <= radius).count();
    Ok(inside as f64 / config.len() as f64)
}

/// Mass `1/N` per point on the cell containing it.
pub fn empirical_measure(config: &[ComplexPoint], grid: &BoxGrid) -> Result<DiscreteMeasure> {
    if config.is_empty() {
        return Err(arg("empty configuration"));
    }
    let w = 1.0 / (config.len() as f64 * grid.cell_area());
    let mut weights = vec![0.0; grid.len()];
    for z in config {
        let (i, j) = grid
            .cell_of(*z)
            .ok_or_else(|| arg(format!("point ({}, {}) lies outside the grid", z.re, z.im)))?;
        weights[grid.index(i, j)] += w;
    }
    DiscreteMeasure::new(*grid, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_point_energy_matches_calculus() {
        let pot = Potential::gaussian();
        let r = 0.5f64.sqrt();
        let e = energy_sharp(&pot, &[c(r, 0.0), c(-r, 0.0)], 0.5).unwrap();
        let m = 2f64.sqrt() * (-0.5f64).exp();
        assert!((e.value - (1.0 / m).ln()).abs() < 1e-14);
        // Dense 1-D search for the maximizer of 2r exp(-2 theta r^2).
        let best = (1..200_000)
            .map(|i| i as f64 * 1e-5)
            .max_by(|a, b| {
                let f = |r: f64| 2.0 * r * (-r * r).exp();
                f(*a).total_cmp(&f(*b))
            })
            .unwrap();
        assert!((best - r).abs() < 1e-5);
    }

    #[test]
    fn energy_agrees_with_pair_weights() {
        let pot = Potential::elbau_felder(0.3).unwrap();
        let cfg = [c(0.1, 0.2), c(-0.5, 0.4), c(0.7, -0.3), c(0.0, -0.9)];
        let theta = 0.7;
        let n = cfg.len() as f64;
        let mut s = 0.0;
        for j in 0..cfg.len() {
            for k in 0..cfg.len() {
                if j != k {
                    s -= pot.pair_energy(cfg[j], cfg[k], theta).unwrap().value.ln();
                }
            }
        }
        s /= n * (n - 1.0);
        assert!((energy_sharp(&pot, &cfg, theta).unwrap().value - s).abs() < 1e-13);
        let swapped = [cfg[2], cfg[0], cfg[3], cfg[1]];
        assert_eq!(
            energy_sharp(&pot, &cfg, theta).unwrap().value,
            energy_sharp(&pot, &swapped, theta).unwrap().value
        );
        let far = [c(5.0, 0.0), c(-5.0, 0.0)];
        assert!(energy_sharp(&pot, &far, theta).unwrap().value > 10.0);
    }

    #[test]
    fn coincident_points_are_flagged() {
        let e = energy_sharp(&Potential::gaussian(), &[c(0.1, 0.1), c(0.1, 0.1)], 0.5).unwrap();
        assert!(e.coincident && e.value == f64::INFINITY);
        assert!(energy_sharp(&Potential::gaussian(), &[c(0.0, 0.0)], 0.5).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = [c(0.1, 0.2), c(-0.5, 0.4), c(0.7, -0.3), c(0.0, -0.9), c(0.3, 0.6)];
        for pot in [Potential::gaussian(), Potential::elbau_felder(-0.4).unwrap(), Potential::radial_monomial(3).unwrap()] {
            let (err, scale) = gradient_check(&pot, &cfg, 0.5, 1e-6).unwrap();
            assert!(err <= 1e-4 * scale.max(1.0) && scale > 1e-2, "{err} {scale}");
        }
    }

    #[test]
    fn rotation_invariance_for_radial_potentials() {
        let cfg = [c(0.1, 0.2), c(-0.5, 0.4), c(0.7, -0.3)];
        let rot: Vec<_> = cfg.iter().map(|z| z * Complex64::from_polar(1.0, 0.77)).collect();
        for pot in [Potential::gaussian(), Potential::radial_monomial(2).unwrap()] {
            let a = energy_sharp(&pot, &cfg, 0.5).unwrap().value;
            let b = energy_sharp(&pot, &rot, 0.5).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn two_and_three_point_optima() {
        let pot = Potential::gaussian();
        let opts = FeketeOptions { restarts: 4, seed: 7, ..Default::default() };
        let two = optimize_fekete(&pot, 2, 0.5, &opts).unwrap();
        for z in &two.config {
            assert!((z.norm() - 0.5f64.sqrt()).abs() < 1e-5);
        }
        assert!((two.config[0] + two.config[1]).norm() < 1e-5);
        assert_eq!(two.m_estimate, (-two.energy_sharp).exp());
        assert!(two.gradient_norm <= 1e-8 * (1.0 + two.energy_sharp.abs()));

        let three = optimize_fekete(&pot, 3, 0.5, &opts).unwrap();
        let d = [
            (three.config[0] - three.config[1]).norm(),
            (three.config[1] - three.config[2]).norm(),
            (three.config[0] - three.config[2]).norm(),
        ];
        assert!((d[0] - d[1]).abs() < 1e-5 && (d[1] - d[2]).abs() < 1e-5);
        let (err, _) = gradient_check(&pot, &three.config, 0.5, 1e-6).unwrap();
        assert!(err < 1e-4);
    }

    #[test]
    fn optimization_is_reproducible_across_policies() {
        let pot = Potential::elbau_felder(0.5).unwrap();
        let a = optimize_fekete(&pot, 6, 0.5, &FeketeOptions { seed: 3, exec: Exec::Sequential, ..Default::default() }).unwrap();
        let b = optimize_fekete(&pot, 6, 0.5, &FeketeOptions { seed: 3, exec: Exec::Parallel, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        let c1 = optimize_fekete(&pot, 2, 0.5, &FeketeOptions { restarts: 1, seed: 9, ..Default::default() }).unwrap();
        let c2 = optimize_fekete(&pot, 2, 0.5, &FeketeOptions { restarts: 1, seed: 9, ..Default::default() }).unwrap();
        assert_eq!(c1, c2);
    }

    #[test]
    fn capacity_estimates_decrease_with_n() {
        let opts = FeketeOptions { restarts: 6, seed: 1, ..Default::default() };
        let r = m_decreasing_check(&Potential::gaussian(), 0.5, &[2, 3, 4, 6], &opts).unwrap();
        assert!(r.holds, "{r:?}");
        let r = m_decreasing_check(&Potential::radial_monomial(2).unwrap(), 0.5, &[2, 4], &opts).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(m_decreasing_check(&Potential::gaussian(), 0.5, &[2], &opts).unwrap().holds);
        assert!(m_decreasing_check(&Potential::gaussian(), 0.5, &[3, 2], &opts).is_err());
    }

    #[test]
    fn membership_and_fraction() {
        let pot = Potential::gaussian();
        let opts = FeketeOptions { restarts: 4, seed: 2, ..Default::default() };
        let f = optimize_fekete(&pot, 20, 0.5, &opts).unwrap();
        assert!(membership_a(&pot, &f.config, 0.5, 1e-3, f.m_estimate).unwrap());
        assert!(membership_a(&pot, &f.config, 0.5, 0.0, f.m_estimate).unwrap());
        let mut moved = f.config.clone();
        moved[0] = c(10.0, 0.0);
        assert!(!membership_a(&pot, &moved, 0.5, 0.1, f.m_estimate).unwrap());
        assert_eq!(fraction_in_k(&f.config, 1.5).unwrap(), 1.0);
        assert_eq!(fraction_in_k(&f.config, f64::INFINITY).unwrap(), 1.0);
        assert!(fraction_in_k(&f.config, 1e-4).unwrap() < 0.1);
    }

    #[test]
    fn empirical_measure_deposits_unit_mass() {
        let g = BoxGrid::new(2.0, 16).unwrap();
        let one = empirical_measure(&[c(0.01, 0.01)], &g).unwrap();
        assert!((one.total - 1.0).abs() < 1e-14);
        assert_eq!(one.weights.iter().filter(|w| **w > 0.0).count(), 1);
        let cfg = [c(0.3, 0.1), c(-1.0, 0.5), c(0.3, 0.12)];
        let a = empirical_measure(&cfg, &g).unwrap();
        let b = empirical_measure(&[cfg[2], cfg[0], cfg[1]], &g).unwrap();
        assert_eq!(a, b);
        assert!(empirical_measure(&[c(3.0, 0.0)], &g).is_err());
        let _ = PI;
    }
}
