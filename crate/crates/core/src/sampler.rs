//! Random-walk Metropolis for the ensemble
//!
//! ```text
//! Pi(z) ~ prod_{j<k} |z_j - z_k|^2 exp(-beta sum Phi(z_j))
//! ```
//!
//! with single-particle moves, plus the histogram and kernel diagnostics
//! computed from the samples.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::ensemble::{make_scaling, Scale};
use crate::equilibrium::{mass_radius, DiscreteMeasure};
use crate::error::{arg, Error, Result};
use crate::exec::Exec;
use crate::grid::BoxGrid;
use crate::kernel::WeightedBasis;
use crate::potential::{ComplexPoint, Potential};

/// Accepted moves between full recomputations of the log-density.
pub const RECOMPUTE_EVERY: u64 = 10_000;
/// Largest tolerated gap between the running and the recomputed log-density,
/// relative to `1 + |log-density|`.
pub const MAX_DRIFT: f64 = 1e-8;

const ADAPT_BATCH: u64 = 100;

/// `-beta sum Phi(z_j) + 2 sum_{j<k} log|z_j - z_k|`; `-inf` when two
/// points coincide.
pub fn log_unnormalized_density(pot: &Potential, beta: f64, config: &[ComplexPoint]) -> Result<f64> {
    if config.is_empty() {
        return Err(arg("empty configuration"));
    }
    let mut s = 0.0;
    for &z in config {
        s -= beta * pot.phi(z)?;
    }
    for j in 0..config.len() {
        for k in j + 1..config.len() {
            let d2 = (config[j] - config[k]).norm_sqr();
            if d2 == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            s += d2.ln();
        }
    }
    Ok(s)
}

/// One Metropolis chain at fixed `beta`.
#[derive(Clone, Debug)]
pub struct ChainState {
    pub config: Vec<ComplexPoint>,
    pub log_density: f64,
    pub step_scale: f64,
    pub rng: ChaCha8Rng,
    pub accepted: u64,
    pub proposed: u64,
    /// Largest relative drift seen at a recomputation.
    pub max_drift: f64,
    phi: Vec<f64>,
    beta: f64,
}

impl ChainState {
    pub fn new(
        pot: &Potential,
        beta: f64,
        config: Vec<ComplexPoint>,
        step_scale: f64,
        seed: u64,
    ) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(arg(format!("beta must be non-negative, got {beta}")));
        }
        if !(step_scale.is_finite() && step_scale > 0.0) {
            return Err(arg("step scale must be positive"));
        }
        let log_density = log_unnormalized_density(pot, beta, &config)?;
        if !log_density.is_finite() {
            return Err(arg("initial configuration has coincident points"));
        }
        let phi = config.iter().map(|z| pot.phi(*z)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            log_density,
            step_scale,
            rng: ChaCha8Rng::seed_from_u64(seed),
            accepted: 0,
            proposed: 0,
            max_drift: 0.0,
            phi,
            beta,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// One proposal; returns whether it was accepted.
    pub fn step(&mut self, pot: &Potential) -> Result<bool> {
        let n = self.config.len();
        let j = self.rng.random_range(0..n);
        let dx: f64 = self.rng.sample(StandardNormal);
        let dy: f64 = self.rng.sample(StandardNormal);
        let u: f64 = self.rng.random();
        self.proposed += 1;
        let old = self.config[j];
        let new = old + Complex64::new(dx, dy) * self.step_scale;
        let phi_new = match pot.phi(new) {
            Ok(v) => v,
            Err(Error::Domain { .. }) => return Ok(false),
            Err(e) => return Err(e),
        };
        let mut delta = -self.beta * (phi_new - self.phi[j]);
        for (k, &w) in self.config.iter().enumerate() {
            if k != j {
                let d_new = (new - w).norm_sqr();
                if d_new == 0.0 {
                    return Ok(false);
                }
                delta += (d_new / (old - w).norm_sqr()).ln();
            }
        }
        if !(delta >= 0.0 || u < delta.exp()) {
            return Ok(false);
        }
        self.config[j] = new;
        self.phi[j] = phi_new;
        self.log_density += delta;
        self.accepted += 1;
        if self.accepted % RECOMPUTE_EVERY == 0 {
            let full = log_unnormalized_density(pot, self.beta, &self.config)?;
            let drift = (full - self.log_density).abs() / (1.0 + full.abs());
            self.max_drift = self.max_drift.max(drift);
            if drift > MAX_DRIFT {
                return Err(Error::Inconsistency(format!(
                    "log-density drift {drift:.3e} exceeds {MAX_DRIFT:.0e}"
                )));
            }
            self.log_density = full;
        }
        Ok(true)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McmcOptions {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    /// Total proposals, burn-in included.
    pub steps: u64,
    /// Defaults to `200 N`.
    pub burn_in: Option<u64>,
    /// Defaults to `N`.
    pub thin: Option<u64>,
    pub target_acceptance: f64,
}

impl McmcOptions {
    pub fn new(n: usize, tau: f64, steps: u64) -> Self {
        Self { n, tau, steps, burn_in: None, thin: None, target_acceptance: 0.3 }
    }

    pub fn burn_in(&self) -> u64 {
        self.burn_in.unwrap_or(200 * self.n as u64)
    }

    pub fn thin(&self) -> u64 {
        self.thin.unwrap_or(self.n as u64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub seed: u64,
    /// Acceptance after burn-in.
    pub acceptance_rate: f64,
    pub step_scale: f64,
    pub burn_in: u64,
    pub thin: u64,
    pub samples: u64,
    /// Mean log-density over consecutive blocks of samples.
    pub log_density_trace: Vec<f64>,
    pub max_drift: f64,
    pub mixing_warning: Option<String>,
}

/// Runs one chain and hands every thinned post-burn-in state to `observe`
/// together with its proposal index.
pub fn mcmc_run_observed(
    pot: &Potential,
    opts: &McmcOptions,
    seed: u64,
    mut observe: impl FnMut(u64, &[ComplexPoint]),
) -> Result<ChainDiagnostics> {
    let params = make_scaling(opts.n, Scale::Tau(opts.tau))?;
    let burn_in = opts.burn_in();
    let thin = opts.thin();
    if opts.steps <= burn_in {
        return Err(arg(format!("steps ({}) must exceed burn-in ({burn_in})", opts.steps)));
    }
    if thin == 0 {
        return Err(arg("thinning interval must be positive"));
    }
    if !(opts.target_acceptance > 0.0 && opts.target_acceptance < 1.0) {
        return Err(arg("target acceptance must lie in (0, 1)"));
    }
    let radius = mass_radius(pot, opts.tau)?;
    let mut init = ChaCha8Rng::seed_from_u64(seed);
    init.set_stream(1);
    let config: Vec<ComplexPoint> = (0..opts.n)
        .map(|_| {
            let r = radius * init.random::<f64>().sqrt();
            Complex64::from_polar(r, init.random::<f64>() * std::f64::consts::TAU)
        })
        .collect();
    let step0 = radius / (opts.n as f64).sqrt();
    let mut chain = ChainState::new(pot, params.beta, config, step0, seed)?;

    let mut batch_accepted = 0;
    for t in 0..burn_in {
        if chain.step(pot)? {
            batch_accepted += 1;
        }
        if (t + 1) % ADAPT_BATCH == 0 {
            let rate = batch_accepted as f64 / ADAPT_BATCH as f64;
            chain.step_scale *= (rate - opts.target_acceptance).exp();
            batch_accepted = 0;
        }
    }
    chain.accepted = 0;
    chain.proposed = 0;

    let samples = (opts.steps - burn_in) / thin;
    let block = (samples / 100).max(1);
    let mut trace = Vec::new();
    let mut block_sum = 0.0;
    let mut in_block = 0;
    for t in burn_in..opts.steps {
        chain.step(pot)?;
        if (t + 1 - burn_in) % thin == 0 {
            observe(t + 1, &chain.config);
            block_sum += chain.log_density;
            in_block += 1;
            if in_block == block {
                trace.push(block_sum / block as f64);
                block_sum = 0.0;
                in_block = 0;
            }
        }
    }
    let acceptance_rate = chain.acceptance_rate();
    let mixing_warning = (!(0.05..=0.8).contains(&acceptance_rate))
        .then(|| format!("acceptance rate {acceptance_rate:.3} outside [0.05, 0.8]"));
    Ok(ChainDiagnostics {
        seed,
        acceptance_rate,
        step_scale: chain.step_scale,
        burn_in,
        thin,
        samples,
        log_density_trace: trace,
        max_drift: chain.max_drift,
        mixing_warning,
    })
}

/// Thinned post-burn-in samples of one chain.
pub fn mcmc_run(
    pot: &Potential,
    opts: &McmcOptions,
    seed: u64,
) -> Result<(Vec<Vec<ComplexPoint>>, ChainDiagnostics)> {
    let mut samples = Vec::new();
    let diag = mcmc_run_observed(pot, opts, seed, |_, c| samples.push(c.to_vec()))?;
    Ok((samples, diag))
}

/// Particle counts on the cells of a grid, with everything outside the box
/// collected in an overflow bucket.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    #[serde(skip)]
    pub grid: BoxGrid,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
}

impl Histogram {
    pub fn new(grid: BoxGrid) -> Self {
        Self { grid, counts: vec![0; grid.len()], overflow: 0, total: 0 }
    }

    pub fn add(&mut self, config: &[ComplexPoint]) {
        for z in config {
            self.total += 1;
            match self.grid.cell_of(*z) {
                Some((i, j)) => self.counts[self.grid.index(i, j)] += 1,
                None => self.overflow += 1,
            }
        }
    }

    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.grid != other.grid {
            return Err(arg("histograms live on different grids"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.total += other.total;
        Ok(())
    }

    pub fn overflow_mass(&self) -> f64 {
        self.overflow as f64 / self.total.max(1) as f64
    }

    /// Share of all particles in each cell.
    pub fn cell_masses(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.counts.iter().map(|c| *c as f64 / t).collect()
    }

    /// Density of the binned particles; its total plus the overflow mass is 1.
    pub fn to_measure(&self) -> Result<DiscreteMeasure> {
        if self.total == 0 {
            return Err(arg("histogram is empty"));
        }
        let a = self.grid.cell_area();
        DiscreteMeasure::new(self.grid, self.cell_masses().into_iter().map(|m| m / a).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Marginal {
    pub measure: DiscreteMeasure,
    pub overflow_mass: f64,
    pub particles: u64,
}

/// Pooled one-point marginal of all particles of all samples.
pub fn marginal_histogram(samples: &[Vec<ComplexPoint>], grid: &BoxGrid) -> Result<Marginal> {
    if samples.is_empty() {
        return Err(arg("no samples"));
    }
    let mut h = Histogram::new(*grid);
    for s in samples {
        h.add(s);
    }
    Ok(Marginal { measure: h.to_measure()?, overflow_mass: h.overflow_mass(), particles: h.total })
}

/// Masses of `measure` collected on the cells of `coarse`; mass at nodes
/// outside `coarse` goes to the returned overflow.
pub fn bin_masses(measure: &DiscreteMeasure, coarse: &BoxGrid) -> (Vec<f64>, f64) {
    let a = measure.grid.cell_area();
    let mut out = vec![0.0; coarse.len()];
    let mut overflow = 0.0;
    for (k, w) in measure.weights.iter().enumerate() {
        if *w > 0.0 {
            match coarse.cell_of(measure.grid.point_at(k)) {
                Some((i, j)) => out[coarse.index(i, j)] += w * a,
                None => overflow += w * a,
            }
        }
    }
    (out, overflow)
}

/// Total variation `1/2 sum |p - q|` with the overflow buckets as one more bin.
pub fn total_variation(p: &[f64], p_over: f64, q: &[f64], q_over: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(arg("bin counts differ"));
    }
    let s: f64 = p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum();
    Ok(0.5 * (s + (p_over - q_over).abs()))
}

/// `(1/N) int_cell K(z, z) exp(-beta Phi)` per cell of `coarse`, by a
/// `sub x sub` midpoint rule inside each cell.
pub fn kernel_bin_masses(
    basis: &WeightedBasis,
    coarse: &BoxGrid,
    sub: usize,
    exec: Exec,
) -> Result<Vec<f64>> {
    if sub == 0 {
        return Err(arg("sub-division must be positive"));
    }
    let pot = basis.potential();
    let beta = basis.beta();
    let n = basis.dimension() as f64;
    let h = coarse.spacing();
    let hs = h / sub as f64;
    let vals = exec.map_range(coarse.len(), |k| -> Result<f64> {
        let c = coarse.point_at(k);
        let mut s = 0.0;
        for a in 0..sub {
            for b in 0..sub {
                let z = c + Complex64::new(
                    -0.5 * h + (a as f64 + 0.5) * hs,
                    -0.5 * h + (b as f64 + 0.5) * hs,
                );
                s += basis.kernel_diagonal(z) * (-beta * pot.phi(z)?).exp();
            }
        }
        Ok(s * hs * hs / n)
    });
    vals.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelCrosscheck {
    /// Largest `|histogram density - kernel density|` over the cells, both
    /// averaged over the cell.
    pub max_density_deviation: f64,
    /// Largest difference of cell masses.
    pub max_mass_deviation: f64,
    /// Mean of `|K(z_j, z_k)|^2 / (K(z_j, z_j) K(z_k, z_k))` over particle pairs.
    pub diagonality: f64,
}

/// Compares a histogram of samples with the one-point density from the
/// kernel. At most `max_pair_samples` samples enter the diagonality mean.
pub fn kernel_crosscheck(
    basis: &WeightedBasis,
    pot: &Potential,
    beta: f64,
    hist: &Histogram,
    samples: &[Vec<ComplexPoint>],
    max_pair_samples: usize,
    exec: Exec,
) -> Result<KernelCrosscheck> {
    if basis.potential().descriptor() != pot.descriptor() {
        return Err(arg("basis was built for a different potential"));
    }
    if (basis.beta() - beta).abs() > 1e-12 * beta.abs().max(1.0) {
        return Err(arg("basis was built for a different beta"));
    }
    if let Some(s) = samples.iter().find(|s| s.len() != basis.dimension()) {
        return Err(arg(format!(
            "sample has {} points but the basis dimension is {}",
            s.len(),
            basis.dimension()
        )));
    }
    if hist.total == 0 {
        return Err(arg("histogram is empty"));
    }
    let exact = kernel_bin_masses(basis, &hist.grid, 16, exec)?;
    let area = hist.grid.cell_area();
    let mut max_mass = 0.0f64;
    for (p, q) in hist.cell_masses().iter().zip(&exact) {
        max_mass = max_mass.max((p - q).abs());
    }
    let stride = (samples.len() / max_pair_samples.max(1)).max(1);
    let picked: Vec<&Vec<ComplexPoint>> = samples.iter().step_by(stride).collect();
    let per_sample = exec.map_range(picked.len(), |i| {
        let s = picked[i];
        let diag: Vec<f64> = s.iter().map(|z| basis.kernel_diagonal(*z)).collect();
        let mut acc = 0.0;
        let mut count = 0usize;
        for j in 0..s.len() {
            for k in j + 1..s.len() {
                acc += basis.kernel(s[j], s[k]).norm_sqr() / (diag[j] * diag[k]);
                count += 1;
            }
        }
        (acc, count)
    });
    let (acc, count) = per_sample.iter().fold((0.0, 0usize), |(a, c), (x, y)| (a + x, c + y));
    Ok(KernelCrosscheck {
        max_density_deviation: max_mass / area,
        max_mass_deviation: max_mass,
        diagonality: if count == 0 { 0.0 } else { acc / count as f64 },
    })
}

/// Lower bound `-N(N-1) E[sigma] - N int log S d sigma` on `log Z_N`, where
/// `S` is the density of `measure` and `energy` its weighted energy.
pub fn partition_lower_bound(n: usize, energy: f64, measure: &DiscreteMeasure) -> f64 {
    let nf = n as f64;
    let a = measure.grid.cell_area();
    let entropy: f64 =
        measure.weights.iter().filter(|w| **w > 0.0).map(|w| w * w.ln() * a).sum();
    -nf * (nf - 1.0) * energy - nf * entropy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fekete::energy_sharp;
    use crate::kernel::build_basis;
    use crate::quadrature::moment_grid;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn density_examples() {
        let g = Potential::gaussian();
        assert_eq!(log_unnormalized_density(&g, 2.0, &[c(0.0, 0.0), c(0.0, 1.0)]).unwrap(), -2.0);
        let one = log_unnormalized_density(&g, 3.0, &[c(0.5, 0.5)]).unwrap();
        assert!((one + 1.5).abs() < 1e-15);
        let v = log_unnormalized_density(&g, 1.0, &[c(0.2, 0.1), c(0.2, 0.1)]).unwrap();
        assert_eq!(v, f64::NEG_INFINITY);
    }

    #[test]
    fn density_equals_scaled_sharp_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pot = Potential::elbau_felder(0.4).unwrap();
        for n in [2usize, 3, 7, 12] {
            let cfg: Vec<_> =
                (0..n).map(|_| c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)).collect();
            let beta = 1.7;
            let theta = beta / (2.0 * (n - 1) as f64);
            let lhs = log_unnormalized_density(&pot, beta, &cfg).unwrap();
            let rhs = -((n * (n - 1)) as f64) * energy_sharp(&pot, &cfg, theta).unwrap().value;
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }

    #[test]
    fn chain_is_reproducible_and_validates() {
        let pot = Potential::gaussian();
        let opts = McmcOptions::new(5, 1.0, 20_000);
        let (a, da) = mcmc_run(&pot, &opts, 11).unwrap();
        let (b, db) = mcmc_run(&pot, &opts, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        assert_eq!(a.len() as u64, (20_000 - 1000) / 5);
        let (c2, _) = mcmc_run(&pot, &opts, 12).unwrap();
        assert_ne!(a, c2);
        assert!(mcmc_run(&pot, &McmcOptions::new(1, 1.0, 1000), 1).is_err());
        assert!(mcmc_run(&pot, &McmcOptions::new(4, 1.0, 100), 1).is_err());
        assert!((0.05..=0.8).contains(&da.acceptance_rate) && da.mixing_warning.is_none());
    }

    #[test]
    fn running_density_stays_consistent() {
        let pot = Potential::radial_monomial(2).unwrap();
        let mut ch = ChainState::new(&pot, 8.0, vec![c(0.1, 0.0), c(-0.3, 0.2), c(0.0, -0.5), c(0.4, 0.4)], 0.2, 3).unwrap();
        for _ in 0..50_000 {
            ch.step(&pot).unwrap();
        }
        let full = log_unnormalized_density(&pot, 8.0, &ch.config).unwrap();
        assert!((full - ch.log_density).abs() < 1e-9 * (1.0 + full.abs()));
        assert!(ch.accepted > RECOMPUTE_EVERY && ch.max_drift < MAX_DRIFT);
    }

    #[test]
    fn detailed_balance_between_two_regions() {
        // One particle, beta = 1 gaussian, frozen step.
        let pot = Potential::gaussian();
        let mut ch = ChainState::new(&pot, 1.0, vec![c(0.0, 0.0)], 0.8, 99).unwrap();
        let in_a = |z: Complex64| z.re < -0.3 && z.im.abs() < 0.5;
        let in_b = |z: Complex64| z.re > 0.1 && z.re < 0.9 && z.im > 0.0;
        let (mut ab, mut ba) = (0u64, 0u64);
        for _ in 0..2_000_000 {
            let before = ch.config[0];
            ch.step(&pot).unwrap();
            let after = ch.config[0];
            if in_a(before) && in_b(after) {
                ab += 1;
            } else if in_b(before) && in_a(after) {
                ba += 1;
            }
        }
        let sigma = ((ab + ba) as f64).sqrt();
        assert!(ab > 1000 && ba > 1000);
        assert!((ab as f64 - ba as f64).abs() <= 3.0 * sigma, "{ab} {ba}");
    }

    #[test]
    fn particles_are_exchangeable() {
        let pot = Potential::gaussian();
        let n = 4;
        let mut opts = McmcOptions::new(n, 1.0, 2_000_000);
        opts.thin = Some(200);
        let (samples, _) = mcmc_run(&pot, &opts, 21).unwrap();
        // Four quadrant bins per particle index.
        let mut table = vec![[0f64; 4]; n];
        for s in &samples {
            for (j, z) in s.iter().enumerate() {
                let q = (z.re >= 0.0) as usize + 2 * (z.im >= 0.0) as usize;
                table[j][q] += 1.0;
            }
        }
        let total: f64 = table.iter().flatten().sum();
        let mut stat = 0.0;
        for j in 0..n {
            let row: f64 = table[j].iter().sum();
            for q in 0..4 {
                let col: f64 = table.iter().map(|r| r[q]).sum();
                let e = row * col / total;
                stat += (table[j][q] - e).powi(2) / e;
            }
        }
        let p = 1.0 - ChiSquared::new(9.0).unwrap().cdf(stat);
        assert!(p > 0.01, "chi2 = {stat}, p = {p}");
    }

    #[test]
    fn two_particle_marginal_matches_quadrature() {
        let pot = Potential::gaussian();
        let mut opts = McmcOptions::new(2, 1.0, 3_000_000);
        opts.thin = Some(4);
        let (samples, _) = mcmc_run(&pot, &opts, 4).unwrap();
        let coarse = BoxGrid::new(2.0, 16).unwrap();
        let m = marginal_histogram(&samples, &coarse).unwrap();
        let (mc, _) = bin_masses(&m.measure, &coarse);
        // Direct 2-D integration of the exact two-point density over the
        // partner particle: |z - w|^2 exp(-|z|^2 - |w|^2) / (2 pi^2).
        let fine = BoxGrid::new(4.0, 160).unwrap();
        let a = fine.cell_area();
        let mut exact = vec![0.0; coarse.len()];
        for k in 0..fine.len() {
            let z = fine.point_at(k);
            let Some((i, j)) = coarse.cell_of(z) else { continue };
            let mut inner = 0.0;
            for l in 0..fine.len() {
                let w = fine.point_at(l);
                inner += (z - w).norm_sqr() * (-w.norm_sqr()).exp();
            }
            exact[coarse.index(i, j)] +=
                inner * a * a * (-z.norm_sqr()).exp() / (2.0 * std::f64::consts::PI.powi(2));
        }
        let dev = mc.iter().zip(&exact).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(dev <= 0.03 * coarse.cell_area(), "{dev}");
        let sym = mc[coarse.index(5, 6)] - mc[coarse.index(10, 9)];
        assert!(sym.abs() < 0.01);
    }

    #[test]
    fn histogram_bookkeeping() {
        let g = BoxGrid::new(1.0, 16).unwrap();
        let m = marginal_histogram(&[vec![c(0.1, 0.1)]], &g).unwrap();
        assert_eq!(m.measure.weights.iter().filter(|w| **w > 0.0).count(), 1);
        assert!((m.measure.total - 1.0).abs() < 1e-14);
        let m = marginal_histogram(&[vec![c(0.1, 0.1), c(5.0, 0.0)]], &g).unwrap();
        assert_eq!(m.overflow_mass, 0.5);
        assert!((m.measure.total - 0.5).abs() < 1e-14);
        assert!(marginal_histogram(&[], &g).is_err());
        let mut h1 = Histogram::new(g);
        h1.add(&[c(0.1, 0.1)]);
        let mut h2 = Histogram::new(g);
        h2.add(&[c(-0.6, 0.1), c(3.0, 3.0)]);
        h1.merge(&h2).unwrap();
        assert_eq!((h1.total, h1.overflow), (3, 1));
        assert!(h1.merge(&Histogram::new(BoxGrid::new(1.0, 32).unwrap())).is_err());
        let tv = total_variation(&[0.5, 0.5], 0.0, &[1.0, 0.0], 0.0).unwrap();
        assert_eq!(tv, 0.5);
    }

    #[test]
    fn kernel_bins_match_closed_form_and_checks_reject_mismatch() {
        let pot = Potential::gaussian();
        let n = 8;
        let beta = 7.0;
        let grid = moment_grid(&pot, beta, n, 256).unwrap();
        let basis = build_basis(&pot, beta, n, &grid).unwrap();
        let coarse = BoxGrid::new(4.0, 16).unwrap();
        let masses = kernel_bin_masses(&basis, &coarse, 16, Exec::default()).unwrap();
        assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        // Closed form of the one-point density for the gaussian weight.
        let dens = |z: Complex64| {
            let x = beta * z.norm_sqr();
            let mut term = 1.0;
            let mut s = 0.0;
            for j in 0..n {
                if j > 0 {
                    term *= x / j as f64;
                }
                s += term;
            }
            beta / (n as f64 * std::f64::consts::PI) * (-x).exp() * s
        };
        let k = coarse.index(9, 8);
        let z0 = coarse.point_at(k);
        let h = coarse.spacing();
        let mut q = 0.0;
        for a in 0..64 {
            for b in 0..64 {
                q += dens(z0 + c(-0.5 * h + (a as f64 + 0.5) * h / 64.0, -0.5 * h + (b as f64 + 0.5) * h / 64.0));
            }
        }
        q *= (h / 64.0).powi(2);
        assert!((q - masses[k]).abs() < 1e-3 * q, "{q} {}", masses[k]);
        let hist = Histogram::new(coarse);
        assert!(kernel_crosscheck(&basis, &pot, beta + 1.0, &hist, &[], 10, Exec::default()).is_err());
        let ef = Potential::elbau_felder(0.2).unwrap();
        assert!(kernel_crosscheck(&basis, &ef, beta, &hist, &[], 10, Exec::default()).is_err());
    }

    #[test]
    fn diagonality_falls_with_n() {
        let pot = Potential::gaussian();
        let mut stats = Vec::new();
        for n in [4usize, 16] {
            let beta = (n - 1) as f64;
            let grid = moment_grid(&pot, beta, n, 256).unwrap();
            let basis = build_basis(&pot, beta, n, &grid).unwrap();
            let opts = McmcOptions::new(n, 1.0, 400 * n as u64 * 20);
            let mut hist = Histogram::new(BoxGrid::new(4.0, 16).unwrap());
            let (samples, _) = mcmc_run(&pot, &opts, 8).unwrap();
            for s in &samples {
                hist.add(s);
            }
            let x = kernel_crosscheck(&basis, &pot, beta, &hist, &samples, 200, Exec::default()).unwrap();
            stats.push(x.diagonality);
        }
        assert!(stats[1] < stats[0], "{stats:?}");
    }

    #[test]
    fn partition_function_lower_bound_holds() {
        // Exact disk measure of density 1/pi, energy 3/4 at tau = 1.
        let grid = BoxGrid::new(1.5, 300).unwrap();
        let disk = DiscreteMeasure::uniform(grid, |z| z.norm() <= 1.0).unwrap();
        let pot = Potential::gaussian();
        for n in 2..=8 {
            let beta = (n - 1) as f64;
            let mg = moment_grid(&pot, beta, n, 256).unwrap();
            let log_z = build_basis(&pot, beta, n, &mg).unwrap().log_partition_function();
            let bound = partition_lower_bound(n, 0.75, &disk);
            let closed = -((n * (n - 1)) as f64) * 0.75 + n as f64 * std::f64::consts::PI.ln();
            assert!((bound - closed).abs() < 1e-2 * n as f64);
            assert!(log_z >= bound, "N = {n}: {log_z} < {bound}");
        }
    }
}
