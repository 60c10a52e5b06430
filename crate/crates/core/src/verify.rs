//! The acceptance suite behind `droplet-lab verify` and the `acceptance`
//! test target.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::equilibrium::{
    droplets_nested, energy_with_field, equilibrium_measure, extract_droplet, fit_ellipse,
    harmonic_moment_defect, log_potential_field, potential_identity, solve_obstacle_with,
    DiscreteMeasure, Droplet, EnergyReport, HarmonicTest, ObstacleOptions, ObstacleSolution,
};
use crate::error::{arg, Result};
use crate::exec::Exec;
use crate::fekete::{gradient_check, m_decreasing_check, optimize_fekete, FeketeOptions};
use crate::grid::BoxGrid;
use crate::kernel::{build_basis, check_monotone_growth, compute_z, det_sum_dominates, WeightedBasis};
use crate::linalg;
use crate::potential::{ComplexPoint, Potential};
use crate::quadrature::moment_grid;
use crate::sampler::{
    bin_masses, kernel_crosscheck, mcmc_run_observed, partition_lower_bound, total_variation,
    Histogram, McmcOptions,
};

/// `(id, slug, tags)` of every criterion, in run order.
pub const CRITERIA: [(u32, &str, &[&str]); 10] = [
    (1, "kernel-closed-form", &["kernel"]),
    (2, "gaussian-droplet", &["equilibrium"]),
    (3, "equilibrium-density", &["equilibrium"]),
    (4, "elbau-felder-ellipse", &["equilibrium"]),
    (5, "potential-identity", &["equilibrium"]),
    (6, "monotonicity", &["kernel", "equilibrium"]),
    (7, "fekete", &["fekete"]),
    (8, "harmonic-moments", &["equilibrium"]),
    (9, "condensation", &["sampler"]),
    (10, "partition-function", &["kernel", "sampler"]),
];

/// Default tolerances, keyed `<slug>.<measurement>`.
pub const TOLERANCES: [(&str, f64); 25] = [
    ("kernel-closed-form.max_relative_error", 1e-6),
    ("gaussian-droplet.sym_diff_over_h_perimeter", 8.0),
    ("gaussian-droplet.boundary_constant_error", 0.02),
    ("equilibrium-density.max_density_error", 1e-6),
    ("equilibrium-density.mass_error", 1e-3),
    ("elbau-felder-ellipse.max_radial_residual_over_h", 2.0),
    ("elbau-felder-ellipse.relative_area_error", 0.03),
    ("potential-identity.identity_stddev", 1e-2),
    ("potential-identity.energy_error", 1e-2),
    ("monotonicity.growth_violations", 0.0),
    ("monotonicity.det_sum_violations", 0.0),
    ("monotonicity.nesting_violations", 0.0),
    ("fekete.two_point_radius_error", 1e-5),
    ("fekete.three_point_side_spread", 1e-5),
    ("fekete.max_increase", 1e-6),
    ("fekete.gradient_mismatch", 1e-4),
    ("harmonic-moments.relative_defect_one", 0.03),
    ("harmonic-moments.defect_re_inv_z", 3e-2),
    ("condensation.tv_to_sigma_hat", 0.05),
    ("condensation.max_kernel_density_deviation", 0.05),
    ("condensation.fraction_within_1_5", 0.99),
    ("condensation.overflow_mass", 1e-3),
    ("partition-function.z1_relative_error", 1e-4),
    ("partition-function.z2_relative_error", 1e-3),
    ("partition-function.lower_bound_violations", 0.0),
];

pub fn default_tolerance(key: &str) -> Option<f64> {
    TOLERANCES.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    pub name: String,
    pub value: f64,
    /// `None` for purely informational values.
    pub tolerance: Option<f64>,
    pub comparison: Comparison,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub slug: String,
    pub passed: bool,
    pub measurements: Vec<Measurement>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    /// Seconds since the Unix epoch when the run finished.
    pub timestamp: u64,
    pub version: String,
    pub wall_seconds: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub seed: u64,
    pub nodes: usize,
    pub tolerance_overrides: BTreeMap<String, f64>,
    pub criteria: Vec<CriterionReport>,
    /// Run-dependent values (time stamp, wall times) live only here.
    pub metadata: Metadata,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    /// Ids, slugs or tags; empty runs everything.
    pub only: Vec<String>,
    pub overrides: BTreeMap<String, f64>,
    pub seed: u64,
    /// Nodes per side of the obstacle grids.
    pub nodes: usize,
    pub exec: Exec,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { only: Vec::new(), overrides: BTreeMap::new(), seed: 2024, nodes: 512, exec: Exec::default() }
    }
}

impl VerifyOptions {
    pub fn validate(&self) -> Result<()> {
        for key in self.overrides.keys() {
            if default_tolerance(key).is_none() {
                return Err(arg(format!("unknown tolerance `{key}`")));
            }
        }
        for sel in &self.only {
            if !CRITERIA.iter().any(|c| matches(c, sel)) {
                return Err(arg(format!("`{sel}` names no criterion")));
            }
        }
        BoxGrid::new(4.0, self.nodes)?;
        Ok(())
    }

    fn selected(&self, c: &(u32, &str, &[&str])) -> bool {
        self.only.is_empty() || self.only.iter().any(|s| matches(c, s))
    }
}

fn matches(c: &(u32, &str, &[&str]), sel: &str) -> bool {
    sel == c.0.to_string() || sel == c.1 || c.2.contains(&sel)
}

struct Recorder<'a> {
    slug: &'static str,
    overrides: &'a BTreeMap<String, f64>,
    out: Vec<Measurement>,
}

impl Recorder<'_> {
    fn check(&mut self, name: &str, value: f64, comparison: Comparison) {
        let key = format!("{}.{name}", self.slug);
        let tol = self
            .overrides
            .get(&key)
            .copied()
            .or_else(|| default_tolerance(&key))
            .expect("every checked measurement has a default tolerance");
        let passed = match comparison {
            Comparison::AtMost => value <= tol,
            Comparison::AtLeast => value >= tol,
        };
        self.out.push(Measurement { name: name.into(), value, tolerance: Some(tol), comparison, passed });
    }

    fn at_most(&mut self, name: &str, value: f64) {
        self.check(name, value, Comparison::AtMost)
    }

    fn info(&mut self, name: &str, value: f64) {
        self.out.push(Measurement {
            name: name.into(),
            value,
            tolerance: None,
            comparison: Comparison::AtMost,
            passed: true,
        });
    }
}

struct Solved {
    sol: ObstacleSolution,
    droplet: Droplet,
    measure: DiscreteMeasure,
}

/// Obstacle solves shared between criteria.
struct Cache {
    nodes: usize,
    exec: Exec,
    solved: Vec<(String, Solved)>,
}

impl Cache {
    fn get(&mut self, pot: &Potential, tau: f64) -> Result<&Solved> {
        let key = format!("{}@{tau}", pot.descriptor());
        if let Some(i) = self.solved.iter().position(|(k, _)| *k == key) {
            return Ok(&self.solved[i].1);
        }
        // The droplet must sit well inside the box.
        let half_width = if tau > 2.0 { 6.0 } else { 4.0 };
        let grid = BoxGrid::new(half_width, self.nodes)?;
        let opts = ObstacleOptions { exec: self.exec, ..Default::default() };
        let sol = solve_obstacle_with(pot, tau, &grid, &opts)?;
        let droplet = extract_droplet(&sol, sol.default_delta())?;
        let measure = equilibrium_measure(pot, &droplet)?;
        self.solved.push((key, Solved { sol, droplet, measure }));
        Ok(&self.solved.last().unwrap().1)
    }
}

/// Runs the selected criteria in order, calling `progress` after each.
pub fn run_verify(
    opts: &VerifyOptions,
    mut progress: impl FnMut(&CriterionReport),
) -> Result<VerifyReport> {
    opts.validate()?;
    let mut cache = Cache { nodes: opts.nodes, exec: opts.exec, solved: Vec::new() };
    let mut criteria = Vec::new();
    let mut wall = BTreeMap::new();
    for c in CRITERIA.iter().filter(|c| opts.selected(c)) {
        let start = Instant::now();
        let mut rec = Recorder { slug: c.1, overrides: &opts.overrides, out: Vec::new() };
        let outcome = match c.0 {
            1 => kernel_closed_form(&mut rec, opts),
            2 => gaussian_droplet(&mut rec, &mut cache),
            3 => equilibrium_density(&mut rec, &mut cache),
            4 => elbau_felder_ellipse(&mut rec, &mut cache),
            5 => identity_and_energy(&mut rec, &mut cache, opts.exec),
            6 => monotonicity(&mut rec, &mut cache, opts),
            7 => fekete(&mut rec, opts),
            8 => harmonic_moments(&mut rec, &mut cache),
            9 => condensation(&mut rec, &mut cache, opts),
            _ => partition_function(&mut rec, &mut cache, opts.exec),
        };
        let error = outcome.err().map(|e| e.to_string());
        let passed = error.is_none() && rec.out.iter().all(|m| m.passed);
        let report = CriterionReport { id: c.0, slug: c.1.into(), passed, measurements: rec.out, error };
        wall.insert(c.1.to_string(), start.elapsed().as_secs_f64());
        progress(&report);
        criteria.push(report);
    }
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Ok(VerifyReport {
        passed: criteria.iter().all(|c| c.passed),
        seed: opts.seed,
        nodes: opts.nodes,
        tolerance_overrides: opts.overrides.clone(),
        criteria,
        metadata: Metadata { timestamp, version: env!("CARGO_PKG_VERSION").into(), wall_seconds: wall },
    })
}

/// One line per criterion: `PASS  2 gaussian-droplet  name=value (<= tol) ...`.
pub fn summary_line(r: &CriterionReport) -> String {
    let mut s = format!("{} {:>2} {:<22}", if r.passed { "PASS" } else { "FAIL" }, r.id, r.slug);
    for m in &r.measurements {
        match m.tolerance {
            Some(t) => {
                let op = if m.comparison == Comparison::AtMost { "<=" } else { ">=" };
                s += &format!(" {}={:.3e} ({op} {:.1e})", m.name, m.value, t);
            }
            None => s += &format!(" {}={:.4e}", m.name, m.value),
        }
    }
    if let Some(e) = &r.error {
        s += &format!(" error: {e}");
    }
    s
}

fn gaussian_basis(beta: f64, n: usize) -> Result<WeightedBasis> {
    let pot = Potential::gaussian();
    build_basis(&pot, beta, n, &moment_grid(&pot, beta, n, 256)?)
}

fn random_disk_point(rng: &mut ChaCha8Rng, radius: f64) -> ComplexPoint {
    let r = radius * rng.random::<f64>().sqrt();
    Complex64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU)
}

fn kernel_closed_form(rec: &mut Recorder, opts: &VerifyOptions) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = 0.0f64;
    for beta in [1.0, 4.0, 15.0, 40.0] {
        for n in 1..=20 {
            let basis = gaussian_basis(beta, n)?;
            for _ in 0..25 {
                let z = random_disk_point(&mut rng, 2.0);
                let w = random_disk_point(&mut rng, 2.0);
                let x = beta * z * w.conj();
                let mut term = Complex64::new(1.0, 0.0);
                let mut sum = term;
                for j in 1..n {
                    term = term * x / j as f64;
                    sum += term;
                }
                let exact = sum * beta / PI;
                worst = worst.max((basis.kernel(z, w) - exact).norm() / exact.norm());
            }
        }
    }
    rec.at_most("max_relative_error", worst);
    Ok(())
}

fn gaussian_droplet(rec: &mut Recorder, cache: &mut Cache) -> Result<()> {
    let pot = Potential::gaussian();
    let mut sym = 0.0f64;
    let mut c_err = 0.0f64;
    for tau in [0.5f64, 1.0, 2.0] {
        let s = cache.get(&pot, tau)?;
        let h = s.sol.grid.spacing();
        let r = tau.sqrt();
        let area = s.droplet.symmetric_difference_area(|z| z.norm() <= r, 4);
        sym = sym.max(area / (h * r * 2.0 * PI));
        c_err = c_err.max((s.sol.boundary_constant - tau * (tau.ln() - 1.0)).abs());
    }
    rec.at_most("sym_diff_over_h_perimeter", sym);
    rec.at_most("boundary_constant_error", c_err);
    Ok(())
}

fn equilibrium_density(rec: &mut Recorder, cache: &mut Cache) -> Result<()> {
    let pot = Potential::gaussian();
    let mut dens = 0.0f64;
    let mut mass = 0.0f64;
    let mut interior = usize::MAX;
    for tau in [0.5, 1.0, 2.0] {
        let s = cache.get(&pot, tau)?;
        let exact = 1.0 / (PI * tau);
        let mut count = 0;
        for (w, cov) in s.measure.weights.iter().zip(&s.droplet.coverage) {
            if *cov >= 1.0 {
                dens = dens.max((w - exact).abs());
                count += 1;
            }
        }
        interior = interior.min(count);
        mass = mass.max((s.measure.total - 1.0).abs());
    }
    rec.at_most("max_density_error", dens);
    rec.at_most("mass_error", mass);
    rec.info("min_interior_nodes", interior as f64);
    Ok(())
}

fn elbau_felder_ellipse(rec: &mut Recorder, cache: &mut Cache) -> Result<()> {
    let pot = Potential::elbau_felder(0.5)?;
    let s = cache.get(&pot, 1.0)?;
    let h = s.sol.grid.spacing();
    let pts = s.droplet.boundary_points();
    let e = fit_ellipse(&pts)?;
    let resid = pts.iter().map(|z| e.radial_residual(*z).abs()).fold(0.0, f64::max);
    rec.at_most("max_radial_residual_over_h", resid / h);
    rec.at_most("relative_area_error", (s.droplet.area() / PI - 1.0).abs());
    rec.info("semi_major", e.semi_axes.0);
    rec.info("semi_minor", e.semi_axes.1);
    Ok(())
}

fn energy_of(s: &Solved, pot: &Potential, tau: f64, exec: Exec) -> Result<(EnergyReport, f64)> {
    let field = log_potential_field(&s.measure, exec)?;
    let report = energy_with_field(&s.measure, pot, 1.0 / (2.0 * tau), &field)?;
    let (_, stddev) = potential_identity(&s.sol, &field)?;
    Ok((report, stddev))
}

fn identity_and_energy(rec: &mut Recorder, cache: &mut Cache, exec: Exec) -> Result<()> {
    let pot = Potential::gaussian();
    let mut stddev = 0.0;
    let mut err = 0.0f64;
    for tau in [1.0f64, 4.0] {
        let (e, sd) = energy_of(cache.get(&pot, tau)?, &pot, tau, exec)?;
        if tau == 1.0 {
            stddev = sd;
        }
        err = err.max((e.energy - (0.75 - 0.5 * tau.ln())).abs());
    }
    rec.at_most("identity_stddev", stddev);
    rec.at_most("energy_error", err);
    Ok(())
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Vec<Complex64> {
    let g: Vec<Complex64> = (0..n * n)
        .map(|i| {
            if i % n < rank {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    linalg::matmul(&g, &linalg::adjoint(&g, n), n)
}

fn monotonicity(rec: &mut Recorder, cache: &mut Cache, opts: &VerifyOptions) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6d6f6e6f);
    let beta = 2.0;
    let bases = (2..=10).map(|n| gaussian_basis(beta, n)).collect::<Result<Vec<_>>>()?;
    let mut growth = 0;
    for _ in 0..50 {
        let k = rng.random_range(1..=5);
        let zs: Vec<_> = (0..k).map(|_| random_disk_point(&mut rng, 1.5)).collect();
        for pair in bases.windows(2) {
            if !check_monotone_growth(&pair[0], &pair[1], &zs)? {
                growth += 1;
            }
        }
    }
    let mut det_sum = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let (ra, rb) = (rng.random_range(1..=n), rng.random_range(1..=n));
        let a = random_psd(&mut rng, n, ra);
        let b = random_psd(&mut rng, n, rb);
        if !det_sum_dominates(&a, &b, n)? {
            det_sum += 1;
        }
    }
    let pot = Potential::gaussian();
    let mut droplets = Vec::new();
    for tau in [0.5, 1.0, 2.0] {
        droplets.push(cache.get(&pot, tau)?.droplet.clone());
    }
    let nested = droplets_nested(&droplets)?;
    rec.at_most("growth_violations", growth as f64);
    rec.at_most("det_sum_violations", det_sum as f64);
    rec.at_most("nesting_violations", if nested { 0.0 } else { 1.0 });
    Ok(())
}

fn fekete(rec: &mut Recorder, opts: &VerifyOptions) -> Result<()> {
    let pot = Potential::gaussian();
    let theta = 0.5;
    let fo = FeketeOptions { seed: opts.seed, exec: opts.exec, ..Default::default() };
    let two = optimize_fekete(&pot, 2, theta, &fo)?;
    let radius_err =
        two.config.iter().map(|z| (z.norm() - 0.5f64.sqrt()).abs()).fold(0.0, f64::max);
    let three = optimize_fekete(&pot, 3, theta, &fo)?;
    let c = &three.config;
    let sides = [(c[0] - c[1]).norm(), (c[1] - c[2]).norm(), (c[2] - c[0]).norm()];
    let spread = sides.iter().fold(f64::MIN, |a, b| a.max(*b)) - sides.iter().fold(f64::MAX, |a, b| a.min(*b));
    let ns: Vec<usize> = (2..=8).collect();
    let report = m_decreasing_check(&pot, theta, &ns, &fo)?;
    let max_increase = report
        .estimates
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    // Central differences at each optimum, compared on the unit scale since
    // the gradient itself vanishes there.
    let mut mismatch = 0.0f64;
    for &n in &ns {
        let r = optimize_fekete(&pot, n, theta, &fo)?;
        let (err, scale) = gradient_check(&pot, &r.config, theta, 1e-6)?;
        mismatch = mismatch.max(err / scale.max(1.0));
    }
    rec.at_most("two_point_radius_error", radius_err);
    rec.at_most("three_point_side_spread", spread);
    rec.at_most("max_increase", max_increase);
    rec.at_most("gradient_mismatch", mismatch);
    for (n, m, _) in &report.estimates {
        rec.info(&format!("M_{n}"), *m);
    }
    Ok(())
}

fn harmonic_moments(rec: &mut Recorder, cache: &mut Cache) -> Result<()> {
    let pot = Potential::gaussian();
    let small = cache.get(&pot, 1.0)?.droplet.clone();
    let large = &cache.get(&pot, 2.0)?.droplet;
    let one = harmonic_moment_defect(&pot, &small, large, HarmonicTest::One)?;
    let inv = harmonic_moment_defect(&pot, &small, large, HarmonicTest::ReInvPow(1))?;
    rec.at_most("relative_defect_one", one / (4.0 * PI * (2.0 - 1.0)));
    rec.at_most("defect_re_inv_z", inv);
    Ok(())
}

struct ChainTally {
    hist: Histogram,
    inside: u64,
    particles: u64,
    kept: Vec<Vec<ComplexPoint>>,
    acceptance: f64,
}

fn condensation(rec: &mut Recorder, cache: &mut Cache, opts: &VerifyOptions) -> Result<()> {
    let pot = Potential::gaussian();
    let n = 64;
    let tau = 1.0;
    let beta = (n - 1) as f64 / tau;
    let coarse = BoxGrid::new(4.0, 16)?;
    let mc = McmcOptions::new(n, tau, 2_000_000);
    let tallies = opts.exec.map_range(4, |k| -> Result<ChainTally> {
        let mut t = ChainTally {
            hist: Histogram::new(coarse),
            inside: 0,
            particles: 0,
            kept: Vec::new(),
            acceptance: 0.0,
        };
        let diag = mcmc_run_observed(&pot, &mc, opts.seed + k as u64, |step, cfg| {
            t.hist.add(cfg);
            t.particles += cfg.len() as u64;
            t.inside += cfg.iter().filter(|z| z.norm() <= 1.5).count() as u64;
            if step % (mc.thin() * 150) == 0 {
                t.kept.push(cfg.to_vec());
            }
        })?;
        t.acceptance = diag.acceptance_rate;
        Ok(t)
    });
    let mut hist = Histogram::new(coarse);
    let mut inside = 0;
    let mut particles = 0;
    let mut kept = Vec::new();
    let mut acceptance = 0.0;
    for t in tallies {
        let t = t?;
        hist.merge(&t.hist)?;
        inside += t.inside;
        particles += t.particles;
        kept.extend(t.kept);
        acceptance += t.acceptance / 4.0;
    }
    let sigma = &cache.get(&pot, tau)?.measure;
    let (q, q_over) = bin_masses(sigma, &coarse);
    let tv = total_variation(&hist.cell_masses(), hist.overflow_mass(), &q, q_over)?;
    let basis = gaussian_basis(beta, n)?;
    let cross = kernel_crosscheck(&basis, &pot, beta, &hist, &kept, 200, opts.exec)?;
    rec.at_most("tv_to_sigma_hat", tv);
    rec.at_most("max_kernel_density_deviation", cross.max_density_deviation);
    rec.check("fraction_within_1_5", inside as f64 / particles as f64, Comparison::AtLeast);
    rec.at_most("overflow_mass", hist.overflow_mass());
    rec.info("acceptance", acceptance);
    rec.info("diagonality", cross.diagonality);
    Ok(())
}

fn partition_function(rec: &mut Recorder, cache: &mut Cache, exec: Exec) -> Result<()> {
    let z1 = compute_z(&gaussian_basis(1.0, 1)?);
    let z2 = compute_z(&gaussian_basis(1.0, 2)?);
    // Four-dimensional midpoint rule for |z1 - z2|^2 exp(-|z1|^2 - |z2|^2).
    let grid = BoxGrid::new(5.0, 32)?;
    let pts: Vec<(Complex64, f64)> = (0..grid.len())
        .map(|k| {
            let z = grid.point_at(k);
            (z, (-z.norm_sqr()).exp())
        })
        .collect();
    let brute = exec.sum(pts.len(), |i| {
        let (a, wa) = pts[i];
        pts.iter().map(|(b, wb)| (a - b).norm_sqr() * wa * wb).sum::<f64>()
    }) * grid.cell_area().powi(2);
    rec.at_most("z1_relative_error", (z1 - PI).abs() / PI);
    rec.at_most("z2_relative_error", (z2 - 2.0 * PI * PI).abs() / (2.0 * PI * PI));
    rec.info("z2_brute_force_relative_gap", (z2 - brute).abs() / brute);

    let pot = Potential::gaussian();
    let s = cache.get(&pot, 1.0)?;
    let (energy, _) = energy_of(s, &pot, 1.0, exec)?;
    let mut violations = 0;
    let mut min_margin = f64::INFINITY;
    for n in 2..=8 {
        let log_z = gaussian_basis((n - 1) as f64, n)?.log_partition_function();
        let margin = log_z - partition_lower_bound(n, energy.energy, &s.measure);
        min_margin = min_margin.min(margin);
        if margin < 0.0 {
            violations += 1;
        }
    }
    rec.at_most("lower_bound_violations", violations as f64);
    rec.info("lower_bound_min_margin", min_margin);
    Ok(())
}

/// Exit status for a finished report: 0 when everything passed, 4 otherwise.
pub fn exit_code(report: &VerifyReport) -> i32 {
    if report.passed {
        0
    } else {
        4
    }
}
