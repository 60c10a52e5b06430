use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use droplet_lab::config::{parse_config, RunConfig};
use droplet_lab::ensemble::{make_scaling, Scale};
use droplet_lab::equilibrium::{
    energy_with_field, equilibrium_measure, extract_droplet, log_potential_field,
    solve_obstacle_with, ObstacleOptions,
};
use droplet_lab::fekete::{optimize_fekete, FeketeOptions};
use droplet_lab::grid::{BoxGrid, ScalarField};
use droplet_lab::kernel::{build_basis_with, BasisOptions};
use droplet_lab::quadrature::moment_grid;
use droplet_lab::sampler::{
    bin_masses, kernel_crosscheck, mcmc_run_observed, total_variation, ChainDiagnostics, Histogram,
    McmcOptions,
};
use droplet_lab::verify::{exit_code, run_verify, summary_line, VerifyOptions};
use droplet_lab::{Error, Exec, Result};

const FORMATS_HELP: &str = "\
Output formats (floats in CSV carry 17 significant digits):
  kernel --eval       CSV  re,im,K_diag,density_n1
  fekete --out        CSV  idx,re,im
  sample              CSV  chain-<seed>.csv with step,particle,re,im
  *.f64               JSON header line, then little-endian f64 values, row-major
                      (imaginary part major, real part minor)

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 acceptance failure.";

#[derive(Parser)]
#[command(name = "droplet-lab", version, about = "Weighted kernels, droplets and Coulomb gas configurations")]
#[command(after_help = FORMATS_HELP)]
struct Cli {
    /// Run configuration (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for the data-parallel loops.
    #[arg(long, global = true, env = "DROPLET_LAB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Orthonormal basis of the weighted polynomial space and its kernel.
    #[command(after_help = "The basis cache is JSON {N, beta, potential, norms, coeffs}.\n--eval reads CSV `re,im` and writes CSV `re,im,K_diag,density_n1`.")]
    Kernel(KernelArgs),
    /// Obstacle problem, droplet and equilibrium measure.
    #[command(after_help = "Writes u.f64, indicator.f64, sigma.f64, summary.json and effective_config.json.")]
    Equilibrium(EquilibriumArgs),
    /// Weighted Fekete configuration by multi-start descent.
    #[command(after_help = "Writes CSV `idx,re,im` and fekete_summary.json next to it.")]
    Fekete(FeketeArgs),
    /// Metropolis chains for the ensemble.
    #[command(after_help = "Writes chain-<seed>.csv (`step,particle,re,im`), marginal.f64 and diagnostics.json.")]
    Sample(SampleArgs),
    /// Runs the acceptance suite.
    #[command(after_help = "Writes verify_report.json; exits with 4 when a criterion fails.")]
    Verify(VerifyArgs),
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value = "basis.json")]
    out: PathBuf,
    /// CSV of evaluation points `re,im`.
    #[arg(long)]
    eval: Option<PathBuf>,
    /// Destination of the evaluation CSV; standard output when absent.
    #[arg(long)]
    eval_out: Option<PathBuf>,
}

#[derive(Args)]
struct EquilibriumArgs {
    #[arg(long)]
    tau: Option<f64>,
    /// Nodes per side.
    #[arg(long)]
    grid: Option<usize>,
    /// Half-width of the square box.
    #[arg(long = "box")]
    half_width: Option<f64>,
    #[arg(long, default_value = "droplet")]
    out: PathBuf,
}

#[derive(Args)]
struct FeketeArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "fekete.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    /// Skip the per-chain CSV files.
    #[arg(long)]
    no_chain_files: bool,
    #[arg(long, default_value = "samples")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Criterion ids, slugs or tags (comma separated).
    #[arg(long, value_delimiter = ',')]
    only: Vec<String>,
    /// Tolerance override `<slug>.<measurement>=<value>` (repeatable).
    #[arg(long = "tol")]
    tolerances: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Nodes per side of the obstacle grids.
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn metadata() -> serde_json::Value {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({ "timestamp": timestamp, "version": env!("CARGO_PKG_VERSION") })
}

fn setup_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(config_error("threads", "must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_error("threads", e.to_string()))?;
    Ok(())
}

fn read_points(path: &Path) -> Result<Vec<Complex64>> {
    let file = File::open(path)
        .map_err(|e| config_error("eval", format!("cannot read {}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("re")) {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<f64> {
            s.and_then(|v| v.parse().ok())
                .ok_or_else(|| config_error("eval", format!("line {}: expected `re,im`", i + 1)))
        };
        let re = parse(cols.next())?;
        let im = parse(cols.next())?;
        pts.push(droplet_lab::potential::point(re, im)?);
    }
    Ok(pts)
}

fn run_kernel(cfg: &mut RunConfig, a: &KernelArgs, exec: Exec) -> Result<i32> {
    if let Some(n) = a.n {
        cfg.kernel.n = n;
    }
    if a.beta.is_some() {
        cfg.kernel.beta = a.beta;
    }
    if let Some(t) = a.tau {
        cfg.kernel.tau = t;
        cfg.kernel.beta = None;
    }
    cfg.validate()?;
    cfg.echo(parent_dir(&a.out))?;
    let pot = cfg.potential()?;
    let n = cfg.kernel.n;
    let beta = match cfg.kernel.beta {
        Some(b) => b,
        None => make_scaling(n, Scale::Tau(cfg.kernel.tau))?.beta,
    };
    let grid = moment_grid(&pot, beta, n, cfg.kernel.quadrature_nodes)?;
    let basis = build_basis_with(
        &pot,
        beta,
        n,
        &grid,
        BasisOptions { exec, radial_fast_path: cfg.kernel.radial_fast_path },
    )?;
    basis.to_cache().write(&a.out)?;
    if let Some(points) = &a.eval {
        let pts = read_points(points)?;
        let diag = basis.kernel_diagonal_batch(&pts, exec);
        let mut text = String::from("re,im,K_diag,density_n1\n");
        for (z, k) in pts.iter().zip(diag) {
            let dens = k * (-beta * pot.phi(*z)?).exp() / n as f64;
            text += &format!("{},{},{},{}\n", fmt17(z.re), fmt17(z.im), fmt17(k), fmt17(dens));
        }
        match &a.eval_out {
            Some(p) => std::fs::write(p, text)?,
            None => print!("{text}"),
        }
    }
    Ok(0)
}

fn run_equilibrium(cfg: &mut RunConfig, a: &EquilibriumArgs, exec: Exec) -> Result<i32> {
    if let Some(t) = a.tau {
        cfg.equilibrium.tau = t;
    }
    if let Some(m) = a.grid {
        cfg.grid.nodes = m;
    }
    if let Some(l) = a.half_width {
        cfg.grid.half_width = l;
    }
    cfg.output = Some(a.out.clone());
    cfg.validate()?;
    cfg.echo(&a.out)?;
    let pot = cfg.potential()?;
    let grid = cfg.grid()?;
    let e = &cfg.equilibrium;
    let opts = ObstacleOptions {
        omega: e.omega,
        update_tol: e.update_tol,
        complementarity_tol: e.complementarity_tol,
        mass_tol: e.mass_tol,
        max_sweeps: e.max_sweeps,
        exec,
        ..Default::default()
    };
    let sol = solve_obstacle_with(&pot, e.tau, &grid, &opts)?;
    let delta = e.delta.unwrap_or(sol.default_delta());
    let droplet = extract_droplet(&sol, delta)?;
    let measure = equilibrium_measure(&pot, &droplet)?;
    let field = log_potential_field(&measure, exec)?;
    let energy = energy_with_field(&measure, &pot, 1.0 / (2.0 * e.tau), &field)?;

    sol.u.write_f64(a.out.join("u.f64"))?;
    let ind = droplet.indicator.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
    ScalarField::new(grid, ind)?.write_f64(a.out.join("indicator.f64"))?;
    measure.to_field()?.write_f64(a.out.join("sigma.f64"))?;
    let summary = json!({
        "tau": e.tau,
        "c": sol.boundary_constant,
        "mass": sol.mass,
        "indicator_mass": droplet.mass,
        "sigma_mass": measure.total,
        "iterations": sol.iterations,
        "total_sweeps": sol.total_sweeps,
        "residual": sol.residual,
        "omega": sol.omega,
        "delta": delta,
        "area": droplet.area(),
        "kappa": energy.energy,
        "C_tau": energy.c_tau(e.tau),
        "metadata": metadata(),
    });
    write_json(&a.out.join("summary.json"), &summary)?;
    Ok(0)
}

fn run_fekete(cfg: &mut RunConfig, a: &FeketeArgs, exec: Exec) -> Result<i32> {
    let f = &mut cfg.fekete;
    if let Some(n) = a.n {
        f.n = n;
    }
    if let Some(t) = a.tau {
        f.tau = t;
    }
    if let Some(r) = a.restarts {
        f.restarts = r;
    }
    if let Some(s) = a.seed {
        f.seed = s;
    }
    cfg.output = Some(a.out.clone());
    cfg.validate()?;
    let dir = parent_dir(&a.out);
    cfg.echo(&dir)?;
    let pot = cfg.potential()?;
    let f = &cfg.fekete;
    let theta = 1.0 / (2.0 * f.tau);
    let opts = FeketeOptions {
        restarts: f.restarts,
        seed: f.seed,
        max_iterations: f.max_iterations,
        grad_tol: f.grad_tol,
        exec,
    };
    let r = optimize_fekete(&pot, f.n, theta, &opts)?;
    let mut text = String::from("idx,re,im\n");
    for (i, z) in r.config.iter().enumerate() {
        text += &format!("{i},{},{}\n", fmt17(z.re), fmt17(z.im));
    }
    std::fs::write(&a.out, text)?;
    let summary = json!({
        "N": f.n,
        "tau": f.tau,
        "theta": theta,
        "seed": f.seed,
        "restarts": r.restarts_used,
        "converged_restarts": r.converged_restarts,
        "best_restart": r.best_restart,
        "iterations": r.iterations,
        "energy_sharp": r.energy_sharp,
        "M_estimate": r.m_estimate,
        "gradient_norm": r.gradient_norm,
        "metadata": metadata(),
    });
    write_json(&dir.join("fekete_summary.json"), &summary)?;
    Ok(0)
}

struct ChainResult {
    hist: Histogram,
    kept: Vec<Vec<Complex64>>,
    diag: ChainDiagnostics,
}

fn run_sample(cfg: &mut RunConfig, a: &SampleArgs, exec: Exec) -> Result<i32> {
    let s = &mut cfg.sample;
    if let Some(n) = a.n {
        s.n = n;
    }
    if let Some(t) = a.tau {
        s.tau = t;
    }
    if let Some(v) = a.steps {
        s.steps = v;
    }
    if a.burn_in.is_some() {
        s.burn_in = a.burn_in;
    }
    if let Some(v) = a.seed {
        s.seed = v;
    }
    if let Some(v) = a.chains {
        s.chains = v;
    }
    if a.no_chain_files {
        s.write_chains = false;
    }
    cfg.output = Some(a.out.clone());
    cfg.validate()?;
    cfg.echo(&a.out)?;
    let pot = cfg.potential()?;
    let s = &cfg.sample;
    let coarse = BoxGrid::new(s.hist_box, s.bins)?;
    let mc = McmcOptions {
        n: s.n,
        tau: s.tau,
        steps: s.steps,
        burn_in: s.burn_in,
        thin: s.thin,
        target_acceptance: s.target_acceptance,
    };
    let samples_per_chain = (mc.steps - mc.burn_in()) / mc.thin();
    let keep_every = (samples_per_chain / 200).max(1);
    let results = exec.map_range(s.chains, |k| -> Result<ChainResult> {
        let seed = s.seed + k as u64;
        let mut writer = if s.write_chains {
            let mut w = BufWriter::new(File::create(a.out.join(format!("chain-{seed}.csv")))?);
            writeln!(w, "step,particle,re,im")?;
            Some(w)
        } else {
            None
        };
        let mut hist = Histogram::new(coarse);
        let mut kept = Vec::new();
        let mut count = 0u64;
        let mut io_error = None;
        let diag = mcmc_run_observed(&pot, &mc, seed, |step, cfg| {
            hist.add(cfg);
            if count % keep_every == 0 {
                kept.push(cfg.to_vec());
            }
            count += 1;
            if let (Some(w), None) = (writer.as_mut(), io_error.as_ref()) {
                for (j, z) in cfg.iter().enumerate() {
                    if let Err(e) = writeln!(w, "{step},{j},{},{}", fmt17(z.re), fmt17(z.im)) {
                        io_error = Some(e);
                        break;
                    }
                }
            }
        })?;
        if let Some(e) = io_error {
            return Err(e.into());
        }
        if let Some(mut w) = writer {
            w.flush()?;
        }
        Ok(ChainResult { hist, kept, diag })
    });
    let mut hist = Histogram::new(coarse);
    let mut kept = Vec::new();
    let mut chains = Vec::new();
    for r in results {
        let r = r?;
        hist.merge(&r.hist)?;
        kept.extend(r.kept);
        chains.push(r.diag);
    }
    hist.to_measure()?.to_field()?.write_f64(a.out.join("marginal.f64"))?;

    let grid = cfg.grid()?;
    let opts = ObstacleOptions { exec, ..Default::default() };
    let sol = solve_obstacle_with(&pot, s.tau, &grid, &opts)?;
    let sigma = equilibrium_measure(&pot, &extract_droplet(&sol, sol.default_delta())?)?;
    let (q, q_over) = bin_masses(&sigma, &coarse);
    let tv = total_variation(&hist.cell_masses(), hist.overflow_mass(), &q, q_over)?;

    let beta = make_scaling(s.n, Scale::Tau(s.tau))?.beta;
    let cross = moment_grid(&pot, beta, s.n, cfg.kernel.quadrature_nodes)
        .and_then(|g| build_basis_with(&pot, beta, s.n, &g, BasisOptions { exec, radial_fast_path: true }))
        .and_then(|b| kernel_crosscheck(&b, &pot, beta, &hist, &kept, 200, exec));
    let (diagonality, kernel_dev, kernel_note) = match cross {
        Ok(c) => (Some(c.diagonality), Some(c.max_density_deviation), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    let acceptance = chains.iter().map(|c| c.acceptance_rate).sum::<f64>() / chains.len() as f64;
    let warnings: Vec<&String> = chains.iter().filter_map(|c| c.mixing_warning.as_ref()).collect();
    let diagnostics = json!({
        "N": s.n,
        "tau": s.tau,
        "beta": beta,
        "steps": s.steps,
        "burn_in": mc.burn_in(),
        "thin": mc.thin(),
        "seeds": chains.iter().map(|c| c.seed).collect::<Vec<_>>(),
        "acceptance": acceptance,
        "overflow_mass": hist.overflow_mass(),
        "tv_to_sigma_hat": tv,
        "diagonality_stat": diagonality,
        "kernel_max_density_deviation": kernel_dev,
        "kernel_note": kernel_note,
        "mixing_warnings": warnings,
        "chains": chains,
        "metadata": metadata(),
    });
    write_json(&a.out.join("diagnostics.json"), &diagnostics)?;
    Ok(0)
}

fn run_verify_cmd(cfg: &mut RunConfig, a: &VerifyArgs, exec: Exec) -> Result<i32> {
    let v = &mut cfg.verify;
    if !a.only.is_empty() {
        v.only = a.only.clone();
    }
    for t in &a.tolerances {
        let (k, val) = t
            .split_once('=')
            .ok_or_else(|| config_error("tol", format!("expected key=value, got `{t}`")))?;
        let val: f64 =
            val.parse().map_err(|_| config_error("tol", format!("`{val}` is not a number")))?;
        v.tolerances.insert(k.to_string(), val);
    }
    if let Some(s) = a.seed {
        v.seed = s;
    }
    if let Some(n) = a.nodes {
        v.nodes = n;
    }
    cfg.output = Some(a.out.clone());
    cfg.validate()?;
    cfg.echo(&a.out)?;
    let opts = VerifyOptions {
        only: cfg.verify.only.clone(),
        overrides: cfg.verify.tolerances.clone().into_iter().collect::<BTreeMap<_, _>>(),
        seed: cfg.verify.seed,
        nodes: cfg.verify.nodes,
        exec,
    };
    opts.validate().map_err(|e| config_error("verify", e.to_string()))?;
    let report = run_verify(&opts, |c| println!("{}", summary_line(c)))?;
    write_json(&a.out.join("verify_report.json"), &report)?;
    let passed = report.criteria.iter().filter(|c| c.passed).count();
    println!("{passed}/{} criteria passed", report.criteria.len());
    Ok(exit_code(&report))
}

fn run(cli: Cli) -> Result<i32> {
    setup_threads(cli.threads)?;
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::default(),
    };
    let exec = Exec::default();
    match &cli.command {
        Command::Kernel(a) => run_kernel(&mut cfg, a, exec),
        Command::Equilibrium(a) => run_equilibrium(&mut cfg, a, exec),
        Command::Fekete(a) => run_fekete(&mut cfg, a, exec),
        Command::Sample(a) => run_sample(&mut cfg, a, exec),
        Command::Verify(a) => run_verify_cmd(&mut cfg, a, exec),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
