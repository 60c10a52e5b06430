//! Run configuration: one JSON document, unknown keys rejected, every
//! value defaulted.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::BoxGrid;
use crate::potential::{Potential, PotentialSpec};

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "box")]
    pub half_width: f64,
    pub nodes: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 4.0, nodes: 512 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelConfig {
    #[serde(rename = "N")]
    pub n: usize,
    /// Takes precedence over `tau` when set.
    pub beta: Option<f64>,
    pub tau: f64,
    /// Nodes per side of the moment quadrature grid.
    pub quadrature_nodes: usize,
    pub radial_fast_path: bool,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { n: 16, beta: None, tau: 1.0, quadrature_nodes: 512, radial_fast_path: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EquilibriumConfig {
    pub tau: f64,
    /// Over-relaxation factor; `2 / (1 + sin(pi / M))` when absent.
    pub omega: Option<f64>,
    pub update_tol: f64,
    pub complementarity_tol: f64,
    pub mass_tol: f64,
    pub max_sweeps: Option<usize>,
    /// Coincidence threshold; ten times the solver tolerance when absent.
    pub delta: Option<f64>,
}

impl Default for EquilibriumConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            omega: None,
            update_tol: 1e-9,
            complementarity_tol: 1e-6,
            mass_tol: 1e-4,
            max_sweeps: None,
            delta: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeketeConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    pub restarts: usize,
    pub seed: u64,
    pub grad_tol: f64,
    pub max_iterations: usize,
}

impl Default for FeketeConfig {
    fn default() -> Self {
        Self { n: 24, tau: 1.0, restarts: 8, seed: 7, grad_tol: 1e-8, max_iterations: 200_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleConfig {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    pub steps: u64,
    /// `200 N` when absent.
    pub burn_in: Option<u64>,
    /// `N` when absent.
    pub thin: Option<u64>,
    pub seed: u64,
    pub chains: usize,
    pub target_acceptance: f64,
    /// Histogram cells per side over `[-hist_box, hist_box]^2`.
    pub bins: usize,
    pub hist_box: f64,
    /// Write `chain-<seed>.csv` files.
    pub write_chains: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            n: 64,
            tau: 1.0,
            steps: 2_000_000,
            burn_in: None,
            thin: None,
            seed: 11,
            chains: 4,
            target_acceptance: 0.3,
            bins: 16,
            hist_box: 4.0,
            write_chains: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    pub only: Vec<String>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub nodes: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { only: Vec::new(), tolerances: BTreeMap::new(), seed: 2024, nodes: 512 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "PotentialSpec::gaussian")]
    pub potential: PotentialSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub kernel: KernelConfig,
    #[serde(default)]
    pub equilibrium: EquilibriumConfig,
    #[serde(default)]
    pub fekete: FeketeConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Directory against which relative paths in `potential` resolve.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: PotentialSpec::gaussian(),
            grid: GridConfig::default(),
            kernel: KernelConfig::default(),
            equilibrium: EquilibriumConfig::default(),
            fekete: FeketeConfig::default(),
            sample: SampleConfig::default(),
            verify: VerifyConfig::default(),
            output: None,
            base_dir: PathBuf::from("."),
        }
    }
}

/// Parses and validates a configuration document.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(".", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse_config_str(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.potential()?;
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(config_error(path, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Checks every bound; the messages name the offending JSON path.
    pub fn validate(&self) -> Result<()> {
        if self.potential.family != "tabulated" {
            Potential::from_spec(&self.potential, &self.base_dir)
                .map_err(|e| config_error("potential", e.to_string()))?;
        }
        BoxGrid::new(self.grid.half_width, self.grid.nodes)
            .map_err(|e| config_error("grid", e.to_string()))?;

        let k = &self.kernel;
        if k.n == 0 {
            return Err(config_error("kernel.N", "must be at least 1"));
        }
        if let Some(b) = k.beta {
            positive("kernel.beta", b)?;
        } else if k.n < 2 {
            return Err(config_error("kernel.beta", "N = 1 needs an explicit beta"));
        }
        positive("kernel.tau", k.tau)?;
        BoxGrid::new(1.0, k.quadrature_nodes)
            .map_err(|e| config_error("kernel.quadrature_nodes", e.to_string()))?;

        let e = &self.equilibrium;
        positive("equilibrium.tau", e.tau)?;
        if let Some(w) = e.omega {
            if !(w > 0.0 && w < 2.0) {
                return Err(config_error("equilibrium.omega", format!("must lie in (0, 2), got {w}")));
            }
        }
        positive("equilibrium.update_tol", e.update_tol)?;
        positive("equilibrium.complementarity_tol", e.complementarity_tol)?;
        positive("equilibrium.mass_tol", e.mass_tol)?;
        if let Some(d) = e.delta {
            if !(d.is_finite() && d >= 0.0) {
                return Err(config_error("equilibrium.delta", format!("must be non-negative, got {d}")));
            }
        }

        let f = &self.fekete;
        if f.n < 2 {
            return Err(config_error("fekete.N", "must be at least 2"));
        }
        positive("fekete.tau", f.tau)?;
        if f.restarts == 0 {
            return Err(config_error("fekete.restarts", "must be at least 1"));
        }
        positive("fekete.grad_tol", f.grad_tol)?;

        let s = &self.sample;
        if s.n < 2 {
            return Err(config_error("sample.N", "must be at least 2"));
        }
        positive("sample.tau", s.tau)?;
        let burn_in = s.burn_in.unwrap_or(200 * s.n as u64);
        if s.steps <= burn_in {
            return Err(config_error("sample.steps", format!("must exceed the burn-in ({burn_in})")));
        }
        if s.thin == Some(0) {
            return Err(config_error("sample.thin", "must be positive"));
        }
        if s.chains == 0 {
            return Err(config_error("sample.chains", "must be at least 1"));
        }
        if !(s.target_acceptance > 0.0 && s.target_acceptance < 1.0) {
            return Err(config_error("sample.target_acceptance", "must lie in (0, 1)"));
        }
        BoxGrid::new(s.hist_box, s.bins).map_err(|e| config_error("sample.bins", e.to_string()))?;

        BoxGrid::new(4.0, self.verify.nodes)
            .map_err(|e| config_error("verify.nodes", e.to_string()))?;
        for key in self.verify.tolerances.keys() {
            if crate::verify::default_tolerance(key).is_none() {
                return Err(config_error(&format!("verify.tolerances.{key}"), "unknown tolerance"));
            }
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential> {
        Potential::from_spec(&self.potential, &self.base_dir)
            .map_err(|e| config_error("potential", e.to_string()))
    }

    pub fn grid(&self) -> Result<BoxGrid> {
        BoxGrid::new(self.grid.half_width, self.grid.nodes)
    }

    /// Writes the effective configuration as `effective_config.json`.
    pub fn echo(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("effective_config.json"), text + "\n")?;
        Ok(())
    }
}
