//! The confining external field `Phi`, its Laplacian, the obstacle `V = -Phi`
//! and the pair weight `E(z, w; theta) = |z - w| exp(-theta (Phi(z) + Phi(w)))`.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::grid::ScalarField;

pub type ComplexPoint = Complex64;

/// Largest radius probed when certifying the growth condition.
pub const DEFAULT_RADIUS_CAP: f64 = 1e6;

/// Builds a point, rejecting NaN and infinite coordinates.
pub fn point(re: f64, im: f64) -> Result<ComplexPoint> {
    if re.is_finite() && im.is_finite() {
        Ok(Complex64::new(re, im))
    } else {
        Err(arg(format!("non-finite point ({re}, {im})")))
    }
}

/// Sampled potential together with user-supplied Laplacian values.
#[derive(Debug, PartialEq)]
pub struct Tabulated {
    pub values: ScalarField,
    pub laplacian: ScalarField,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    /// `|z|^2`
    Gaussian,
    /// `|z|^2 + a Re(z^2)` with `|a| < 1`.
    ElbauFelder { a: f64 },
    /// `|z|^(2p)`
    RadialMonomial { p: u32 },
    Tabulated(Arc<Tabulated>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    family: Family,
    growth_margin: f64,
}

/// Result of [`Potential::pair_energy`]; coincident points give zero weight
/// and must be treated as infinite log-energy by callers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEnergy {
    pub value: f64,
    pub coincident: bool,
}

/// JSON descriptor of a potential as it appears in run configurations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub laplacian_path: Option<String>,
}

impl PotentialSpec {
    pub fn gaussian() -> Self {
        Self { family: "gaussian".into(), a: None, p: None, path: None, laplacian_path: None }
    }
}

impl Potential {
    pub fn gaussian() -> Self {
        Self { family: Family::Gaussian, growth_margin: 1.0 }
    }

    pub fn elbau_felder(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > -1.0 && a < 1.0) {
            return Err(arg(format!("elbau_felder parameter must satisfy -1 < a < 1, got {a}")));
        }
        Ok(Self { family: Family::ElbauFelder { a }, growth_margin: 1.0 })
    }

    pub fn radial_monomial(p: u32) -> Result<Self> {
        if p == 0 {
            return Err(arg("radial_monomial exponent must be at least 1"));
        }
        Ok(Self { family: Family::RadialMonomial { p }, growth_margin: 1.0 })
    }

    pub fn tabulated(values: ScalarField, laplacian: ScalarField) -> Result<Self> {
        if values.grid() != laplacian.grid() {
            return Err(arg("tabulated values and Laplacian must share a grid"));
        }
        // ScalarField already guarantees finite entries.
        Ok(Self {
            family: Family::Tabulated(Arc::new(Tabulated { values, laplacian })),
            growth_margin: 1.0,
        })
    }

    /// Builds a potential from its JSON descriptor; relative paths are
    /// resolved against `base`.
    pub fn from_spec(spec: &PotentialSpec, base: &Path) -> Result<Self> {
        let unexpected = |what: &str| arg(format!("family `{}` does not take `{what}`", spec.family));
        match spec.family.as_str() {
            "gaussian" => {
                if spec.a.is_some() || spec.p.is_some() || spec.path.is_some() {
                    return Err(unexpected("parameters"));
                }
                Ok(Self::gaussian())
            }
            "elbau_felder" => {
                if spec.p.is_some() || spec.path.is_some() {
                    return Err(unexpected("p/path"));
                }
                Self::elbau_felder(spec.a.ok_or_else(|| arg("elbau_felder needs `a`"))?)
            }
            "radial_monomial" => {
                if spec.a.is_some() || spec.path.is_some() {
                    return Err(unexpected("a/path"));
                }
                Self::radial_monomial(spec.p.ok_or_else(|| arg("radial_monomial needs `p`"))?)
            }
            "tabulated" => {
                let path = spec.path.as_ref().ok_or_else(|| arg("tabulated needs `path`"))?;
                let lap = spec
                    .laplacian_path
                    .as_ref()
                    .ok_or_else(|| arg("tabulated needs `laplacian_path`"))?;
                let values = ScalarField::read_f64(base.join(path))?;
                let laplacian = ScalarField::read_f64(base.join(lap))?;
                Self::tabulated(values, laplacian)
            }
            other => Err(arg(format!("unknown potential family `{other}`"))),
        }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn growth_margin(&self) -> f64 {
        self.growth_margin
    }

    pub fn with_growth_margin(mut self, margin: f64) -> Self {
        self.growth_margin = margin;
        self
    }

    /// Short descriptor used in cache files and summaries.
    pub fn descriptor(&self) -> serde_json::Value {
        match &self.family {
            Family::Gaussian => serde_json::json!({"family": "gaussian"}),
            Family::ElbauFelder { a } => serde_json::json!({"family": "elbau_felder", "a": a}),
            Family::RadialMonomial { p } => serde_json::json!({"family": "radial_monomial", "p": p}),
            Family::Tabulated(t) => serde_json::json!({
                "family": "tabulated",
                "half_width": t.values.grid().half_width(),
                "nodes_per_side": t.values.grid().nodes_per_side(),
            }),
        }
    }

    /// Whether `Phi` depends on `|z|` only.
    pub fn is_radial(&self) -> bool {
        match self.family {
            Family::Gaussian | Family::RadialMonomial { .. } => true,
            Family::ElbauFelder { a } => a == 0.0,
            Family::Tabulated(_) => false,
        }
    }

    /// `Phi(r)` for radial potentials.
    pub fn radial_profile(&self, r: f64) -> Option<f64> {
        if !self.is_radial() {
            return None;
        }
        Some(match self.family {
            Family::RadialMonomial { p } => (r * r).powi(p as i32),
            _ => r * r,
        })
    }

    pub fn phi(&self, z: ComplexPoint) -> Result<f64> {
        Ok(match &self.family {
            Family::Gaussian => z.norm_sqr(),
            Family::ElbauFelder { a } => z.norm_sqr() + a * (z.re * z.re - z.im * z.im),
            Family::RadialMonomial { p } => z.norm_sqr().powi(*p as i32),
            Family::Tabulated(t) => t
                .values
                .interpolate(z)
                .ok_or(Error::Domain { re: z.re, im: z.im })?,
        })
    }

    pub fn laplacian(&self, z: ComplexPoint) -> Result<f64> {
        Ok(match &self.family {
            Family::Gaussian | Family::ElbauFelder { .. } => 4.0,
            Family::RadialMonomial { p } => {
                let p = *p as i32;
                4.0 * (p * p) as f64 * z.norm_sqr().powi(p - 1)
            }
            Family::Tabulated(t) => t
                .laplacian
                .interpolate(z)
                .ok_or(Error::Domain { re: z.re, im: z.im })?,
        })
    }

    /// `(dPhi/dx, dPhi/dy)`; tabulated potentials use central differences.
    pub fn gradient(&self, z: ComplexPoint) -> Result<(f64, f64)> {
        Ok(match &self.family {
            Family::Gaussian => (2.0 * z.re, 2.0 * z.im),
            Family::ElbauFelder { a } => (2.0 * (1.0 + a) * z.re, 2.0 * (1.0 - a) * z.im),
            Family::RadialMonomial { p } => {
                let s = 2.0 * *p as f64 * z.norm_sqr().powi(*p as i32 - 1);
                (s * z.re, s * z.im)
            }
            Family::Tabulated(t) => {
                let d = 1e-4 * t.values.grid().spacing();
                let dx = Complex64::new(d, 0.0);
                let dy = Complex64::new(0.0, d);
                (
                    (self.phi(z + dx)? - self.phi(z - dx)?) / (2.0 * d),
                    (self.phi(z + dy)? - self.phi(z - dy)?) / (2.0 * d),
                )
            }
        })
    }

    /// `E(z, w; theta) = |z - w| exp(-theta (Phi(z) + Phi(w)))`.
    pub fn pair_energy(&self, z: ComplexPoint, w: ComplexPoint, theta: f64) -> Result<PairEnergy> {
        let d = (z - w).norm();
        if d == 0.0 {
            return Ok(PairEnergy { value: 0.0, coincident: true });
        }
        let value = d * (-theta * (self.phi(z)? + self.phi(w)?)).exp();
        Ok(PairEnergy { value, coincident: false })
    }

    /// Radius `R` beyond which `theta Phi(z) >= (1 + slack) log(1 + |z|)` on
    /// every sampled ring, found by doubling and then bisection.
    pub fn truncation_radius(&self, theta: f64, slack: f64) -> Result<f64> {
        self.truncation_radius_capped(theta, slack, DEFAULT_RADIUS_CAP)
    }

    pub fn truncation_radius_capped(&self, theta: f64, slack: f64, cap: f64) -> Result<f64> {
        if !(theta > 0.0 && slack > 0.0) {
            return Err(arg("truncation radius needs theta > 0 and slack > 0"));
        }
        let cap = match &self.family {
            Family::Tabulated(t) => {
                let g = t.values.grid();
                cap.min(g.half_width() - 0.5 * g.spacing())
            }
            _ => cap,
        };
        let violation = || Error::GrowthCondition { theta, slack, cap };
        let ring_ok = |r: f64| -> Result<bool> {
            const ANGLES: usize = 64;
            for k in 0..ANGLES {
                let t = std::f64::consts::TAU * k as f64 / ANGLES as f64;
                let z = Complex64::from_polar(r, t);
                if theta * self.phi(z)? - (1.0 + slack) * (1.0 + r).ln() < 0.0 {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        // Every ring on a geometric ladder from r up to the cap must pass.
        let holds_beyond = |r: f64| -> Result<bool> {
            let mut s = r;
            while s < cap {
                if !ring_ok(s)? {
                    return Ok(false);
                }
                s *= 1.05;
            }
            ring_ok(cap)
        };

        let mut hi = 0.25_f64;
        loop {
            if hi > cap {
                return Err(violation());
            }
            if holds_beyond(hi)? {
                break;
            }
            hi *= 2.0;
        }
        let mut lo = hi / 2.0;
        if hi == 0.25 {
            lo = 0.0;
        }
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if holds_beyond(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-6 * hi {
                break;
            }
        }
        Ok(hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoxGrid;

    fn c(re: f64, im: f64) -> ComplexPoint {
        Complex64::new(re, im)
    }

    /// Five-point finite-difference Laplacian of `phi`, used as an
    /// independent oracle.
    fn fd_laplacian(p: &Potential, z: ComplexPoint, h: f64) -> f64 {
        let f = |w| p.phi(w).unwrap();
        (f(z + c(h, 0.0)) + f(z - c(h, 0.0)) + f(z + c(0.0, h)) + f(z - c(0.0, h)) - 4.0 * f(z))
            / (h * h)
    }

    #[test]
    fn phi_examples() {
        let g = Potential::gaussian();
        assert_eq!(g.phi(c(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(g.phi(c(1.0, 1.0)).unwrap(), 2.0);
        let ef = Potential::elbau_felder(0.5).unwrap();
        assert!((ef.phi(c(1.0, 0.0)).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn laplacian_examples_match_finite_differences() {
        let g = Potential::gaussian();
        let ef = Potential::elbau_felder(0.5).unwrap();
        let rm = Potential::radial_monomial(2).unwrap();
        for z in [c(0.3, -0.7), c(1.5, 0.2), c(-2.0, 1.0)] {
            assert_eq!(g.laplacian(z).unwrap(), 4.0);
            assert_eq!(ef.laplacian(z).unwrap(), 4.0);
            assert!((fd_laplacian(&g, z, 1e-3) - 4.0).abs() < 1e-5);
            assert!((fd_laplacian(&ef, z, 1e-3) - 4.0).abs() < 1e-5);
        }
        let z = Complex64::from_polar(1.0, 0.7);
        assert!((rm.laplacian(z).unwrap() - 16.0).abs() < 1e-12);
        assert!((fd_laplacian(&rm, z, 1e-3) - 16.0).abs() < 1e-4);
    }

    #[test]
    fn laplacian_fd_converges_at_second_order() {
        // radial_monomial(3) has non-vanishing fourth derivatives, so the
        // five-point error is visible and must shrink ~4x per halving.
        let pots = [
            Potential::radial_monomial(3).unwrap(),
            Potential::radial_monomial(2).unwrap(),
        ];
        let z = c(0.8, -0.6);
        for p in &pots {
            let exact = p.laplacian(z).unwrap();
            let e1 = (fd_laplacian(p, z, 0.02) - exact).abs();
            let e2 = (fd_laplacian(p, z, 0.01) - exact).abs();
            let ratio = e1 / e2;
            assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let pots = [
            Potential::gaussian(),
            Potential::elbau_felder(-0.3).unwrap(),
            Potential::radial_monomial(3).unwrap(),
        ];
        let z = c(0.41, -1.13);
        for p in &pots {
            let (gx, gy) = p.gradient(z).unwrap();
            let d = 1e-6;
            let fx = (p.phi(z + c(d, 0.0)).unwrap() - p.phi(z - c(d, 0.0)).unwrap()) / (2.0 * d);
            let fy = (p.phi(z + c(0.0, d)).unwrap() - p.phi(z - c(0.0, d)).unwrap()) / (2.0 * d);
            assert!((gx - fx).abs() < 1e-6 * (1.0 + fx.abs()));
            assert!((gy - fy).abs() < 1e-6 * (1.0 + fy.abs()));
        }
    }

    #[test]
    fn pair_energy_examples() {
        let g = Potential::gaussian();
        let e = g.pair_energy(c(1.0, 0.0), c(-1.0, 0.0), 0.5).unwrap();
        assert!((e.value - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((e.value - 0.7357589).abs() < 1e-7);
        let e = g.pair_energy(c(0.0, 0.0), c(1.0, 0.0), 1.0).unwrap();
        assert!((e.value - (-1.0f64).exp()).abs() < 1e-15);
        let e = g.pair_energy(c(0.3, 0.3), c(0.3, 0.3), 1.0).unwrap();
        assert!(e.coincident && e.value == 0.0);
    }

    #[test]
    fn pair_energy_decays_along_rings() {
        let pots = [
            Potential::gaussian(),
            Potential::elbau_felder(0.5).unwrap(),
            Potential::radial_monomial(2).unwrap(),
        ];
        for p in &pots {
            let r_max = p.truncation_radius(0.5, 1.0).unwrap().max(64.0);
            let mut prev = f64::INFINITY;
            let mut r = 2.0;
            while r <= r_max {
                let e = p.pair_energy(c(r, 0.0), c(0.0, -0.5 * r), 0.5).unwrap().value;
                assert!(e <= prev);
                prev = e;
                r *= 2.0;
            }
            assert!(prev < 1e-100);
        }
    }

    /// Scalar bisection for the crossing of `theta r^(2p) = 2 log(1 + r)`.
    fn radial_crossing(theta: f64, p: i32) -> f64 {
        let g = |r: f64| theta * (r * r).powi(p) - 2.0 * (1.0 + r).ln();
        let (mut lo, mut hi) = (0.5, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn truncation_radius_examples() {
        let r = Potential::gaussian().truncation_radius(0.5, 1.0).unwrap();
        assert!(r <= 8.0);
        assert!((r - radial_crossing(0.5, 1)).abs() < 1e-4, "{r}");
        let r = Potential::radial_monomial(1).unwrap().truncation_radius(1.0, 1.0).unwrap();
        assert!(r <= 4.0);
        assert!((r - radial_crossing(1.0, 1)).abs() < 1e-4, "{r}");
    }

    #[test]
    fn growth_bound_holds_beyond_truncation_radius() {
        let pots = [
            Potential::gaussian(),
            Potential::elbau_felder(0.9).unwrap(),
            Potential::radial_monomial(2).unwrap(),
        ];
        for p in &pots {
            for a in [1.0, 4.0, 16.0] {
                // theta Phi - (1 + slack) log(1 + r) >= 0 with theta = 1, slack = a - 1
                // implies Phi - a log|z| >= 0 past R.
                let r0 = p.truncation_radius(1.0, (a - 1.0f64).max(1e-3)).unwrap();
                for k in 0..200 {
                    let r = r0 * (1.0 + 0.05 * k as f64);
                    for j in 0..16 {
                        let z = Complex64::from_polar(r, j as f64 * 0.39);
                        assert!(p.phi(z).unwrap() - a * z.norm().ln() >= -1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn decaying_tabulated_potential_fails_growth_check() {
        let g = BoxGrid::new(4.0, 32).unwrap();
        let values = ScalarField::from_fn(g, |z| (-z.norm_sqr()).exp()).unwrap();
        let lap = ScalarField::from_fn(g, |_| 0.0).unwrap();
        let p = Potential::tabulated(values, lap).unwrap();
        assert!(matches!(p.truncation_radius(0.5, 1.0), Err(Error::GrowthCondition { .. })));
    }

    #[test]
    fn tabulated_queries_interpolate_and_reject_outside() {
        let g = BoxGrid::new(2.0, 64).unwrap();
        let values = ScalarField::from_fn(g, |z| z.norm_sqr()).unwrap();
        let lap = ScalarField::from_fn(g, |_| 4.0).unwrap();
        let p = Potential::tabulated(values, lap).unwrap();
        let z = c(0.3, -0.2);
        assert!((p.phi(z).unwrap() - 0.13).abs() < g.spacing().powi(2));
        assert_eq!(p.laplacian(z).unwrap(), 4.0);
        assert!(matches!(p.phi(c(3.0, 0.0)), Err(Error::Domain { .. })));
    }

    #[test]
    fn elbau_felder_range_is_enforced() {
        assert!(Potential::elbau_felder(1.0).is_err());
        assert!(Potential::elbau_felder(-1.5).is_err());
        assert!(Potential::elbau_felder(0.99).is_ok());
    }

    #[test]
    fn pair_energy_is_symmetric() {
        let p = Potential::elbau_felder(0.3).unwrap();
        let z = c(0.2, 1.1);
        let w = c(-0.7, 0.4);
        assert_eq!(
            p.pair_energy(z, w, 0.7).unwrap().value,
            p.pair_energy(w, z, 0.7).unwrap().value
        );
    }
}
