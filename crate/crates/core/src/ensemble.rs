//! Parameter conversions for the scaling `beta = (N - 1)/tau`, and the
//! relation between correlation measures and marginals of the ensemble.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::kernel::{correlation_density, ln_factorial, WeightedBasis};
use crate::potential::ComplexPoint;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    pub beta: f64,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    Tau(f64),
    Beta(f64),
    Theta(f64),
}

pub fn make_scaling(n: usize, given: Scale) -> Result<ScalingParams> {
    if n < 2 {
        return Err(arg(format!("scaling needs N >= 2, got {n}")));
    }
    let v = match given {
        Scale::Tau(v) | Scale::Beta(v) | Scale::Theta(v) => v,
    };
    if !(v.is_finite() && v > 0.0) {
        return Err(arg(format!("scaling parameter must be positive, got {v}")));
    }
    let m = (n - 1) as f64;
    let tau = match given {
        Scale::Tau(t) => t,
        Scale::Beta(b) => m / b,
        Scale::Theta(t) => 1.0 / (2.0 * t),
    };
    let (beta, theta) = match given {
        Scale::Beta(b) => (b, b / (2.0 * m)),
        Scale::Theta(t) => (2.0 * m * t, t),
        Scale::Tau(t) => (m / t, 1.0 / (2.0 * t)),
    };
    Ok(ScalingParams { n, tau, beta, theta })
}

/// Log-space value of `N!/(N - n)!`.
pub fn ln_falling_factorial(n_total: usize, n: usize) -> f64 {
    ln_factorial(n_total) - ln_factorial(n_total - n)
}

/// `(Gamma_n, Pi_n)` at the points `zs`, where `n = zs.len()`.
pub fn correlation_vs_marginal(
    basis: &WeightedBasis,
    params: &ScalingParams,
    zs: &[ComplexPoint],
) -> Result<(f64, f64)> {
    if basis.dimension() != params.n {
        return Err(arg(format!(
            "basis has dimension {} but N = {}",
            basis.dimension(),
            params.n
        )));
    }
    if (basis.beta() - params.beta).abs() > 1e-12 * params.beta {
        return Err(arg("basis was built for a different beta"));
    }
    let gamma = correlation_density(basis, zs)?;
    if gamma == 0.0 {
        return Ok((0.0, 0.0));
    }
    let pi = (gamma.ln() - ln_falling_factorial(params.n, zs.len())).exp();
    Ok((gamma, pi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::build_basis;
    use crate::potential::Potential;
    use crate::quadrature::{integrate, moment_grid};
    use num_complex::Complex64;
    use proptest::prelude::*;

    #[test]
    fn scaling_examples() {
        let p = make_scaling(5, Scale::Tau(1.0)).unwrap();
        assert_eq!((p.beta, p.theta), (4.0, 0.5));
        let p = make_scaling(2, Scale::Beta(1.0)).unwrap();
        assert_eq!((p.tau, p.theta), (1.0, 0.5));
        let p = make_scaling(3, Scale::Theta(0.25)).unwrap();
        assert_eq!((p.tau, p.beta), (2.0, 1.0));
        assert!(make_scaling(1, Scale::Tau(1.0)).is_err());
        assert!(make_scaling(4, Scale::Beta(-1.0)).is_err());
    }

    proptest! {
        #[test]
        fn scaling_round_trips(n in 2usize..200, tau in 1e-3f64..1e3) {
            let a = make_scaling(n, Scale::Tau(tau)).unwrap();
            for s in [Scale::Beta(a.beta), Scale::Theta(a.theta)] {
                let b = make_scaling(n, s).unwrap();
                prop_assert!((a.tau - b.tau).abs() <= 1e-15 * a.tau);
                prop_assert!((a.beta - b.beta).abs() <= 1e-15 * a.beta);
                prop_assert!((a.theta - b.theta).abs() <= 1e-15 * a.theta);
            }
        }
    }

    #[test]
    fn falling_factorial_stays_finite_for_large_n() {
        let v = ln_falling_factorial(200, 100);
        assert!(v.is_finite() && v > 0.0);
        assert!((ln_falling_factorial(5, 2) - 20f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn marginals_integrate_to_one_and_correlation_to_n() {
        let params = make_scaling(2, Scale::Tau(1.0)).unwrap();
        let pot = Potential::gaussian();
        let grid = moment_grid(&pot, params.beta, 2, 256).unwrap();
        let basis = build_basis(&pot, params.beta, 2, &grid).unwrap();
        let gamma1 =
            integrate(&grid, |z| correlation_vs_marginal(&basis, &params, &[z]).unwrap().0).unwrap();
        assert!((gamma1 - 2.0).abs() < 1e-3);

        // Pi_2 over grid^2 on a coarser grid.
        let coarse = moment_grid(&pot, params.beta, 2, 32).unwrap();
        let pts: Vec<Complex64> = (0..coarse.len()).map(|k| coarse.point_at(k)).collect();
        let mut total = 0.0;
        for &z in &pts {
            for &w in &pts {
                total += correlation_vs_marginal(&basis, &params, &[z, w]).unwrap().1;
            }
        }
        total *= coarse.cell_area().powi(2);
        assert!((total - 1.0).abs() < 1e-2, "{total}");
    }

    #[test]
    fn coincident_points_and_ratio() {
        let params = make_scaling(4, Scale::Tau(1.0)).unwrap();
        let pot = Potential::gaussian();
        let grid = moment_grid(&pot, params.beta, 4, 64).unwrap();
        let basis = build_basis(&pot, params.beta, 4, &grid).unwrap();
        let z = Complex64::new(0.2, 0.1);
        assert_eq!(correlation_vs_marginal(&basis, &params, &[z, z]).unwrap(), (0.0, 0.0));
        let (g, p) =
            correlation_vs_marginal(&basis, &params, &[z, Complex64::new(-0.3, 0.4)]).unwrap();
        assert!((g.ln() - p.ln() - 12f64.ln()).abs() < 1e-12);
        let wrong = make_scaling(5, Scale::Tau(1.0)).unwrap();
        assert!(correlation_vs_marginal(&basis, &wrong, &[z]).is_err());
    }
}
