//! Midpoint-rule integration over a [`BoxGrid`] and weighted monomial moments
//! `<z^j, z^k> = int z^j conj(z)^k exp(-beta Phi) dA`.

use num_complex::Complex64;

use crate::error::{arg, Error, Result};
use crate::exec::Exec;
use crate::grid::BoxGrid;
use crate::potential::{Family, Potential};

/// `h^2 * sum f(node)`, exact for piecewise constants and `O(h^2)` for `C^2`
/// integrands.
pub fn integrate(grid: &BoxGrid, f: impl Fn(Complex64) -> f64 + Sync + Send) -> Result<f64> {
    integrate_with(grid, Exec::default(), f)
}

pub fn integrate_with(
    grid: &BoxGrid,
    exec: Exec,
    f: impl Fn(Complex64) -> f64 + Sync + Send,
) -> Result<f64> {
    let m = grid.nodes_per_side();
    let rows = exec.map_range(m, |iy| {
        let mut s = 0.0;
        for ix in 0..m {
            let v = f(grid.point(ix, iy));
            if !v.is_finite() {
                return Err(Error::NonFinite { index: grid.index(ix, iy) });
            }
            s += v;
        }
        Ok(s)
    });
    let mut total = 0.0;
    for r in rows {
        total += r?;
    }
    Ok(total * grid.cell_area())
}

fn check_box(grid: &BoxGrid, pot: &Potential, beta: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(arg(format!("beta must be positive, got {beta}")));
    }
    let required = pot.truncation_radius(beta / 2.0, 1.0)?;
    if grid.half_width() < required {
        return Err(Error::Truncation { half_width: grid.half_width(), required });
    }
    Ok(())
}

/// `int z^j conj(z)^k exp(-beta Phi(z)) dA(z)` by the midpoint rule.
pub fn weighted_inner_product(
    grid: &BoxGrid,
    pot: &Potential,
    beta: f64,
    j: u32,
    k: u32,
) -> Result<Complex64> {
    check_box(grid, pot, beta)?;
    let m = grid.nodes_per_side();
    let rows = Exec::default().map_range(m, |iy| -> Result<Complex64> {
        let mut s = Complex64::new(0.0, 0.0);
        for ix in 0..m {
            let z = grid.point(ix, iy);
            let w = (-beta * pot.phi(z)?).exp();
            if w > 0.0 {
                s += w * z.powu(j) * z.conj().powu(k);
            }
        }
        Ok(s)
    });
    let mut total = Complex64::new(0.0, 0.0);
    for r in rows {
        total += r?;
    }
    Ok(total * grid.cell_area())
}

/// Hermitian Gram matrix `G[j][k] = <z^j, z^k>` for `j, k < n`, row-major.
pub fn gram_matrix(
    grid: &BoxGrid,
    pot: &Potential,
    beta: f64,
    n: usize,
    exec: Exec,
) -> Result<Vec<Complex64>> {
    check_box(grid, pot, beta)?;
    if n == 0 {
        return Err(arg("Gram matrix needs n >= 1"));
    }
    let m = grid.nodes_per_side();
    let partials = exec.map_range(m, |iy| -> Result<Vec<Complex64>> {
        let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
        let mut powers = vec![Complex64::new(0.0, 0.0); n];
        for ix in 0..m {
            let z = grid.point(ix, iy);
            let w = (-beta * pot.phi(z)?).exp();
            if w == 0.0 {
                continue;
            }
            let mut p = Complex64::new(w.sqrt(), 0.0);
            for slot in powers.iter_mut() {
                *slot = p;
                p *= z;
            }
            for j in 0..n {
                let pj = powers[j];
                for k in 0..=j {
                    acc[j * n + k] += pj * powers[k].conj();
                }
            }
        }
        Ok(acc)
    });
    let mut g = vec![Complex64::new(0.0, 0.0); n * n];
    for part in partials {
        for (a, b) in g.iter_mut().zip(part?) {
            *a += b;
        }
    }
    let area = grid.cell_area();
    for j in 0..n {
        for k in 0..=j {
            let v = g[j * n + k] * area;
            g[j * n + k] = v;
            g[k * n + j] = v.conj();
        }
        g[j * n + j].im = 0.0;
    }
    Ok(g)
}

/// Diagonal moments `int |z|^(2j) exp(-beta Phi(|z|)) dA` for radial
/// potentials, computed as `pi int_0^inf s^j exp(-beta Phi(sqrt s)) ds` with
/// composite Gauss-Legendre panels.
pub fn radial_moments(pot: &Potential, beta: f64, n: usize) -> Result<Vec<f64>> {
    if !pot.is_radial() {
        return Err(arg("radial moments need a radial potential"));
    }
    if !(beta > 0.0) {
        return Err(arg(format!("beta must be positive, got {beta}")));
    }
    let r_max = moment_radius(pot, beta, n)?;
    let s_max = r_max * r_max;
    let (nodes, weights) = gauss_legendre(20);
    let panels = 400;
    let width = s_max / panels as f64;
    let mut out = vec![0.0; n];
    for panel in 0..panels {
        let a = panel as f64 * width;
        for (x, w) in nodes.iter().zip(&weights) {
            let s = a + 0.5 * width * (x + 1.0);
            let phi = pot.radial_profile(s.sqrt()).expect("radial");
            let base = 0.5 * width * w * (-beta * phi).exp();
            let mut sp = 1.0;
            for o in out.iter_mut() {
                *o += base * sp;
                sp *= s;
            }
        }
    }
    Ok(out.into_iter().map(|v| std::f64::consts::PI * v).collect())
}

/// Radius beyond which `r^(2n-1) exp(-beta Phi)` has dropped below `e^-42`
/// of its peak on every sampled ring, so moments up to degree `n - 1` are
/// unaffected by truncation at double precision.
pub fn moment_radius(pot: &Potential, beta: f64, n: usize) -> Result<f64> {
    let cap = match pot.family() {
        Family::Tabulated(t) => t.values.grid().half_width() - 0.5 * t.values.grid().spacing(),
        _ => 1e4,
    };
    let power = (2 * n.max(1) - 1) as f64;
    let log_integrand = |r: f64| -> Result<f64> {
        let mut phi_min = f64::INFINITY;
        for k in 0..32 {
            let z = Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 32.0);
            phi_min = phi_min.min(pot.phi(z)?);
        }
        Ok(power * r.ln() - beta * phi_min)
    };
    let mut peak = f64::NEG_INFINITY;
    let mut r = 1e-3;
    let mut last_above = r;
    while r < cap {
        let v = log_integrand(r)?;
        if v > peak {
            peak = v;
        }
        if v > peak - 42.0 {
            last_above = r;
        }
        r *= 1.02;
    }
    if log_integrand(cap.min(r))? > peak - 42.0 {
        return Err(Error::GrowthCondition { theta: beta / 2.0, slack: 1.0, cap });
    }
    Ok(last_above * 1.02)
}

/// Box for moment computations: large enough for both the truncation radius
/// and the decay of the highest moment.
pub fn moment_grid(pot: &Potential, beta: f64, n: usize, nodes: usize) -> Result<BoxGrid> {
    let l = pot
        .truncation_radius(beta / 2.0, 1.0)?
        .max(moment_radius(pot, beta, n)?);
    BoxGrid::new(l, nodes)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}
