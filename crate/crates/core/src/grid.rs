//! Uniform cell-centered grids on a square box and fields sampled on them.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};

/// The square `[-L, L]^2` split into `M x M` cells of side `h = 2L/M`; node
/// `(i, j)` sits at the center of its cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxGrid {
    half_width: f64,
    nodes_per_side: usize,
}

impl BoxGrid {
    pub fn new(half_width: f64, nodes_per_side: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(arg(format!("grid half-width must be positive, got {half_width}")));
        }
        if nodes_per_side < 16 || nodes_per_side % 2 != 0 {
            return Err(arg(format!(
                "nodes per side must be even and at least 16, got {nodes_per_side}"
            )));
        }
        nodes_per_side
            .checked_mul(nodes_per_side)
            .ok_or_else(|| arg("grid too large"))?;
        Ok(Self { half_width, nodes_per_side })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn nodes_per_side(&self) -> usize {
        self.nodes_per_side
    }

    pub fn len(&self) -> usize {
        self.nodes_per_side * self.nodes_per_side
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.nodes_per_side as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h * h
    }

    /// Coordinate of node `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.spacing()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_per_side + ix
    }

    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> Complex64 {
        Complex64::new(self.coord(ix), self.coord(iy))
    }

    #[inline]
    pub fn point_at(&self, index: usize) -> Complex64 {
        self.point(index % self.nodes_per_side, index / self.nodes_per_side)
    }

    /// Cell containing `z`, if any.
    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let h = self.spacing();
        let fx = ((z.re + self.half_width) / h).floor();
        let fy = ((z.im + self.half_width) / h).floor();
        let m = self.nodes_per_side as f64;
        if fx >= 0.0 && fy >= 0.0 && fx < m && fy < m {
            Some((fx as usize, fy as usize))
        } else {
            None
        }
    }

    /// Distance (in cells) from node `(ix, iy)` to the nearest box edge node.
    pub fn edge_distance(&self, ix: usize, iy: usize) -> usize {
        let m = self.nodes_per_side - 1;
        ix.min(iy).min(m - ix).min(m - iy)
    }

    /// Grid with the same box and twice as many nodes per side.
    pub fn refined(&self) -> Self {
        Self { half_width: self.half_width, nodes_per_side: 2 * self.nodes_per_side }
    }
}

/// A real function sampled at every node of a [`BoxGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: BoxGrid,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    half_width: f64,
    nodes_per_side: usize,
    dtype: String,
}

impl ScalarField {
    pub fn new(grid: BoxGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(arg(format!(
                "field has {} values, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: BoxGrid, f: impl Fn(Complex64) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|k| f(grid.point_at(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &BoxGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// Bilinear interpolation between node centers. Points outside the hull
    /// of the node centers yield `None`.
    pub fn interpolate(&self, z: Complex64) -> Option<f64> {
        let g = &self.grid;
        let h = g.spacing();
        let m = g.nodes_per_side();
        let sx = (z.re - g.coord(0)) / h;
        let sy = (z.im - g.coord(0)) / h;
        let last = (m - 1) as f64;
        if !(sx >= 0.0 && sy >= 0.0 && sx <= last && sy <= last) {
            return None;
        }
        let ix = (sx.floor() as usize).min(m - 2);
        let iy = (sy.floor() as usize).min(m - 2);
        let tx = sx - ix as f64;
        let ty = sy - iy as f64;
        let v00 = self.at(ix, iy);
        let v10 = self.at(ix + 1, iy);
        let v01 = self.at(ix, iy + 1);
        let v11 = self.at(ix + 1, iy + 1);
        Some(
            (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11),
        )
    }

    /// Writes the `.f64` format: one JSON header line, then the values as
    /// little-endian doubles in row-major order (imaginary axis major).
    pub fn write_f64(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        let header = FieldHeader {
            half_width: self.grid.half_width,
            nodes_per_side: self.grid.nodes_per_side,
            dtype: "f64-le".into(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for v in &self.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_f64(path: impl AsRef<Path>) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut line = String::new();
        input.read_line(&mut line)?;
        let header: FieldHeader = serde_json::from_str(line.trim_end())?;
        if header.dtype != "f64-le" {
            return Err(arg(format!("unsupported dtype {}", header.dtype)));
        }
        let grid = BoxGrid::new(header.half_width, header.nodes_per_side)?;
        let mut bytes = Vec::with_capacity(grid.len() * 8);
        input.read_to_end(&mut bytes)?;
        if bytes.len() != grid.len() * 8 {
            return Err(arg(format!(
                "expected {} bytes of data, found {}",
                grid.len() * 8,
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Self::new(grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(BoxGrid::new(1.0, 15).is_err());
        assert!(BoxGrid::new(1.0, 17).is_err());
        assert!(BoxGrid::new(0.0, 16).is_err());
        assert!(BoxGrid::new(1.0, 16).is_ok());
    }

    #[test]
    fn nodes_are_cell_centered_and_symmetric() {
        let g = BoxGrid::new(2.0, 16).unwrap();
        assert_eq!(g.spacing(), 0.25);
        assert_eq!(g.coord(0), -1.875);
        assert_eq!(g.coord(15), 1.875);
        assert_eq!(g.coord(7), -g.coord(8));
        assert_eq!(g.cell_of(Complex64::new(-1.9, 1.99)), Some((0, 15)));
        assert_eq!(g.cell_of(Complex64::new(2.1, 0.0)), None);
    }

    #[test]
    fn interpolation_reproduces_bilinear_functions() {
        let g = BoxGrid::new(1.0, 16).unwrap();
        let f = ScalarField::from_fn(g, |z| 1.0 + 2.0 * z.re - z.im + 0.5 * z.re * z.im).unwrap();
        let z = Complex64::new(0.123, -0.456);
        let exact = 1.0 + 2.0 * z.re - z.im + 0.5 * z.re * z.im;
        assert!((f.interpolate(z).unwrap() - exact).abs() < 1e-12);
        assert!(f.interpolate(Complex64::new(0.99, 0.0)).is_none());
    }

    #[test]
    fn f64_file_round_trip() {
        let g = BoxGrid::new(3.0, 16).unwrap();
        let f = ScalarField::from_fn(g, |z| z.norm_sqr().sin()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.f64");
        f.write_f64(&path).unwrap();
        let back = ScalarField::read_f64(&path).unwrap();
        assert_eq!(f, back);
        let raw = std::fs::read(&path).unwrap();
        let nl = raw.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(raw.len() - nl - 1, 16 * 16 * 8);
        let first = f64::from_le_bytes(raw[nl + 1..nl + 9].try_into().unwrap());
        assert_eq!(first, f.at(0, 0));
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let g = BoxGrid::new(1.0, 16).unwrap();
        let mut v = vec![0.0; 256];
        v[17] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite { index: 17 })));
    }
}
