//! Uniform rectangular node grids (d = 1 or 2) and densities sampled on them.

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Largest dimension supported for grid work.
pub const MAX_GRID_DIM: usize = 2;

/// Boundary mass fraction above which a density is considered truncated.
pub const BOUNDARY_MASS_TOLERANCE: f64 = 1e-8;

/// Box `[lo, hi]` with `n[k]` equally spaced nodes per axis, endpoints included.
///
/// Each node carries the weight `Π dx` in quadratures (midpoint rule with the
/// node at the cell centre).
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    lo: Vector,
    hi: Vector,
    n: [usize; MAX_GRID_DIM],
}

impl GridSpec {
    pub fn new(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        let d = lo.len();
        if d == 0 || d > MAX_GRID_DIM || hi.len() != d || n.len() != d {
            return Err(Error::InvalidParameter(format!(
                "grid needs matching lo/hi/n of dimension 1 or 2, got {}/{}/{}",
                lo.len(),
                hi.len(),
                n.len()
            )));
        }
        let mut counts = [1; MAX_GRID_DIM];
        for k in 0..d {
            if !(lo[k] < hi[k]) || !lo[k].is_finite() || !hi[k].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {k}: need lo < hi, got [{}, {}]",
                    lo[k], hi[k]
                )));
            }
            if n[k] < 8 {
                return Err(Error::InvalidParameter(format!(
                    "grid axis {k}: need at least 8 nodes, got {}",
                    n[k]
                )));
            }
            counts[k] = n[k];
        }
        Ok(Self { lo: Vector::from_slice(lo), hi: Vector::from_slice(hi), n: counts })
    }

    /// Same box and resolution on every axis.
    pub fn cube(d: usize, lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(&vec![lo; d], &vec![hi; d], &vec![n; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.n[..self.dim()]
    }

    pub fn len(&self) -> usize {
        self.nodes_per_axis().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.hi[axis] - self.lo[axis]) / (self.n[axis] - 1) as f64
    }

    pub fn spacings(&self) -> Vector {
        Vector::from_fn(self.dim(), |k| self.spacing(k))
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.spacing(k)).product()
    }

    /// Row-major flattening, last axis fastest.
    #[inline]
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        match self.dim() {
            1 => idx[0],
            _ => idx[0] * self.n[1] + idx[1],
        }
    }

    #[inline]
    pub fn multi_index(&self, flat: usize) -> [usize; MAX_GRID_DIM] {
        match self.dim() {
            1 => [flat, 0],
            _ => [flat / self.n[1], flat % self.n[1]],
        }
    }

    #[inline]
    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + i as f64 * self.spacing(axis)
    }

    pub fn node(&self, flat: usize) -> Vector {
        let idx = self.multi_index(flat);
        Vector::from_fn(self.dim(), |k| self.coordinate(k, idx[k]))
    }

    pub fn nodes(&self) -> impl Iterator<Item = Vector> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    pub fn is_boundary(&self, flat: usize) -> bool {
        let idx = self.multi_index(flat);
        (0..self.dim()).any(|k| idx[k] == 0 || idx[k] + 1 == self.n[k])
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim()).all(|k| x[k] >= self.lo[k] && x[k] <= self.hi[k])
    }

    /// Every other node along each axis. The upper edge moves inward by one
    /// node when `n − 1` is odd.
    pub fn coarsened(&self) -> Option<GridSpec> {
        let d = self.dim();
        let mut hi = [0.0; MAX_GRID_DIM];
        let mut n = [0usize; MAX_GRID_DIM];
        for k in 0..d {
            let keep = (self.n[k] - 1) / 2;
            n[k] = keep + 1;
            hi[k] = self.coordinate(k, 2 * keep);
        }
        GridSpec::new(&self.lo, &hi[..d], &n[..d]).ok()
    }

    /// Values of a fine-grid field at the nodes of [`GridSpec::coarsened`].
    pub fn restrict_to_coarse(&self, values: &[f64]) -> Option<(GridSpec, Vec<f64>)> {
        let coarse = self.coarsened()?;
        let out = (0..coarse.len())
            .map(|c| {
                let ci = coarse.multi_index(c);
                let fine = [2 * ci[0], 2 * ci[1]];
                values[self.flat_index(&fine[..self.dim()])]
            })
            .collect();
        Some((coarse, out))
    }

    /// Multilinear interpolation of nodal `values` at `x`. Points outside the
    /// box are clamped to it; the flag reports whether that happened.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> (f64, bool) {
        let d = self.dim();
        let mut base = [0usize; MAX_GRID_DIM];
        let mut frac = [0.0; MAX_GRID_DIM];
        let mut clamped = false;
        for k in 0..d {
            let h = self.spacing(k);
            let mut s = (x[k] - self.lo[k]) / h;
            let last = (self.n[k] - 1) as f64;
            if !(0.0..=last).contains(&s) {
                clamped = true;
                s = if s.is_nan() { 0.0 } else { s.clamp(0.0, last) };
            }
            let i = (s.floor() as usize).min(self.n[k] - 2);
            base[k] = i;
            frac[k] = s - i as f64;
        }
        let v = match d {
            1 => {
                let i = base[0];
                values[i] * (1.0 - frac[0]) + values[i + 1] * frac[0]
            }
            _ => {
                let n1 = self.n[1];
                let (i, j) = (base[0], base[1]);
                let (s, t) = (frac[0], frac[1]);
                let v00 = values[i * n1 + j];
                let v01 = values[i * n1 + j + 1];
                let v10 = values[(i + 1) * n1 + j];
                let v11 = values[(i + 1) * n1 + j + 1];
                (1.0 - s) * ((1.0 - t) * v00 + t * v01) + s * ((1.0 - t) * v10 + t * v11)
            }
        };
        (v, clamped)
    }

    /// Gradient of nodal `values` at node `flat`: central differences in the
    /// interior, one-sided second-order stencils on the boundary.
    pub fn nodal_gradient(&self, values: &[f64], flat: usize) -> Vector {
        let idx = self.multi_index(flat);
        let d = self.dim();
        Vector::from_fn(d, |k| {
            let h = self.spacing(k);
            let at = |offset: isize| {
                let mut j = idx;
                j[k] = (idx[k] as isize + offset) as usize;
                values[self.flat_index(&j[..d])]
            };
            let i = idx[k];
            let last = self.n[k] - 1;
            if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == last {
                (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
            } else {
                (at(1) - at(-1)) / (2.0 * h)
            }
        })
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self == other
    }
}

/// Nonnegative nodal density on a [`GridSpec`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    grid: GridSpec,
    values: Vec<f64>,
    time: f64,
}

impl GridDensity {
    pub fn new(grid: GridSpec, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "density value {} at node {bad} is negative or not finite",
                values[bad]
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub(crate) fn from_parts_unchecked(grid: GridSpec, values: Vec<f64>, time: f64) -> Self {
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn normalized(mut self) -> Result<Self> {
        let m = self.mass();
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot normalize density of mass {m}")));
        }
        for v in &mut self.values {
            *v /= m;
        }
        Ok(self)
    }

    /// Share of the mass carried by boundary nodes.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let total: f64 = self.values.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        let edge: f64 = (0..self.values.len())
            .filter(|&i| self.grid.is_boundary(i))
            .map(|i| self.values[i])
            .sum();
        edge / total
    }

    pub fn boundary_warning(&self) -> bool {
        self.boundary_mass_fraction() > BOUNDARY_MASS_TOLERANCE
    }

    pub fn interpolate(&self, x: &[f64]) -> (f64, bool) {
        self.grid.interpolate(&self.values, x)
    }

    /// Mean and covariance (d ≤ 2) by nodal quadrature.
    pub fn moments(&self) -> (Vector, [[f64; 2]; 2]) {
        let d = self.grid.dim();
        let w = self.grid.cell_volume();
        let mass = self.mass();
        let mut mean = Vector::zeros(d);
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.node(i);
            for k in 0..d {
                mean[k] += v * w * x[k] / mass;
            }
        }
        let mut cov = [[0.0; 2]; 2];
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.node(i);
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += v * w * (x[a] - mean[a]) * (x[b] - mean[b]) / mass;
                }
            }
        }
        (mean, cov)
    }

    /// `∫|p − q|` on a shared grid.
    pub fn l1_distance(&self, other: &GridDensity) -> Result<f64> {
        ensure_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn sup_distance(&self, other: &GridDensity) -> Result<f64> {
        ensure_same_grid(self, other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

pub(crate) fn ensure_same_grid(p: &GridDensity, q: &GridDensity) -> Result<()> {
    if p.grid.same_as(&q.grid) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("{:?} vs {:?}", p.grid, q.grid)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_too_few_nodes_and_inverted_boxes() {
        assert!(GridSpec::new(&[0.0], &[1.0], &[7]).is_err());
        assert!(GridSpec::new(&[1.0], &[0.0], &[16]).is_err());
        assert!(GridSpec::new(&[0.0, 0.0], &[1.0], &[16, 16]).is_err());
    }

    #[test]
    fn spacing_and_flattening() {
        let g = GridSpec::new(&[-1.0, 0.0], &[1.0, 2.0], &[11, 21]).unwrap();
        assert!((g.spacing(0) - 0.2).abs() < 1e-15);
        assert!((g.spacing(1) - 0.1).abs() < 1e-15);
        let flat = g.flat_index(&[3, 7]);
        assert_eq!(g.multi_index(flat), [3, 7]);
        let x = g.node(flat);
        assert!((x[0] + 0.4).abs() < 1e-14 && (x[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn bilinear_interpolation_is_exact_for_bilinear_fields() {
        let g = GridSpec::new(&[-1.0, -2.0], &[1.0, 2.0], &[9, 17]).unwrap();
        let f = |x: &[f64]| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1];
        let vals: Vec<f64> = g.nodes().map(|x| f(&x)).collect();
        for x in [[0.13, -0.77], [-0.99, 1.91], [0.5, 0.5]] {
            let (v, clamped) = g.interpolate(&vals, &x);
            assert!(!clamped);
            assert!((v - f(&x)).abs() < 1e-12);
        }
        let (_, clamped) = g.interpolate(&vals, &[3.0, 0.0]);
        assert!(clamped);
    }

    #[test]
    fn nodal_gradient_is_exact_on_quadratics() {
        let g = GridSpec::new(&[0.0], &[1.0], &[33]).unwrap();
        let vals: Vec<f64> = g.nodes().map(|x| x[0] * x[0]).collect();
        for i in [0, 5, 32] {
            let gx = g.nodal_gradient(&vals, i)[0];
            assert!((gx - 2.0 * g.node(i)[0]).abs() < 1e-12, "node {i}: {gx}");
        }
    }

    #[test]
    fn coarsening_keeps_even_nodes() {
        let g = GridSpec::new(&[0.0], &[1.0], &[17]).unwrap();
        let vals: Vec<f64> = (0..17).map(|i| i as f64).collect();
        let (c, cv) = g.restrict_to_coarse(&vals).unwrap();
        assert_eq!(c.len(), 9);
        assert_eq!(cv[3], 6.0);
        assert!((c.hi()[0] - 1.0).abs() < 1e-15);
    }
}
