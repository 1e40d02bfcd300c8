//! Uniform cell-centred grids and the fields sampled on them.
//!
//! Cells are stored row-major: index `j * nx + i`, with `i` running along x
//! and `j` along y. The centre of cell `(i, j)` is
//! `origin + ((i + 0.5) h, (j + 0.5) h)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, h: f64, origin: Point) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        if nx < 8 || ny < 8 {
            return Err(Error::InvalidGrid(format!(
                "need at least 8 cells per axis, got {nx}x{ny}"
            )));
        }
        if !origin[0].is_finite() || !origin[1].is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Grid { nx, ny, h, origin })
    }

    /// Smallest grid of spacing `h` covering the box `[lo, hi]` with `margin`
    /// extra cells on every side. When the box side is a multiple of `h` the
    /// box edges fall on cell boundaries.
    pub fn covering(lo: Point, hi: Point, h: f64, margin: usize) -> Result<Self> {
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(Error::InvalidGrid("empty covering box".into()));
        }
        let cells = |a: f64, b: f64| {
            let n = (b - a) / h;
            // tolerate round-off when the side is an exact multiple of h
            let r = n.round();
            if (n - r).abs() < 1e-9 * n.max(1.0) {
                r as usize
            } else {
                n.ceil() as usize
            }
        };
        let cx = cells(lo[0], hi[0]);
        let cy = cells(lo[1], hi[1]);
        let nx = cx + 2 * margin;
        let ny = cy + 2 * margin;
        let mid = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let origin = [mid[0] - nx as f64 * h / 2.0, mid[1] - ny as f64 * h / 2.0];
        Grid::new(nx, ny, h, origin)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + (i as f64 + 0.5) * self.h,
            self.origin[1] + (j as f64 + 0.5) * self.h,
        ]
    }

    #[inline]
    pub fn center_of(&self, k: usize) -> Point {
        let (i, j) = self.ij(k);
        self.center(i, j)
    }

    /// Cell containing `p`, if any.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p[0] - self.origin[0]) / self.h;
        let fy = (p[1] - self.origin[1]) / self.h;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        (i < self.nx && j < self.ny).then_some((i, j))
    }

    pub fn upper(&self) -> Point {
        [
            self.origin[0] + self.nx as f64 * self.h,
            self.origin[1] + self.ny as f64 * self.h,
        ]
    }

    pub fn cell_area(&self) -> f64 {
        self.h * self.h
    }

    /// Same box, half the spacing.
    pub fn refined(&self) -> Grid {
        Grid {
            nx: self.nx * 2,
            ny: self.ny * 2,
            h: self.h / 2.0,
            origin: self.origin,
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && (self.h - other.h).abs() <= 1e-12 * self.h
            && (self.origin[0] - other.origin[0]).abs() <= 1e-12 * self.h.max(1.0)
            && (self.origin[1] - other.origin[1]).abs() <= 1e-12 * self.h.max(1.0)
    }

    pub fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(what.to_string()))
        }
    }

    /// Bilinear interpolation of cell-centred samples at `p` (clamped to the
    /// grid of centres).
    pub fn interpolate(&self, values: &[f64], p: Point) -> f64 {
        self.interpolate_shifted(values, p, [0.0, 0.0])
    }

    /// Bilinear interpolation of samples that live at `centre + shift * h`.
    pub fn interpolate_shifted(&self, values: &[f64], p: Point, shift: [f64; 2]) -> f64 {
        let fx = (p[0] - self.origin[0]) / self.h - 0.5 - shift[0];
        let fy = (p[1] - self.origin[1]) / self.h - 0.5 - shift[1];
        let fx = fx.clamp(0.0, (self.nx - 1) as f64);
        let fy = fy.clamp(0.0, (self.ny - 1) as f64);
        let i0 = (fx.floor() as usize).min(self.nx - 2);
        let j0 = (fy.floor() as usize).min(self.ny - 2);
        let (tx, ty) = (fx - i0 as f64, fy - j0 as f64);
        let v = |i: usize, j: usize| values[self.idx(i, j)];
        (1.0 - ty) * ((1.0 - tx) * v(i0, j0) + tx * v(i0 + 1, j0))
            + ty * ((1.0 - tx) * v(i0, j0 + 1) + tx * v(i0 + 1, j0 + 1))
    }
}

/// Real-valued cell samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Values may be `±inf` (generalized solutions).
    pub extended: bool,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.len()],
            extended: false,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center_of(k))).collect();
        ScalarField {
            grid,
            values,
            extended: false,
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.nx,
                grid.ny
            )));
        }
        Ok(ScalarField {
            grid,
            values,
            extended: false,
        })
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if !self.extended && self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    pub fn at(&self, p: Point) -> f64 {
        self.grid.interpolate(&self.values, p)
    }

    pub fn max_abs_on(&self, cells: impl Iterator<Item = usize>) -> f64 {
        cells.map(|k| self.values[k].abs()).fold(0.0, f64::max)
    }
}

/// Planar vector samples.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub values: Vec<[f64; 2]>,
    /// Known bound `M` with `max |values| <= M`.
    pub sup_bound: Option<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            values: vec![[0.0; 2]; grid.len()],
            sup_bound: None,
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> [f64; 2]) -> Self {
        let values = (0..grid.len()).map(|k| f(grid.center_of(k))).collect();
        VectorField {
            grid,
            values,
            sup_bound: None,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|v| norm(*v)).fold(0.0, f64::max)
    }

    pub fn sup_norm_on(&self, cells: impl Iterator<Item = usize>) -> f64 {
        cells.map(|k| norm(self.values[k])).fold(0.0, f64::max)
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self
            .values
            .iter()
            .any(|v| !v[0].is_finite() || !v[1].is_finite())
        {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    pub fn component(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

#[inline]
pub fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Point, b: Point) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    norm(sub(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_degenerate_grids() {
        assert!(Grid::new(7, 10, 0.1, [0.0, 0.0]).is_err());
        assert!(Grid::new(10, 10, 0.0, [0.0, 0.0]).is_err());
        assert!(Grid::new(10, 10, -1.0, [0.0, 0.0]).is_err());
        assert!(Grid::new(8, 8, 0.5, [0.0, 0.0]).is_ok());
    }

    #[test]
    fn centre_mapping_is_injective_and_round_trips() {
        let g = Grid::new(13, 9, 0.25, [-1.0, 2.0]).unwrap();
        for k in 0..g.len() {
            let c = g.center_of(k);
            let (i, j) = g.cell_of(c).unwrap();
            assert_eq!(g.idx(i, j), k);
        }
        assert_eq!(g.center(0, 0), [-0.875, 2.125]);
    }

    #[test]
    fn covering_aligns_box_edges() {
        let g = Grid::covering([0.0, 0.0], [1.0, 1.0], 1.0 / 64.0, 3).unwrap();
        assert_eq!(g.nx, 70);
        assert!((g.origin[0] + 3.0 / 64.0).abs() < 1e-14);
    }

    #[test]
    fn bilinear_interpolation_is_exact_for_affine_data() {
        let g = Grid::new(10, 12, 0.1, [0.0, 0.0]).unwrap();
        let f = ScalarField::from_fn(g, |p| 2.0 * p[0] - 3.0 * p[1] + 1.0);
        let p = [0.437, 0.611];
        assert!((f.at(p) - (2.0 * p[0] - 3.0 * p[1] + 1.0)).abs() < 1e-12);
    }
}
