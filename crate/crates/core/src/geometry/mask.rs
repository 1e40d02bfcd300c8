use log::warn;

use crate::error::{Error, Result};
use crate::geometry::domain::AnalyticDomain;
use crate::grid::{Grid, Point};

/// Labels of the 4-connected components of `set`. Returns per-cell labels
/// (`u32::MAX` outside the set) and the size of each component, ordered by
/// first appearance in row-major scan.
pub fn components(grid: &Grid, set: &[bool]) -> (Vec<u32>, Vec<usize>) {
    let mut labels = vec![u32::MAX; grid.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if !set[start] || labels[start] != u32::MAX {
            continue;
        }
        let label = sizes.len() as u32;
        let mut size = 0;
        labels[start] = label;
        stack.push(start);
        while let Some(k) = stack.pop() {
            size += 1;
            let (i, j) = grid.ij(k);
            let mut visit = |n: usize| {
                if set[n] && labels[n] == u32::MAX {
                    labels[n] = label;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < grid.nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - grid.nx);
            }
            if j + 1 < grid.ny {
                visit(k + grid.nx);
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Largest 4-connected component of `set` (first one on ties).
pub fn largest_component(grid: &Grid, set: &[bool]) -> (Vec<bool>, usize) {
    let (labels, sizes) = components(grid, set);
    let Some((best, _)) = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
    else {
        return (vec![false; grid.len()], 0);
    };
    let out = labels.iter().map(|&l| l == best as u32).collect();
    (out, sizes.len())
}

/// Number of exterior cell layers along the grid edge.
fn exterior_margin(grid: &Grid, inside: &[bool]) -> usize {
    let (mut imin, mut imax, mut jmin, mut jmax) = (usize::MAX, 0, usize::MAX, 0);
    for (k, _) in inside.iter().enumerate().filter(|(_, &b)| b) {
        let (i, j) = grid.ij(k);
        imin = imin.min(i);
        imax = imax.max(i);
        jmin = jmin.min(j);
        jmax = jmax.max(j);
    }
    if imin == usize::MAX {
        return grid.nx.min(grid.ny);
    }
    imin.min(jmin)
        .min(grid.nx - 1 - imax)
        .min(grid.ny - 1 - jmax)
}

/// Binary indicator of a bounded domain on a grid.
///
/// Invariants, checked on construction: at least one interior cell; the
/// interior is a single 4-connected component; at least two exterior layers
/// at the grid edge; no enclosed single-cell exterior cavities (those are
/// filled with a warning).
#[derive(Clone, Debug, PartialEq)]
pub struct DomainMask {
    grid: Grid,
    inside: Vec<bool>,
    margin: usize,
    warnings: Vec<String>,
}

impl DomainMask {
    pub fn new(grid: Grid, mut inside: Vec<bool>) -> Result<Self> {
        if inside.len() != grid.len() {
            return Err(Error::GridMismatch("mask length".into()));
        }
        let mut warnings = Vec::new();
        let filled = fill_single_cell_cavities(&grid, &mut inside);
        if filled > 0 {
            let msg = format!("filled {filled} enclosed single-cell cavities");
            warn!("{msg}");
            warnings.push(msg);
        }
        let (_, sizes) = components(&grid, &inside);
        match sizes.len() {
            0 => return Err(Error::InvalidMask("no interior cells".into())),
            1 => {}
            n => {
                return Err(Error::DisconnectedRaster {
                    components: n,
                    h: grid.h,
                })
            }
        }
        let margin = exterior_margin(&grid, &inside);
        if margin < 2 {
            return Err(Error::DomainDoesNotFit { margin: 2 });
        }
        Ok(DomainMask {
            grid,
            inside,
            margin,
            warnings,
        })
    }

    pub fn from_predicate(grid: Grid, f: impl Fn(Point) -> bool) -> Result<Self> {
        let inside = (0..grid.len()).map(|k| f(grid.center_of(k))).collect();
        DomainMask::new(grid, inside)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn contains(&self, k: usize) -> bool {
        self.inside[k]
    }

    #[inline]
    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn margin(&self) -> usize {
        self.margin
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub(crate) fn push_warning(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.inside
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| k)
    }

    pub fn count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }

    pub fn area(&self) -> f64 {
        self.count() as f64 * self.grid.cell_area()
    }

    pub fn is_subset_of(&self, other: &DomainMask) -> bool {
        self.grid.same_as(&other.grid)
            && self
                .inside
                .iter()
                .zip(&other.inside)
                .all(|(&a, &b)| !a || b)
    }

    /// Cells of `self` not in `other`, times cell area.
    pub fn area_minus(&self, other: &DomainMask) -> f64 {
        let n = self
            .inside
            .iter()
            .zip(&other.inside)
            .filter(|(&a, &b)| a && !b)
            .count();
        n as f64 * self.grid.cell_area()
    }

    /// Interior cells at Chebyshev distance `> depth` from every exterior cell.
    pub fn deep_interior(&self, depth: usize) -> Vec<bool> {
        let g = &self.grid;
        let mut out = self.inside.clone();
        for _ in 0..depth {
            let prev = out.clone();
            for k in 0..g.len() {
                if !prev[k] {
                    continue;
                }
                let (i, j) = g.ij(k);
                let ok = i > 0
                    && i + 1 < g.nx
                    && j > 0
                    && j + 1 < g.ny
                    && prev[k - 1]
                    && prev[k + 1]
                    && prev[k - g.nx]
                    && prev[k + g.nx]
                    && prev[k - g.nx - 1]
                    && prev[k - g.nx + 1]
                    && prev[k + g.nx - 1]
                    && prev[k + g.nx + 1];
                out[k] = ok;
            }
        }
        out
    }
}

/// Fills exterior components that consist of a single enclosed cell.
fn fill_single_cell_cavities(grid: &Grid, inside: &mut [bool]) -> usize {
    let outside: Vec<bool> = inside.iter().map(|b| !b).collect();
    let (labels, sizes) = components(grid, &outside);
    let mut touches_edge = vec![false; sizes.len()];
    for k in 0..grid.len() {
        let (i, j) = grid.ij(k);
        if labels[k] != u32::MAX && (i == 0 || j == 0 || i + 1 == grid.nx || j + 1 == grid.ny) {
            touches_edge[labels[k] as usize] = true;
        }
    }
    let mut filled = 0;
    for k in 0..grid.len() {
        let l = labels[k];
        if l != u32::MAX && !touches_edge[l as usize] && sizes[l as usize] == 1 {
            inside[k] = true;
            filled += 1;
        }
    }
    filled
}

/// Rasterizes `dom` on `grid`: a cell is interior iff its centre lies in the
/// domain. Holes with diameter below `2h` are dropped with a warning.
pub fn rasterize(dom: &AnalyticDomain, grid: &Grid) -> Result<DomainMask> {
    const MARGIN: usize = 2;
    let (lo, hi) = dom.bounds();
    let up = grid.upper();
    let m = MARGIN as f64 * grid.h;
    if lo[0] < grid.origin[0] + m
        || lo[1] < grid.origin[1] + m
        || hi[0] > up[0] - m
        || hi[1] > up[1] - m
    {
        return Err(Error::DomainDoesNotFit { margin: MARGIN });
    }
    let mut warnings = Vec::new();
    let effective = match dom {
        AnalyticDomain::DiskMinusBalls { radius, holes } => {
            let kept: Vec<_> = holes
                .iter()
                .copied()
                .filter(|hole| {
                    let keep = 2.0 * hole.radius >= 2.0 * grid.h;
                    if !keep {
                        warnings.push(format!(
                            "dropped sub-resolution hole at ({:.6}, {:.6}) with radius {:.3e} < h = {:.3e}",
                            hole.center[0], hole.center[1], hole.radius, grid.h
                        ));
                    }
                    keep
                })
                .collect();
            AnalyticDomain::DiskMinusBalls {
                radius: *radius,
                holes: kept,
            }
        }
        other => other.clone(),
    };
    let mut mask = DomainMask::from_predicate(*grid, |p| effective.contains(p))?;
    for w in warnings {
        mask.push_warning(w);
    }
    Ok(mask)
}
