//! Boundary polylines of binary sets and the perimeter estimators.
//!
//! A binary set is mollified with a compactly supported kernel of radius
//! `2h` and its `0.5` level line is traced by marching squares on the
//! lattice of cell centres. Loops are oriented with the set on the left, so
//! outer boundaries run counter-clockwise and hole boundaries clockwise.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::grid::{dist, Grid, Point};

const LEVEL: f64 = 0.5;

/// Axis-aligned open rectangle used to localize perimeters, `P(E; A)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub lo: Point,
    pub hi: Point,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p[0] > self.lo[0] && p[0] < self.hi[0] && p[1] > self.lo[1] && p[1] < self.hi[1]
    }

    /// Length of the part of segment `a -> b` inside the rectangle.
    pub fn clipped_length(&self, a: Point, b: Point) -> f64 {
        // Liang-Barsky
        let d = [b[0] - a[0], b[1] - a[1]];
        let (mut t0, mut t1) = (0.0f64, 1.0f64);
        for (p, q) in [
            (-d[0], a[0] - self.lo[0]),
            (d[0], self.hi[0] - a[0]),
            (-d[1], a[1] - self.lo[1]),
            (d[1], self.hi[1] - a[1]),
        ] {
            if p == 0.0 {
                if q < 0.0 {
                    return 0.0;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    t0 = t0.max(r);
                } else {
                    t1 = t1.min(r);
                }
            }
        }
        if t1 > t0 {
            (t1 - t0) * dist(a, b)
        } else {
            0.0
        }
    }
}

/// Closed polylines; consecutive points are joined and the last point joins
/// the first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundaryCurve {
    pub loops: Vec<Vec<Point>>,
}

impl BoundaryCurve {
    pub fn length(&self) -> f64 {
        self.loops.iter().map(|l| loop_length(l)).sum()
    }

    pub fn length_in(&self, region: &Rect) -> f64 {
        self.segments()
            .map(|(a, b)| region.clipped_length(a, b))
            .sum()
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.loops.iter().flat_map(|l| {
            (0..l.len()).map(move |s| (l[s], l[(s + 1) % l.len()]))
        })
    }

    pub fn segment_count(&self) -> usize {
        self.loops.iter().map(|l| l.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }
}

pub fn loop_length(l: &[Point]) -> f64 {
    (0..l.len()).map(|s| dist(l[s], l[(s + 1) % l.len()])).sum()
}

/// Kernel radius, in cells, of the mollifier behind [`binary_perimeter`].
/// Narrower kernels leave a staircase ripple on the level line that adds a
/// fixed fraction to the length of curved boundaries.
pub const PERIMETER_KERNEL_CELLS: f64 = 6.0;

/// Mollifies a binary indicator with the kernel `(1 - (d / 2h)^2)^2`,
/// normalized to unit mass on the lattice.
pub fn mollify(grid: &Grid, set: &[bool]) -> Vec<f64> {
    let v: Vec<f64> = set.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    mollify_values(grid, &v, 2.0)
}

/// Mollifies a fractional indicator with the kernel `(1 - (d / r h)^2)^2`.
pub fn mollify_values(grid: &Grid, v: &[f64], radius_cells: f64) -> Vec<f64> {
    let r = radius_cells.ceil() as i64;
    let mut stencil = Vec::new();
    let mut mass = 0.0;
    for dj in -r..=r {
        for di in -r..=r {
            let r2 = (di * di + dj * dj) as f64 / (radius_cells * radius_cells);
            if r2 < 1.0 {
                let w = (1.0 - r2) * (1.0 - r2);
                stencil.push((di, dj, w));
                mass += w;
            }
        }
    }
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let mut out = vec![0.0; grid.len()];
    // scatter from the support
    for (k, &x) in v.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let (i, j) = ((k % grid.nx) as i64, (k / grid.nx) as i64);
        for &(di, dj, w) in &stencil {
            let (a, b) = (i + di, j + dj);
            if a >= 0 && b >= 0 && a < nx && b < ny {
                out[(b * nx + a) as usize] += w * x;
            }
        }
    }
    out.iter_mut().for_each(|o| *o /= mass);
    out
}

/// Lattice edge between neighbouring cell centres: horizontal edges join
/// `(i, j)`-`(i+1, j)`, vertical edges join `(i, j)`-`(i, j+1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct Edge(u64);

impl Edge {
    fn horizontal(grid: &Grid, i: usize, j: usize) -> Edge {
        Edge(2 * grid.idx(i, j) as u64)
    }
    fn vertical(grid: &Grid, i: usize, j: usize) -> Edge {
        Edge(2 * grid.idx(i, j) as u64 + 1)
    }
}

/// Level-crossing point on a lattice edge, always interpolated from the
/// lower-index endpoint so both adjacent squares produce the same point.
fn crossing(grid: &Grid, v: &[f64], e: Edge) -> Point {
    let k = (e.0 / 2) as usize;
    let n = if e.0 % 2 == 0 { k + 1 } else { k + grid.nx };
    let (a, b) = (v[k], v[n]);
    let t = ((a - LEVEL) / (a - b)).clamp(0.0, 1.0);
    let pa = grid.center_of(k);
    let pb = grid.center_of(n);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

/// Marching squares on the `0.5` level of `v`, with saddles resolved by the
/// square average. Returns oriented loops with `v > 0.5` on the left.
pub fn level_loops(grid: &Grid, v: &[f64]) -> BoundaryCurve {
    let (nx, ny) = (grid.nx, grid.ny);
    // oriented segments as (from edge, to edge)
    let mut segs: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let c = [
                grid.idx(i, j),
                grid.idx(i + 1, j),
                grid.idx(i + 1, j + 1),
                grid.idx(i, j + 1),
            ];
            let b: [bool; 4] = [
                v[c[0]] > LEVEL,
                v[c[1]] > LEVEL,
                v[c[2]] > LEVEL,
                v[c[3]] > LEVEL,
            ];
            let code = b.iter().enumerate().fold(0u8, |acc, (n, &x)| acc | ((x as u8) << n));
            if code == 0 || code == 15 {
                continue;
            }
            // side s joins corner s and corner s+1
            let side_edge = [
                Edge::horizontal(grid, i, j),
                Edge::vertical(grid, i + 1, j),
                Edge::horizontal(grid, i, j + 1),
                Edge::vertical(grid, i, j),
            ];
            // Walking around the square counter-clockwise, a side where the
            // state goes inside -> outside is where a contour leaves the
            // inside region; pair each such exit with the preceding entry.
            let entering: Vec<usize> = (0..4).filter(|&s| !b[s] && b[(s + 1) % 4]).collect();
            let leaving: Vec<usize> = (0..4).filter(|&s| b[s] && !b[(s + 1) % 4]).collect();
            if entering.len() == 1 {
                // inside on the left: travel from the side where the ccw walk
                // leaves the inside to the side where it re-enters
                segs.push((side_edge[leaving[0]], side_edge[entering[0]]));
            } else {
                let avg = c.iter().map(|&k| v[k]).sum::<f64>() / 4.0;
                let centre_inside = avg > LEVEL;
                for &e_in in &entering {
                    // pair the entering side with a leaving side
                    let partner = if centre_inside {
                        // inside corners are connected: cut off the outside
                        // corner that precedes the entering side
                        *leaving
                            .iter()
                            .find(|&&l| (l + 1) % 4 == e_in)
                            .expect("saddle structure")
                    } else {
                        *leaving
                            .iter()
                            .find(|&&l| (e_in + 1) % 4 == l)
                            .expect("saddle structure")
                    };
                    segs.push((side_edge[partner], side_edge[e_in]));
                }
            }
        }
    }
    chain(grid, v, &segs)
}

fn chain(grid: &Grid, v: &[f64], segs: &[(Edge, Edge)]) -> BoundaryCurve {
    let mut by_start: HashMap<Edge, usize> = HashMap::with_capacity(segs.len());
    for (n, s) in segs.iter().enumerate() {
        by_start.insert(s.0, n);
    }
    let mut used = vec![false; segs.len()];
    let mut loops = Vec::new();
    for first in 0..segs.len() {
        if used[first] {
            continue;
        }
        let mut pts = Vec::new();
        let mut cur = first;
        loop {
            used[cur] = true;
            pts.push(crossing(grid, v, segs[cur].0));
            match by_start.get(&segs[cur].1) {
                Some(&next) if !used[next] => cur = next,
                _ => break,
            }
        }
        // drop repeated points from degenerate crossings
        pts.dedup_by(|a, b| dist(*a, *b) < 1e-14);
        if pts.len() > 1 && dist(pts[0], pts[pts.len() - 1]) < 1e-14 {
            pts.pop();
        }
        if pts.len() >= 3 {
            loops.push(pts);
        }
    }
    BoundaryCurve { loops }
}

/// Boundary polyline of a binary set (mollify, then trace the 0.5 level).
pub fn boundary_curve(grid: &Grid, set: &[bool]) -> BoundaryCurve {
    level_loops(grid, &mollify(grid, set))
}

/// Perimeter of a binary set as the length of the half level line of its
/// mollification, optionally restricted to a rectangle.
pub fn binary_perimeter(grid: &Grid, set: &[bool], region: Option<&Rect>) -> f64 {
    let v: Vec<f64> = set.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let curve = level_loops(grid, &mollify_values(grid, &v, PERIMETER_KERNEL_CELLS));
    match region {
        Some(r) => curve.length_in(r),
        None => curve.length(),
    }
}

/// Contour perimeter of a set after 2x2 block averaging onto a grid of
/// spacing `2h`.
pub fn coarsened_perimeter(grid: &Grid, set: &[bool]) -> f64 {
    let (cx, cy) = (grid.nx / 2, grid.ny / 2);
    let coarse = Grid {
        nx: cx,
        ny: cy,
        h: 2.0 * grid.h,
        origin: grid.origin,
    };
    let mut frac = vec![0.0; cx * cy];
    for j in 0..2 * cy {
        for i in 0..2 * cx {
            if set[grid.idx(i, j)] {
                frac[(j / 2) * cx + i / 2] += 0.25;
            }
        }
    }
    level_loops(&coarse, &mollify_values(&coarse, &frac, PERIMETER_KERNEL_CELLS)).length()
}

/// Isotropic forward-difference total variation `h^2 sum |grad+ u|`,
/// optionally counting only cells whose centre lies in `region`.
pub fn total_variation(grid: &Grid, u: &[f64], region: Option<&Rect>) -> f64 {
    let (nx, ny) = (grid.nx, grid.ny);
    let mut s = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if let Some(r) = region {
                if !r.contains(grid.center(i, j)) {
                    continue;
                }
            }
            let gx = if i + 1 < nx { u[k + 1] - u[k] } else { 0.0 };
            let gy = if j + 1 < ny { u[k + nx] - u[k] } else { 0.0 };
            s += gx.hypot(gy);
        }
    }
    s * grid.h
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn disk_set(grid: &Grid, c: Point, r: f64) -> Vec<bool> {
        (0..grid.len()).map(|k| dist(grid.center_of(k), c) < r).collect()
    }

    fn signed_area(l: &[Point]) -> f64 {
        (0..l.len())
            .map(|s| {
                let (a, b) = (l[s], l[(s + 1) % l.len()]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            / 2.0
    }

    #[test]
    fn disk_contour_length_within_one_percent() {
        let g = Grid::covering([-0.5, -0.5], [0.5, 0.5], 1.0 / 256.0, 0).unwrap();
        let set = disk_set(&g, [0.0, 0.0], 0.4);
        let p = binary_perimeter(&g, &set, None);
        assert!((p - 2.0 * PI * 0.4).abs() / (2.0 * PI * 0.4) < 0.01, "{p}");
    }

    #[test]
    fn orientation_outer_ccw_holes_cw() {
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 64.0, 3).unwrap();
        let set: Vec<bool> = (0..g.len())
            .map(|k| {
                let p = g.center_of(k);
                let r = dist(p, [0.0, 0.0]);
                r < 0.9 && r > 0.3
            })
            .collect();
        let c = boundary_curve(&g, &set);
        assert_eq!(c.loops.len(), 2);
        let mut areas: Vec<f64> = c.loops.iter().map(|l| signed_area(l)).collect();
        areas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(areas[0] < 0.0 && (areas[0] + PI * 0.09).abs() < 0.02);
        assert!(areas[1] > 0.0 && (areas[1] - PI * 0.81).abs() < 0.02);
    }

    #[test]
    fn aligned_square_contour_sits_on_cell_edges() {
        let g = Grid::covering([0.0, 0.0], [1.0, 1.0], 1.0 / 128.0, 4).unwrap();
        let set: Vec<bool> = (0..g.len())
            .map(|k| {
                let p = g.center_of(k);
                p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0
            })
            .collect();
        let c = boundary_curve(&g, &set);
        assert_eq!(c.loops.len(), 1);
        // flat sides are exact; corners are rounded by the mollifier
        let p = c.length();
        assert!((p - 4.0).abs() / 4.0 < 0.01, "{p}");
        let on_bottom = c.loops[0]
            .iter()
            .filter(|q| q[0] > 0.2 && q[0] < 0.8 && q[1] < 0.5)
            .all(|q| q[1].abs() < 1e-12);
        assert!(on_bottom);
    }

    #[test]
    fn empty_set_has_zero_perimeter() {
        let g = Grid::new(16, 16, 0.1, [0.0, 0.0]).unwrap();
        assert_eq!(binary_perimeter(&g, &vec![false; g.len()], None), 0.0);
        assert_eq!(total_variation(&g, &vec![0.0; g.len()], None), 0.0);
    }

    #[test]
    fn clipped_length_of_partial_segment() {
        let r = Rect { lo: [0.0, 0.0], hi: [1.0, 1.0] };
        assert!((r.clipped_length([-1.0, 0.5], [0.5, 0.5]) - 0.5).abs() < 1e-14);
        assert_eq!(r.clipped_length([-1.0, 2.0], [2.0, 2.0]), 0.0);
    }

    #[test]
    fn region_restricted_perimeter_of_square_side() {
        let g = Grid::covering([0.0, 0.0], [1.0, 1.0], 1.0 / 32.0, 4).unwrap();
        let set: Vec<bool> = (0..g.len())
            .map(|k| {
                let p = g.center_of(k);
                p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0
            })
            .collect();
        let r = Rect { lo: [0.25, -0.2], hi: [0.75, 0.2] };
        assert!((binary_perimeter(&g, &set, Some(&r)) - 0.5).abs() < 1e-12);
    }
}
