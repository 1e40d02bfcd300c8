//! Signed distance to the boundary polyline.
//!
//! Magnitudes are Euclidean distances from cell centres to the
//! marching-squares polyline of the set; the sign is negative where the
//! mollified indicator exceeds one half, which is exactly the side of the
//! polyline the centre lies on. A squared distance transform to the lattice
//! cells that carry polyline segments selects a site, and the exact distance
//! is then taken over the segments in a small window around that site.

use crate::geometry::contour::{level_loops, mollify, BoundaryCurve};
use crate::geometry::mask::DomainMask;
use crate::grid::{dist, Grid, Point, ScalarField};
use crate::stencil::central_gradient;

/// Nearest polyline point of a cell centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub loop_id: u32,
    pub segment: u32,
    /// Arc length from the start of the loop.
    pub s: f64,
    pub point: Point,
}

#[derive(Clone, Debug)]
pub struct DistanceField {
    pub curve: BoundaryCurve,
    /// Signed distance, negative inside.
    pub signed: ScalarField,
    pub nearest: Vec<Option<Nearest>>,
    /// Cumulative arc length at each vertex, one table per loop.
    pub arclength: Vec<Vec<f64>>,
}

impl DistanceField {
    pub fn grid(&self) -> &Grid {
        &self.signed.grid
    }

    pub fn loop_length(&self, l: usize) -> f64 {
        *self.arclength[l].last().unwrap()
    }

    /// Unit gradient of the distance field by central differences.
    pub fn gradient(&self) -> Vec<[f64; 2]> {
        let g = self.grid();
        let v: Vec<f64> = self
            .signed
            .values
            .iter()
            .map(|&d| if d.is_finite() { d } else { 0.0 })
            .collect();
        central_gradient(g, &v)
    }

    /// Outward unit normal at `p`: the distance gradient averaged with a
    /// Gaussian of width `NORMAL_SMOOTHING * h`, which removes the staircase
    /// ripple of the raster interface.
    pub fn normal_at(&self, grad: &[[f64; 2]], p: Point) -> [f64; 2] {
        let g = self.grid();
        let sigma = NORMAL_SMOOTHING * g.h;
        let reach = (3.0 * NORMAL_SMOOTHING).ceil() as i64;
        let ci = ((p[0] - g.origin[0]) / g.h).floor() as i64;
        let cj = ((p[1] - g.origin[1]) / g.h).floor() as i64;
        let mut s = [0.0, 0.0];
        for j in (cj - reach).max(0)..=(cj + reach).min(g.ny as i64 - 1) {
            for i in (ci - reach).max(0)..=(ci + reach).min(g.nx as i64 - 1) {
                let k = g.idx(i as usize, j as usize);
                let r = dist(g.center_of(k), p) / sigma;
                let w = (-0.5 * r * r).exp();
                s[0] += w * grad[k][0];
                s[1] += w * grad[k][1];
            }
        }
        let n = s[0].hypot(s[1]);
        if n > 0.0 {
            [s[0] / n, s[1] / n]
        } else {
            [0.0, 0.0]
        }
    }
}

/// Width of the normal-averaging Gaussian in cells.
pub const NORMAL_SMOOTHING: f64 = 4.0;

const FAR: f64 = f64::INFINITY;

/// One-dimensional squared distance transform (lower envelope of parabolas)
/// with the index of the minimizing sample.
fn edt_1d(f: &[f64], out: &mut [f64], arg: &mut [usize], v: &mut Vec<usize>, z: &mut Vec<f64>) {
    let n = f.len();
    v.clear();
    z.clear();
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            match v.last() {
                None => {
                    v.push(q);
                    z.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&p) => {
                    let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64))
                        / (2.0 * q as f64 - 2.0 * p as f64);
                    if s <= *z.last().unwrap() {
                        v.pop();
                        z.pop();
                    } else {
                        v.push(q);
                        z.push(s);
                        break;
                    }
                }
            }
        }
    }
    if v.is_empty() {
        out.iter_mut().for_each(|o| *o = FAR);
        arg.iter_mut().for_each(|a| *a = usize::MAX);
        return;
    }
    let mut k = 0;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
        arg[q] = p;
    }
}

/// Nearest site (cell index) of every cell under the Euclidean metric.
fn nearest_sites(grid: &Grid, site: &[bool]) -> Vec<usize> {
    let (nx, ny) = (grid.nx, grid.ny);
    let (mut v, mut z) = (Vec::new(), Vec::new());
    // columns
    let mut col_d = vec![FAR; grid.len()];
    let mut col_arg = vec![usize::MAX; grid.len()];
    let mut f = vec![0.0; ny];
    let mut o = vec![0.0; ny];
    let mut a = vec![0; ny];
    for i in 0..nx {
        for j in 0..ny {
            f[j] = if site[j * nx + i] { 0.0 } else { FAR };
        }
        edt_1d(&f, &mut o, &mut a, &mut v, &mut z);
        for j in 0..ny {
            col_d[j * nx + i] = o[j];
            col_arg[j * nx + i] = a[j];
        }
    }
    // rows
    let mut out = vec![usize::MAX; grid.len()];
    let mut o = vec![0.0; nx];
    let mut a = vec![0; nx];
    for j in 0..ny {
        let row = &col_d[j * nx..(j + 1) * nx];
        edt_1d(row, &mut o, &mut a, &mut v, &mut z);
        for i in 0..nx {
            if a[i] != usize::MAX {
                let p = a[i];
                let sj = col_arg[j * nx + p];
                out[j * nx + i] = sj * nx + p;
            }
        }
    }
    out
}

fn point_segment(p: Point, a: Point, b: Point) -> (f64, f64) {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (dist(p, [a[0] + t * d[0], a[1] + t * d[1]]), t)
}

/// Signed distance of a binary set to its boundary polyline.
pub fn signed_distance_set(grid: &Grid, set: &[bool]) -> DistanceField {
    let smooth = mollify(grid, set);
    let curve = level_loops(grid, &smooth);
    let arclength: Vec<Vec<f64>> = curve
        .loops
        .iter()
        .map(|l| {
            let mut acc = vec![0.0];
            for s in 0..l.len() {
                let next = acc[s] + dist(l[s], l[(s + 1) % l.len()]);
                acc.push(next);
            }
            acc
        })
        .collect();

    // bucket segments by lattice square (lower-left centre index)
    let (nx, ny) = (grid.nx, grid.ny);
    let mut seg_square = Vec::new();
    for (li, l) in curve.loops.iter().enumerate() {
        for s in 0..l.len() {
            let (a, b) = (l[s], l[(s + 1) % l.len()]);
            let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let fi = ((m[0] - grid.origin[0]) / grid.h - 0.5).floor().clamp(0.0, (nx - 2) as f64);
            let fj = ((m[1] - grid.origin[1]) / grid.h - 0.5).floor().clamp(0.0, (ny - 2) as f64);
            seg_square.push((grid.idx(fi as usize, fj as usize), li as u32, s as u32));
        }
    }
    let mut start = vec![0usize; grid.len() + 1];
    for &(q, _, _) in &seg_square {
        start[q + 1] += 1;
    }
    for k in 0..grid.len() {
        start[k + 1] += start[k];
    }
    let mut fill = start.clone();
    let mut bucket = vec![(0u32, 0u32); seg_square.len()];
    for &(q, l, s) in &seg_square {
        bucket[fill[q]] = (l, s);
        fill[q] += 1;
    }

    let mut site = vec![false; grid.len()];
    for &(q, _, _) in &seg_square {
        site[q] = true;
        site[q + 1] = true;
        site[q + nx] = true;
        site[q + nx + 1] = true;
    }
    let sites = nearest_sites(grid, &site);

    let mut values = vec![0.0; grid.len()];
    let mut nearest = vec![None; grid.len()];
    for k in 0..grid.len() {
        let sign = if smooth[k] > 0.5 { -1.0 } else { 1.0 };
        if sites[k] == usize::MAX {
            values[k] = sign * FAR;
            continue;
        }
        let p = grid.center_of(k);
        let (si, sj) = grid.ij(sites[k]);
        let mut best = (FAR, None);
        for qj in sj.saturating_sub(3)..(sj + 3).min(ny - 1) {
            for qi in si.saturating_sub(3)..(si + 3).min(nx - 1) {
                let q = grid.idx(qi, qj);
                for &(l, s) in &bucket[start[q]..start[q + 1]] {
                    let lp = &curve.loops[l as usize];
                    let (a, b) = (lp[s as usize], lp[(s as usize + 1) % lp.len()]);
                    let (d, t) = point_segment(p, a, b);
                    if d < best.0 {
                        let len = dist(a, b);
                        best = (
                            d,
                            Some(Nearest {
                                loop_id: l,
                                segment: s,
                                s: arclength[l as usize][s as usize] + t * len,
                                point: [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
                            }),
                        );
                    }
                }
            }
        }
        values[k] = sign * best.0;
        nearest[k] = best.1;
    }
    DistanceField {
        curve,
        signed: ScalarField {
            grid: *grid,
            values,
            extended: true,
        },
        nearest,
        arclength,
    }
}

pub fn signed_distance(mask: &DomainMask) -> DistanceField {
    signed_distance_set(mask.grid(), mask.inside())
}

/// Polyline vertices with outward unit normals from the distance gradient.
pub fn boundary_normals(mask: &DomainMask) -> Vec<(Point, [f64; 2])> {
    let df = signed_distance(mask);
    let grad = df.gradient();
    df.curve
        .loops
        .iter()
        .flatten()
        .map(|&p| (p, df.normal_at(&grad, p)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;

    fn disk() -> (Grid, DomainMask) {
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 64.0, 4).unwrap();
        let m = rasterize(&AnalyticDomain::unit_disk(), &g).unwrap();
        (g, m)
    }

    #[test]
    fn edt_matches_brute_force() {
        let g = Grid::new(23, 17, 1.0, [0.0, 0.0]).unwrap();
        let site: Vec<bool> = (0..g.len()).map(|k| (k * 7919) % 41 == 3).collect();
        let near = nearest_sites(&g, &site);
        for k in 0..g.len() {
            let (i, j) = g.ij(k);
            let brute = (0..g.len())
                .filter(|&s| site[s])
                .map(|s| {
                    let (a, b) = g.ij(s);
                    (a as f64 - i as f64).powi(2) + (b as f64 - j as f64).powi(2)
                })
                .fold(f64::INFINITY, f64::min);
            let (a, b) = g.ij(near[k]);
            let got = (a as f64 - i as f64).powi(2) + (b as f64 - j as f64).powi(2);
            assert_eq!(got, brute);
        }
    }

    #[test]
    fn disk_distance_signs_and_centre_value() {
        let (g, m) = disk();
        let df = signed_distance(&m);
        let c = g.cell_of([1e-9, 1e-9]).unwrap();
        let dc = df.signed.values[g.idx(c.0, c.1)];
        assert!((dc + 1.0).abs() < g.h + 0.01, "{dc}");
        assert!(df.signed.values[0] > 0.0);
        for k in m.cells() {
            let (i, j) = g.ij(k);
            if !m.contains(k - 1) || !m.contains(k + 1) || !m.contains(k - g.nx) || !m.contains(k + g.nx) {
                let d = df.signed.values[k];
                assert!(d < 0.0 && d > -g.h, "cell ({i},{j}) d = {d}");
            }
        }
    }

    #[test]
    fn distance_matches_radial_oracle() {
        let (g, m) = disk();
        let df = signed_distance(&m);
        for k in 0..g.len() {
            let p = g.center_of(k);
            let r = dist(p, [0.0, 0.0]);
            assert!((df.signed.values[k] - (r - 1.0)).abs() < 1.5 * g.h);
        }
    }

    #[test]
    fn normals_are_radial_and_unit() {
        let (_, m) = disk();
        let nrm = boundary_normals(&m);
        assert!(!nrm.is_empty());
        for (p, n) in nrm {
            assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-12);
            let r = p[0].hypot(p[1]);
            let cosang = (n[0] * p[0] + n[1] * p[1]) / r;
            assert!(cosang.clamp(-1.0, 1.0).acos() < 0.05);
        }
    }

    #[test]
    fn nearest_arclength_is_within_loop() {
        let (_, m) = disk();
        let df = signed_distance(&m);
        let total = df.loop_length(0);
        for n in df.nearest.iter().flatten() {
            assert!(n.s >= 0.0 && n.s <= total + 1e-12);
        }
    }
}
