//! Clean-cone test for points of the super-reduced boundary.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::distance::signed_distance;
use crate::geometry::mask::DomainMask;
use crate::grid::{dist, dot, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuperReduced {
    SuperReduced,
    NotSuperReduced,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleCheck {
    pub r: f64,
    /// Largest `-d_H(y) / |y|` over boundary samples in the half-space.
    pub worst_ratio: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperReducedReport {
    pub verdict: SuperReduced,
    pub base_point: Point,
    pub normal: [f64; 2],
    pub scales: Vec<ScaleCheck>,
}

/// Tests `-d_H(y) <= eps |y|` for boundary points `y` of the blow-up
/// `(Omega - z) / r` inside the tangent half-space and the unit ball.
/// Samples within `2h` of `z` are ignored and depths are reduced by `h`.
pub fn super_reduced_test(
    mask: &DomainMask,
    z: Point,
    scales: &[f64],
    eps: f64,
) -> Result<SuperReducedReport> {
    let h = mask.grid().h;
    if scales.is_empty() || scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("scales must be strictly decreasing".into()));
    }
    let df = signed_distance(mask);
    let mut base = None;
    let mut best = f64::INFINITY;
    for (a, b) in df.curve.segments() {
        let d = [b[0] - a[0], b[1] - a[1]];
        let l2 = dot(d, d);
        let t = if l2 > 0.0 {
            (dot([z[0] - a[0], z[1] - a[1]], d) / l2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [a[0] + t * d[0], a[1] + t * d[1]];
        let e = dist(q, z);
        if e < best {
            best = e;
            base = Some(q);
        }
    }
    let base = match base {
        Some(q) if best <= h => q,
        _ => return Err(Error::PointNotOnBoundary { x: z[0], y: z[1] }),
    };
    let grad = df.gradient();
    let nu = df.normal_at(&grad, base);

    let mut samples = Vec::new();
    for (a, b) in df.curve.segments() {
        samples.push(a);
        samples.push([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]);
    }

    let mut checks = Vec::with_capacity(scales.len());
    for &r in scales {
        let mut worst: f64 = 0.0;
        for &p in &samples {
            let phys = dist(p, base);
            if phys > r || phys < 2.0 * h {
                continue;
            }
            // one cell of slack absorbs the raster ripple of the polyline
            let depth = -dot([p[0] - base[0], p[1] - base[1]], nu) - h;
            if depth > 0.0 {
                worst = worst.max(depth / phys);
            }
        }
        checks.push(ScaleCheck {
            r,
            worst_ratio: worst,
            violated: worst > eps,
        });
    }

    let n = checks.len();
    let verdict = if scales.iter().any(|&r| r < 4.0 * h) {
        SuperReduced::Inconclusive
    } else if n >= 2 && checks[n - 1].violated && checks[n - 2].violated {
        SuperReduced::NotSuperReduced
    } else if checks.iter().all(|c| !c.violated) {
        SuperReduced::SuperReduced
    } else {
        SuperReduced::Inconclusive
    };
    Ok(SuperReducedReport {
        verdict,
        base_point: base,
        normal: nu,
        scales: checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::{AnalyticDomain, Hole};
    use crate::geometry::mask::rasterize;
    use crate::grid::Grid;

    fn grid() -> Grid {
        Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 256.0, 4).unwrap()
    }

    #[test]
    fn disk_point_is_super_reduced() {
        let m = rasterize(&AnalyticDomain::unit_disk(), &grid()).unwrap();
        let z = [0.6, 0.8];
        let rep = super_reduced_test(&m, z, &[0.2, 0.1, 0.05], 0.15).unwrap();
        assert_eq!(rep.verdict, SuperReduced::SuperReduced, "{:?}", rep.scales);
    }

    #[test]
    fn radially_accumulating_holes_break_the_cone() {
        let holes = (1..=4)
            .map(|k| {
                let d = 0.4 / f64::powi(2.0, k);
                Hole { center: [1.0 - d, 0.0], radius: 0.3 * d }
            })
            .collect();
        let dom = AnalyticDomain::disk_minus_balls(1.0, holes).unwrap();
        let m = rasterize(&dom, &grid()).unwrap();
        let rep = super_reduced_test(&m, [1.0, 0.0], &[0.2, 0.1, 0.05], 0.15).unwrap();
        assert_eq!(rep.verdict, SuperReduced::NotSuperReduced, "{:?}", rep.scales);
    }

    #[test]
    fn sub_resolution_scale_is_inconclusive() {
        let g = grid();
        let m = rasterize(&AnalyticDomain::unit_disk(), &g).unwrap();
        let rep = super_reduced_test(&m, [0.0, 1.0], &[0.1, 2.0 * g.h], 0.15).unwrap();
        assert_eq!(rep.verdict, SuperReduced::Inconclusive);
    }

    #[test]
    fn far_point_is_rejected() {
        let m = rasterize(&AnalyticDomain::unit_disk(), &grid()).unwrap();
        assert!(matches!(
            super_reduced_test(&m, [0.0, 0.0], &[0.1], 0.1),
            Err(Error::PointNotOnBoundary { .. })
        ));
    }
}
