use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hole {
    pub center: Point,
    pub radius: f64,
}

/// Planar domains with closed-form area and perimeter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalyticDomain {
    Disk { center: Point, radius: f64 },
    /// Open axis-aligned square `corner + (0, side)^2`.
    Box { corner: Point, side: f64 },
    /// Disk of the given radius centred at the origin, minus closed balls.
    DiskMinusBalls { radius: f64, holes: Vec<Hole> },
}

impl AnalyticDomain {
    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("disk radius {radius}")));
        }
        Ok(AnalyticDomain::Disk { center, radius })
    }

    pub fn unit_disk() -> Self {
        AnalyticDomain::Disk {
            center: [0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn square(corner: Point, side: f64) -> Result<Self> {
        if !(side > 0.0) {
            return Err(Error::InvalidParameter(format!("box side {side}")));
        }
        Ok(AnalyticDomain::Box { corner, side })
    }

    /// Validates that holes are pairwise disjoint and strictly inside.
    pub fn disk_minus_balls(radius: f64, holes: Vec<Hole>) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("disk radius {radius}")));
        }
        for (a, ha) in holes.iter().enumerate() {
            if !(ha.radius > 0.0) {
                return Err(Error::InvalidParameter(format!("hole {a} has radius {}", ha.radius)));
            }
            if dist(ha.center, [0.0, 0.0]) + ha.radius >= radius {
                return Err(Error::InvalidParameter(format!(
                    "hole {a} is not strictly inside the outer disk"
                )));
            }
            for (b, hb) in holes.iter().enumerate().skip(a + 1) {
                if dist(ha.center, hb.center) <= ha.radius + hb.radius {
                    return Err(Error::InvalidParameter(format!("holes {a} and {b} overlap")));
                }
            }
        }
        Ok(AnalyticDomain::DiskMinusBalls { radius, holes })
    }

    pub fn contains(&self, p: Point) -> bool {
        match self {
            AnalyticDomain::Disk { center, radius } => dist(p, *center) < *radius,
            AnalyticDomain::Box { corner, side } => {
                p[0] > corner[0]
                    && p[0] < corner[0] + side
                    && p[1] > corner[1]
                    && p[1] < corner[1] + side
            }
            AnalyticDomain::DiskMinusBalls { radius, holes } => {
                dist(p, [0.0, 0.0]) < *radius
                    && holes.iter().all(|hole| dist(p, hole.center) > hole.radius)
            }
        }
    }

    /// Axis-aligned bounding box `(lo, hi)`.
    pub fn bounds(&self) -> (Point, Point) {
        match self {
            AnalyticDomain::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            AnalyticDomain::Box { corner, side } => {
                (*corner, [corner[0] + side, corner[1] + side])
            }
            AnalyticDomain::DiskMinusBalls { radius, .. } => {
                ([-radius, -radius], [*radius, *radius])
            }
        }
    }

    pub fn exact_area(&self) -> f64 {
        match self {
            AnalyticDomain::Disk { radius, .. } => PI * radius * radius,
            AnalyticDomain::Box { side, .. } => side * side,
            AnalyticDomain::DiskMinusBalls { radius, holes } => {
                PI * radius * radius - holes.iter().map(|h| PI * h.radius * h.radius).sum::<f64>()
            }
        }
    }

    pub fn exact_perimeter(&self) -> f64 {
        match self {
            AnalyticDomain::Disk { radius, .. } => 2.0 * PI * radius,
            AnalyticDomain::Box { side, .. } => 4.0 * side,
            AnalyticDomain::DiskMinusBalls { radius, holes } => {
                2.0 * PI * radius + holes.iter().map(|h| 2.0 * PI * h.radius).sum::<f64>()
            }
        }
    }

    pub fn holes(&self) -> &[Hole] {
        match self {
            AnalyticDomain::DiskMinusBalls { holes, .. } => holes,
            _ => &[],
        }
    }

    /// Same domain with hole `index` filled in.
    pub fn fill_hole(&self, index: usize) -> Result<Self> {
        match self {
            AnalyticDomain::DiskMinusBalls { radius, holes } if index < holes.len() => {
                let mut holes = holes.clone();
                holes.remove(index);
                Ok(AnalyticDomain::DiskMinusBalls {
                    radius: *radius,
                    holes,
                })
            }
            _ => Err(Error::InvalidParameter(format!("no hole with index {index}"))),
        }
    }
}

/// Index, polar placement and radius of one Swiss-cheese hole.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheeseHole {
    pub i: u32,
    pub j: u32,
    pub rho: f64,
    pub theta: f64,
    pub radius: f64,
}

impl CheeseHole {
    pub fn center(&self) -> Point {
        [self.rho * self.theta.cos(), self.rho * self.theta.sin()]
    }
}

/// Holes of the porous unit disk for `1 <= j <= i <= i_max`:
/// `rho = 1 - eps / a^(i^2 + j)`, `r = delta / a^(2 i^2 + 2 j)`,
/// `theta = (pi / 2) j / (i + 1)`.
pub fn swiss_cheese_holes(a: f64, delta: f64, eps: f64, i_max: u32) -> Result<Vec<CheeseHole>> {
    if !(a > 1.0) {
        return Err(Error::InvalidParameter(format!("need a > 1, got {a}")));
    }
    if !(delta > 0.0 && delta < eps && eps < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < delta < eps < 1, got delta = {delta}, eps = {eps}"
        )));
    }
    let mut out = Vec::new();
    for i in 1..=i_max {
        for j in 1..=i {
            let e = (i * i + j) as f64;
            out.push(CheeseHole {
                i,
                j,
                rho: 1.0 - eps / a.powf(e),
                theta: PI / 2.0 * j as f64 / (i + 1) as f64,
                radius: delta / a.powf(2.0 * e),
            });
        }
    }
    Ok(out)
}

/// The Swiss-cheese domain: unit disk minus the closed holes above.
/// `i_max = 0` gives the unit disk.
pub fn swiss_cheese(a: f64, delta: f64, eps: f64, i_max: u32) -> Result<AnalyticDomain> {
    let holes = swiss_cheese_holes(a, delta, eps, i_max)?
        .iter()
        .map(|c| Hole {
            center: c.center(),
            radius: c.radius,
        })
        .collect();
    AnalyticDomain::disk_minus_balls(1.0, holes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_hole_matches_direct_substitution() {
        // rho = 1 - 0.1 / 2^2, r = 0.01 / 2^4, theta = (pi/2)(1/2)
        let holes = swiss_cheese_holes(2.0, 0.01, 0.1, 1).unwrap();
        assert_eq!(holes.len(), 1);
        assert!((holes[0].rho - 0.975).abs() < 1e-15);
        assert!((holes[0].radius - 0.000625).abs() < 1e-15);
        assert!((holes[0].theta - PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn no_holes_is_the_unit_disk() {
        let d = swiss_cheese(2.0, 0.01, 0.1, 0).unwrap();
        assert_eq!(d.holes().len(), 0);
        assert_eq!(d.exact_area(), PI);
        assert_eq!(d.exact_perimeter(), 2.0 * PI);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(swiss_cheese(2.0, 0.1, 0.1, 2).is_err());
        assert!(swiss_cheese(2.0, 0.2, 0.1, 2).is_err());
        assert!(swiss_cheese(1.0, 0.01, 0.1, 2).is_err());
        assert!(swiss_cheese(2.0, 0.01, 1.0, 2).is_err());
    }

    #[test]
    fn hole_count_is_triangular() {
        for i_max in 0..6u32 {
            let holes = swiss_cheese_holes(2.0, 0.01, 0.1, i_max).unwrap();
            assert_eq!(holes.len() as u32, i_max * (i_max + 1) / 2);
        }
    }

    #[test]
    fn exact_perimeter_and_area_match_independent_sums() {
        let d = swiss_cheese(1.5, 0.05, 0.2, 3).unwrap();
        let mut per = 2.0 * PI;
        let mut area = PI;
        for i in 1..=3u32 {
            for j in 1..=i {
                let r = 0.05 / 1.5f64.powi(2 * (i * i + j) as i32);
                per += 2.0 * PI * r;
                area -= PI * r * r;
            }
        }
        assert!((d.exact_perimeter() - per).abs() < 1e-14);
        assert!((d.exact_area() - area).abs() < 1e-14);
    }

    #[test]
    fn overlapping_holes_are_rejected() {
        let holes = vec![
            Hole { center: [0.0, 0.0], radius: 0.2 },
            Hole { center: [0.3, 0.0], radius: 0.2 },
        ];
        assert!(AnalyticDomain::disk_minus_balls(1.0, holes).is_err());
    }
}
