//! Grids, domains, distance fields, perimeters and interior approximations.

pub mod approx;
pub mod contour;
pub mod distance;
pub mod domain;
pub mod mask;
pub mod superreduced;

pub use approx::{
    build_ladder, geometric_schedule, inner_minkowski_content, interior_approximation,
    ApproxLadder, LadderLevel, MinkowskiEstimate,
};
pub use contour::{binary_perimeter, boundary_curve, total_variation, BoundaryCurve, Rect};
pub use distance::{boundary_normals, signed_distance, signed_distance_set, DistanceField};
pub use domain::{swiss_cheese, swiss_cheese_holes, AnalyticDomain, CheeseHole, Hole};
pub use mask::{rasterize, DomainMask};
pub use superreduced::{super_reduced_test, SuperReduced, SuperReducedReport};

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// A `[0, 1]`-valued field supported in a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct RelaxedIndicator {
    field: ScalarField,
}

impl RelaxedIndicator {
    /// Validates the range and that the support lies in `mask`.
    pub fn new(mask: &DomainMask, values: Vec<f64>) -> Result<Self> {
        let grid = *mask.grid();
        let field = ScalarField::from_values(grid, values)?;
        for (k, &v) in field.values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("relaxed value {v} outside [0, 1]")));
            }
            if v != 0.0 && !mask.contains(k) {
                return Err(Error::InvalidParameter("relaxed support leaves the domain".into()));
            }
        }
        Ok(RelaxedIndicator { field })
    }

    pub fn grid(&self) -> &Grid {
        &self.field.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.field.values
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    /// Superlevel set `{u > level}`; ties go to the exterior.
    pub fn threshold(&self, level: f64) -> Vec<bool> {
        self.field.values.iter().map(|&v| v > level).collect()
    }
}

/// Either kind of indicator accepted by [`area`] and [`perimeter`].
#[derive(Clone, Copy, Debug)]
pub enum Indicator<'a> {
    Binary(&'a DomainMask),
    Relaxed(&'a RelaxedIndicator),
}

impl<'a> From<&'a DomainMask> for Indicator<'a> {
    fn from(m: &'a DomainMask) -> Self {
        Indicator::Binary(m)
    }
}

impl<'a> From<&'a RelaxedIndicator> for Indicator<'a> {
    fn from(r: &'a RelaxedIndicator) -> Self {
        Indicator::Relaxed(r)
    }
}

pub fn area<'a>(ind: impl Into<Indicator<'a>>) -> f64 {
    match ind.into() {
        Indicator::Binary(m) => m.area(),
        Indicator::Relaxed(r) => r.values().iter().sum::<f64>() * r.grid().cell_area(),
    }
}

/// Contour length for binary masks, isotropic total variation for relaxed
/// indicators; `region` restricts either to a rectangle.
pub fn perimeter<'a>(ind: impl Into<Indicator<'a>>, region: Option<&Rect>) -> f64 {
    match ind.into() {
        Indicator::Binary(m) => binary_perimeter(m.grid(), m.inside(), region),
        Indicator::Relaxed(r) => total_variation(r.grid(), r.values(), region),
    }
}
