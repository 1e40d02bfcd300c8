//! Interior approximations `{d < -t}` and inner Minkowski content.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::contour::binary_perimeter;
use crate::geometry::distance::{signed_distance, DistanceField};
use crate::geometry::mask::{components, largest_component, DomainMask};

/// Largest 4-connected component of `{d < -t}`.
pub fn interior_approximation(mask: &DomainMask, t: f64) -> Result<DomainMask> {
    let df = signed_distance(mask);
    interior_approximation_with(mask, &df, t)
}

/// As [`interior_approximation`], reusing a precomputed distance field.
pub fn interior_approximation_with(mask: &DomainMask, df: &DistanceField, t: f64) -> Result<DomainMask> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("erosion depth must be positive, got {t}")));
    }
    let grid = *mask.grid();
    let set: Vec<bool> = (0..grid.len())
        .map(|k| mask.contains(k) && df.signed.values[k] < -t)
        .collect();
    let (largest, n) = largest_component(&grid, &set);
    if n == 0 {
        return Err(Error::ErosionEmpty { t });
    }
    let mut out = DomainMask::new(grid, largest)?;
    if n > 1 {
        out.push_warning(format!(
            "erosion at t = {t} has {n} components; kept the largest"
        ));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct LadderLevel {
    pub t: f64,
    pub mask: DomainMask,
    pub perimeter: f64,
    pub area: f64,
}

#[derive(Clone, Debug)]
pub struct ApproxLadder {
    /// Ordered by decreasing `t`.
    pub levels: Vec<LadderLevel>,
    pub domain_perimeter: f64,
    /// Linear extrapolation of the two finest perimeters to `t = 0`.
    pub limit_perimeter: f64,
    /// Whether the extrapolated perimeter is within 3% of `P(mask)`.
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct LadderSummary {
    pub t: Vec<f64>,
    pub perimeter: Vec<f64>,
    pub area: Vec<f64>,
    pub domain_perimeter: f64,
    pub limit_perimeter: f64,
    pub converged: bool,
}

impl ApproxLadder {
    pub fn summary(&self) -> LadderSummary {
        LadderSummary {
            t: self.levels.iter().map(|l| l.t).collect(),
            perimeter: self.levels.iter().map(|l| l.perimeter).collect(),
            area: self.levels.iter().map(|l| l.area).collect(),
            domain_perimeter: self.domain_perimeter,
            limit_perimeter: self.limit_perimeter,
            converged: self.converged,
        }
    }
}

/// Nested interior approximations for a strictly decreasing schedule. Each
/// level keeps the component of `{d < -t_j}` containing the previous level,
/// so the levels are nested; the first level keeps the largest component.
pub fn build_ladder(mask: &DomainMask, schedule: &[f64]) -> Result<ApproxLadder> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty erosion schedule".into()));
    }
    if schedule.windows(2).any(|w| !(w[1] < w[0])) || !(schedule[schedule.len() - 1] > 0.0) {
        return Err(Error::InvalidParameter(
            "erosion schedule must be positive and strictly decreasing".into(),
        ));
    }
    let grid = *mask.grid();
    let df = signed_distance(mask);
    let mut levels: Vec<LadderLevel> = Vec::with_capacity(schedule.len());
    for &t in schedule {
        let level_mask = match levels.last() {
            None => interior_approximation_with(mask, &df, t)?,
            Some(prev) => {
                let set: Vec<bool> = (0..grid.len())
                    .map(|k| mask.contains(k) && df.signed.values[k] < -t)
                    .collect();
                let (labels, _) = components(&grid, &set);
                let seed = prev.mask.cells().next().expect("non-empty level");
                let keep = labels[seed];
                let inside = labels.iter().map(|&l| l == keep).collect();
                DomainMask::new(grid, inside)?
            }
        };
        levels.push(LadderLevel {
            t,
            perimeter: binary_perimeter(&grid, level_mask.inside(), None),
            area: level_mask.area(),
            mask: level_mask,
        });
    }
    let domain_perimeter = binary_perimeter(&grid, mask.inside(), None);
    let limit_perimeter = match levels.len() {
        1 => levels[0].perimeter,
        n => {
            let (a, b) = (&levels[n - 2], &levels[n - 1]);
            let slope = (a.perimeter - b.perimeter) / (a.t - b.t);
            b.perimeter - slope * b.t
        }
    };
    let converged = (limit_perimeter - domain_perimeter).abs() <= 0.03 * domain_perimeter;
    Ok(ApproxLadder {
        levels,
        domain_perimeter,
        limit_perimeter,
        converged,
    })
}

/// Default ladder depths `t0 * 2^-j`.
pub fn geometric_schedule(t0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|j| t0 / f64::powi(2.0, j as i32)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MinkowskiEstimate {
    /// Intercept of the fit `|shell(eps)| / eps = M + c eps`.
    pub content: f64,
    pub curvature_term: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub eps: Vec<f64>,
    pub shell_area: Vec<f64>,
}

/// Inner Minkowski content from the shell areas `|Omega \ Omega_eps|`.
pub fn inner_minkowski_content(mask: &DomainMask, schedule: &[f64]) -> Result<MinkowskiEstimate> {
    let h = mask.grid().h;
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty shell schedule".into()));
    }
    if let Some(e) = schedule.iter().find(|&&e| e < 2.0 * h) {
        return Err(Error::Resolution(format!("shell width {e} is below 2h = {}", 2.0 * h)));
    }
    let df = signed_distance(mask);
    let shell_area: Vec<f64> = schedule
        .iter()
        .map(|&e| {
            // fraction of each cell on the shell side of the level d = -e
            mask.cells()
                .map(|k| (0.5 + (df.signed.values[k] + e) / h).clamp(0.0, 1.0))
                .sum::<f64>()
                * h
                * h
        })
        .collect();
    let y: Vec<f64> = shell_area.iter().zip(schedule).map(|(a, e)| a / e).collect();
    let n = y.len() as f64;
    let (content, curvature_term) = if schedule.len() == 1 {
        (y[0], 0.0)
    } else {
        let mx = schedule.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = schedule.iter().map(|x| (x - mx).powi(2)).sum();
        let sxy: f64 = schedule.iter().zip(&y).map(|(x, v)| (x - mx) * (v - my)).sum();
        let c = sxy / sxx;
        (my - c * mx, c)
    };
    let residual = (schedule
        .iter()
        .zip(&y)
        .map(|(x, v)| (v - content - curvature_term * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(MinkowskiEstimate {
        content,
        curvature_term,
        residual,
        eps: schedule.to_vec(),
        shell_area,
    })
}
