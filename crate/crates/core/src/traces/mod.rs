//! Pairings of bounded vector fields with functions, weak normal traces and
//! the boundary diagnostics built on them.

mod trace;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::approx::ApproxLadder;
use crate::geometry::distance::{signed_distance, DistanceField};
use crate::geometry::mask::DomainMask;
use crate::grid::{dist, dot, norm, Grid, Point, ScalarField, VectorField};
use crate::solver::{tu_field, HeightField};
use crate::stencil::{centered_divergence, divergence, gradient};

pub use trace::{gauss_green_residual, weak_normal_trace, TraceArc, TraceConfig, TraceEstimate};

/// A bounded field with bounded divergence.
#[derive(Clone, Debug)]
pub struct DivField {
    pub xi: VectorField,
    pub div: ScalarField,
    /// Whether `div` is the exact divergence rather than the discrete one.
    pub analytic_div: bool,
    pub sup: f64,
    /// Face fluxes: `x` component on the face `(i + 1/2, j)`, `y` on
    /// `(i, j + 1/2)`. When present, `div` is their backward divergence and
    /// pairings use them with forward differences; `xi` holds cell values.
    pub faces: Option<Vec<[f64; 2]>>,
}

impl DivField {
    /// Attaches the discrete divergence.
    pub fn new(xi: VectorField) -> Result<Self> {
        xi.check_finite("vector field")?;
        let div = ScalarField {
            grid: xi.grid,
            values: centered_divergence(&xi.grid, &xi.values),
            extended: false,
        };
        let sup = xi.sup_norm();
        Ok(DivField { xi, div, analytic_div: false, sup, faces: None })
    }

    pub fn with_divergence(xi: VectorField, div: ScalarField) -> Result<Self> {
        xi.check_finite("vector field")?;
        xi.grid.check_same(&div.grid, "divergence")?;
        div.check_finite("divergence")?;
        let sup = xi.sup_norm();
        Ok(DivField { xi, div, analytic_div: true, sup, faces: None })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Point) -> [f64; 2], div: Option<&dyn Fn(Point) -> f64>) -> Result<Self> {
        let xi = VectorField::from_fn(grid, f);
        match div {
            Some(d) => DivField::with_divergence(xi, ScalarField::from_fn(grid, d)),
            None => DivField::new(xi),
        }
    }

    /// `Tu` of a height field: centered cell values, with the face fluxes
    /// `T(grad+ u)` of the solver's discrete equation and their divergence.
    pub fn from_height(u: &HeightField) -> Result<Self> {
        let g = *u.grid();
        let faces: Vec<[f64; 2]> = gradient(&g, u.values())
            .into_iter()
            .map(|p| {
                let s = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
                [p[0] / s, p[1] / s]
            })
            .collect();
        let xi = tu_field(u);
        xi.check_finite("Tu")?;
        let div = ScalarField { grid: g, values: divergence(&g, &faces), extended: false };
        let sup = xi.sup_norm();
        Ok(DivField { xi, div, analytic_div: false, sup, faces: Some(faces) })
    }

    pub fn grid(&self) -> &Grid {
        &self.xi.grid
    }

    /// Largest gap between the attached and the discrete divergence on cells
    /// at least `depth` cells inside the domain.
    pub fn divergence_mismatch(&self, mask: &DomainMask, depth: usize) -> f64 {
        let discrete = match &self.faces {
            Some(f) => divergence(self.grid(), f),
            None => centered_divergence(self.grid(), &self.xi.values),
        };
        let deep = mask.deep_interior(depth);
        (0..deep.len())
            .filter(|&k| deep[k])
            .map(|k| (discrete[k] - self.div.values[k]).abs())
            .fold(0.0, f64::max)
    }
}

/// Divergence-free rotational bumps in the balls `B_ij` of radius
/// `2^-(i+2)` centred at `(j / 2^i, 1 / 2^i)`, `1 <= j < 2^i`, on a grid
/// covering the unit square. Peak speed is one in every ball.
pub fn twisting_field(grid: &Grid, i_max: u32) -> Result<DivField> {
    let h = grid.h;
    let limit = (1.0 / (4.0 * h)).log2().floor();
    if i_max < 1 || i_max as f64 > limit {
        return Err(Error::Resolution(format!(
            "i_max = {i_max} needs balls of at least 4 cells; admissible range is 1..={limit}"
        )));
    }
    let mut balls = Vec::new();
    for i in 1..=i_max {
        let n = 1u64 << i;
        let r = 1.0 / (4 * n) as f64;
        for j in 1..n {
            balls.push(([j as f64 / n as f64, 1.0 / n as f64], r));
        }
    }
    let xi = VectorField::from_fn(*grid, |p| {
        for &(c, r) in &balls {
            let d = [p[0] - c[0], p[1] - c[1]];
            let s = norm(d);
            if s < r {
                // speed 16 s^2 (r - s)^2 / r^4 peaks at s = r/2 with value 1
                let phi = 16.0 * s * (r - s) * (r - s) / (r * r * r * r);
                return [-phi * d[1], phi * d[0]];
            }
        }
        [0.0, 0.0]
    });
    let mut f = DivField::with_divergence(xi, ScalarField::zeros(*grid))?;
    f.sup = 1.0;
    Ok(f)
}

fn check_phi(phi: &ScalarField, mask: &DomainMask) -> Result<()> {
    mask.grid().check_same(&phi.grid, "test function")?;
    if mask.cells().any(|k| !phi.values[k].is_finite()) {
        return Err(Error::NonFinite("test function"));
    }
    Ok(())
}

/// Contribution of domain cell `k` to the pairing, without the `h^2`.
/// Face fluxes straddling the boundary count with weight one half on both
/// sides.
pub(crate) fn cell_term(xi: &DivField, mask: &DomainMask, k: usize, phi: impl Fn(usize) -> f64) -> f64 {
    let g = xi.grid();
    let (nx, h) = (g.nx, g.h);
    let mut s = phi(k) * xi.div.values[k];
    match &xi.faces {
        None => {
            let p = &xi.xi.values;
            s += p[k][0] * (phi(k + 1) - phi(k - 1)) / (2.0 * h) + p[k][1] * (phi(k + nx) - phi(k - nx)) / (2.0 * h);
        }
        Some(p) => {
            let w = |n: usize| if mask.contains(n) { 1.0 } else { 0.5 };
            s += w(k + 1) * p[k][0] * (phi(k + 1) - phi(k)) / h;
            s += w(k + nx) * p[k][1] * (phi(k + nx) - phi(k)) / h;
            if !mask.contains(k - 1) {
                s += 0.5 * p[k - 1][0] * (phi(k) - phi(k - 1)) / h;
            }
            if !mask.contains(k - nx) {
                s += 0.5 * p[k - nx][1] * (phi(k) - phi(k - nx)) / h;
            }
        }
    }
    s
}

/// `h^2 sum_Omega (phi div xi + xi . grad phi)`, centered or on the face
/// fluxes when the field carries them.
pub fn pairing(xi: &DivField, phi: &ScalarField, mask: &DomainMask) -> Result<f64> {
    mask.grid().check_same(xi.grid(), "vector field")?;
    check_phi(phi, mask)?;
    let v: Vec<f64> = phi.values.iter().map(|&x| if x.is_finite() { x } else { 0.0 }).collect();
    let s: f64 = mask.cells().map(|k| cell_term(xi, mask, k, |n| v[n])).sum();
    Ok(s * mask.grid().cell_area())
}

/// Flux of `Tu` through the boundary polyline of every ladder level.
pub fn verticality_flux(u: &HeightField, mask: &DomainMask, ladder: &ApproxLadder) -> Result<Vec<f64>> {
    mask.grid().check_same(u.grid(), "height field")?;
    let t = tu_field(u);
    let (tx, ty) = (t.component(0), t.component(1));
    let g = *mask.grid();
    let mut out = Vec::with_capacity(ladder.levels.len());
    for level in &ladder.levels {
        let df = signed_distance(&level.mask);
        let grad = df.gradient();
        let mut flux = 0.0;
        for (a, b) in df.curve.segments() {
            let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
            let nu = df.normal_at(&grad, m);
            let tm = [g.interpolate(&tx, m), g.interpolate(&ty, m)];
            flux += dist(a, b) * dot(tm, nu);
        }
        out.push(flux);
    }
    Ok(out)
}

/// `(1/eps) h^2 sum_{-eps < d < 0} xi . grad d`.
pub fn boundary_layer_flux(xi: &DivField, mask: &DomainMask, eps: f64) -> Result<f64> {
    let df = signed_distance(mask);
    boundary_layer_flux_with(xi, mask, &df, eps)
}

pub fn boundary_layer_flux_with(xi: &DivField, mask: &DomainMask, df: &DistanceField, eps: f64) -> Result<f64> {
    mask.grid().check_same(xi.grid(), "vector field")?;
    let h = mask.grid().h;
    if !(eps >= 2.0 * h) {
        return Err(Error::Resolution(format!("band width {eps} is below 2h")));
    }
    let grad = df.gradient();
    let d = &df.signed.values;
    let s: f64 = mask
        .cells()
        .filter(|&k| d[k] > -eps && d[k] < 0.0)
        .map(|k| dot(xi.xi.values[k], grad[k]))
        .sum();
    Ok(s * mask.grid().cell_area() / eps)
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub t: f64,
    /// `|N_t cap B_r(z)| / r^2`.
    pub n_ratios: Vec<f64>,
    pub tau: Option<f64>,
    /// `|M_tau cap B_r(z)| / r^2`.
    pub m_ratios: Option<Vec<f64>>,
}

fn check_radii(grid: &Grid, radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::InvalidParameter("empty radius ladder".into()));
    }
    if let Some(r) = radii.iter().find(|&&r| !(r >= 4.0 * grid.h)) {
        return Err(Error::Resolution(format!("radius {r} is below 4h = {}", 4.0 * grid.h)));
    }
    Ok(())
}

/// Densities of the bad sets `N_t = {xi . grad d < |xi|_inf - t}` and
/// `M_tau = {|grad d - nu(z)| > tau}` in balls about `z`, clipped to the
/// domain and sampled at cell centres.
pub fn bad_set_density(
    xi: &DivField,
    mask: &DomainMask,
    t: f64,
    z: Point,
    radii: &[f64],
    tau: Option<f64>,
) -> Result<DensityProfile> {
    let g = *mask.grid();
    g.check_same(xi.grid(), "vector field")?;
    check_radii(&g, radii)?;
    let df = signed_distance(mask);
    let grad = df.gradient();
    let sup = mask.cells().map(|k| norm(xi.xi.values[k])).fold(0.0, f64::max);
    let bad_n: Vec<bool> = (0..g.len())
        .map(|k| mask.contains(k) && dot(xi.xi.values[k], grad[k]) < sup - t)
        .collect();
    let nu = df.normal_at(&grad, z);
    let bad_m: Option<Vec<bool>> = tau.map(|tau| {
        (0..g.len())
            .map(|k| mask.contains(k) && norm([grad[k][0] - nu[0], grad[k][1] - nu[1]]) > tau)
            .collect()
    });
    let ratio = |set: &[bool], r: f64| -> f64 {
        let n = mask
            .cells()
            .filter(|&k| set[k] && dist(g.center_of(k), z) < r)
            .count();
        n as f64 * g.cell_area() / (r * r)
    };
    Ok(DensityProfile {
        center: z,
        radii: radii.to_vec(),
        t,
        n_ratios: radii.iter().map(|&r| ratio(&bad_n, r)).collect(),
        tau,
        m_ratios: bad_m.map(|m| radii.iter().map(|&r| ratio(&m, r)).collect()),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ApproxLimit {
    /// Componentwise median over the smallest ball.
    pub estimate: [f64; 2],
    pub radii: Vec<f64>,
    /// Fraction of domain cells in `B_r(z)` with `|field - estimate| >= alpha`.
    pub residual_mass: Vec<f64>,
    /// Whether the residual mass is below 0.1 at the two smallest radii.
    pub exists: bool,
}

fn lower_median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[(v.len() + 1) / 2 - 1]
}

/// Approximate-limit probe of `field` at `z` over a decreasing radius ladder.
pub fn approx_limit(field: &VectorField, mask: &DomainMask, z: Point, alpha: f64, radii: &[f64]) -> Result<ApproxLimit> {
    let g = *mask.grid();
    g.check_same(&field.grid, "vector field")?;
    check_radii(&g, radii)?;
    if radii.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidParameter("radii must be strictly decreasing".into()));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let ball = |r: f64| -> Vec<usize> { mask.cells().filter(|&k| dist(g.center_of(k), z) < r).collect() };
    let smallest = ball(*radii.last().expect("non-empty radii"));
    if smallest.is_empty() {
        return Err(Error::PointNotOnBoundary { x: z[0], y: z[1] });
    }
    let estimate = [
        lower_median(smallest.iter().map(|&k| field.values[k][0]).collect()),
        lower_median(smallest.iter().map(|&k| field.values[k][1]).collect()),
    ];
    let residual_mass: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let cells = ball(r);
            let far = cells
                .iter()
                .filter(|&&k| {
                    let v = field.values[k];
                    norm([v[0] - estimate[0], v[1] - estimate[1]]) >= alpha
                })
                .count();
            far as f64 / cells.len().max(1) as f64
        })
        .collect();
    let n = residual_mass.len();
    let exists = residual_mass[n.saturating_sub(2)..].iter().all(|&m| m < 0.1);
    Ok(ApproxLimit {
        estimate,
        radii: radii.to_vec(),
        residual_mass,
        exists,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::approx::build_ladder;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;
    use std::f64::consts::PI;

    fn disk(h: f64) -> DomainMask {
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], h, 3).unwrap();
        rasterize(&AnalyticDomain::unit_disk(), &g).unwrap()
    }

    fn square_grid(h: f64) -> Grid {
        Grid::covering([0.0, 0.0], [1.0, 1.0], h, 3).unwrap()
    }

    #[test]
    fn radial_field_pairs_to_twice_the_area() {
        let m = disk(1.0 / 128.0);
        let xi = DivField::from_fn(*m.grid(), |p| p, Some(&|_| 2.0)).unwrap();
        let one = ScalarField::constant(*m.grid(), 1.0);
        let p = pairing(&xi, &one, &m).unwrap();
        assert!((p - 2.0 * PI).abs() <= 0.01 * 2.0 * PI, "{p}");
        let e1 = DivField::new(VectorField::from_fn(*m.grid(), |_| [1.0, 0.0])).unwrap();
        assert!(pairing(&e1, &one, &m).unwrap().abs() <= m.grid().h);
    }

    #[test]
    fn analytic_and_discrete_divergence_agree() {
        let m = disk(1.0 / 64.0);
        let xi = DivField::from_fn(*m.grid(), |p| [p[0] * p[1], p[1].sin()], Some(&|p| p[1] + p[1].cos())).unwrap();
        assert!(xi.divergence_mismatch(&m, 1) <= m.grid().h);
    }

    #[test]
    fn pairing_vanishes_for_interior_test_functions() {
        let m = disk(1.0 / 64.0);
        let g = *m.grid();
        let xi = DivField::new(VectorField::from_fn(g, |p| [p[1].exp(), p[0] * p[0] - p[1]])).unwrap();
        let phi = ScalarField::from_fn(g, |p| (0.8 - norm(p)).max(0.0).powi(2) * (3.0 * p[0]).cos());
        let val = pairing(&xi, &phi, &m).unwrap();
        assert!(val.abs() < 1e-12, "{val}");
    }

    #[test]
    fn twisting_field_shape() {
        let g = square_grid(1.0 / 256.0);
        let f = twisting_field(&g, 1).unwrap();
        assert!(f.divergence_mismatch(&DomainMask::from_predicate(g, |p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0).unwrap(), 1) < 1.0);
        let c = [0.5, 0.5];
        let peak = f.xi.values.iter().map(|v| norm(*v)).fold(0.0, f64::max);
        assert!((peak - 1.0).abs() <= 0.02, "{peak}");
        for k in 0..g.len() {
            let p = g.center_of(k);
            if dist(p, c) >= 0.125 {
                assert_eq!(f.xi.values[k], [0.0, 0.0]);
            }
        }
        let m = DomainMask::from_predicate(g, |p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])).unwrap();
        let coarse = twisting_field(&Grid::covering([0.0, 0.0], [1.0, 1.0], 2.0 * g.h, 3).unwrap(), 1).unwrap();
        let mc = DomainMask::from_predicate(*coarse.grid(), |p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])).unwrap();
        let (fine, rough) = (f.divergence_mismatch(&m, 1), coarse.divergence_mismatch(&mc, 1));
        assert!(fine <= 0.6 * rough && fine <= 256.0 * g.h, "{fine} vs {rough}");
        assert!(matches!(twisting_field(&g, 7), Err(Error::Resolution(_))));
    }

    #[test]
    fn layer_flux_of_the_distance_gradient() {
        let m = disk(1.0 / 128.0);
        let df = signed_distance(&m);
        let xi = DivField::new(VectorField {
            grid: *m.grid(),
            values: df.gradient(),
            sup_bound: None,
        })
        .unwrap();
        let eps = 0.1;
        let f = boundary_layer_flux_with(&xi, &m, &df, eps).unwrap();
        let target = 2.0 * PI * (1.0 - eps / 2.0);
        assert!((f - target).abs() <= 0.03 * target, "{f}");
    }

    #[test]
    fn flat_graph_has_no_flux() {
        let m = disk(1.0 / 64.0);
        let u = HeightField::from_fn(&m, &0.0.into(), |_| 0.0).unwrap();
        let ladder = build_ladder(&m, &[0.2, 0.1, 0.05]).unwrap();
        let f = verticality_flux(&u, &m, &ladder).unwrap();
        assert!(f.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hemisphere_flux_follows_the_level_radius() {
        let m = disk(1.0 / 128.0);
        let u = HeightField::from_fn(&m, &0.0.into(), |p| -(1.0 - dot(p, p)).max(0.0).sqrt()).unwrap();
        let ladder = build_ladder(&m, &[0.2, 0.1]).unwrap();
        let f = verticality_flux(&u, &m, &ladder).unwrap();
        for (l, v) in ladder.levels.iter().zip(&f) {
            let rho = 1.0 - l.t;
            let exact = 2.0 * PI * rho * rho;
            assert!((v - exact).abs() <= 0.02 * exact, "{v} vs {exact}");
            assert!(*v <= l.perimeter + 0.05);
        }
    }

    #[test]
    fn tangential_field_has_dense_bad_set() {
        let m = disk(1.0 / 128.0);
        let e1 = DivField::new(VectorField::from_fn(*m.grid(), |_| [1.0, 0.0])).unwrap();
        let prof = bad_set_density(&e1, &m, 0.5, [0.0, 1.0], &[0.2, 0.1, 0.05], Some(0.5)).unwrap();
        assert!(prof.n_ratios.iter().all(|&r| r > 1.0), "{:?}", prof.n_ratios);
        assert!(prof.m_ratios.unwrap().iter().all(|&r| r < 0.5 * PI));
        assert!(matches!(
            bad_set_density(&e1, &m, 0.5, [0.0, 1.0], &[0.01], None),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn radial_field_has_thin_bad_set() {
        let m = disk(1.0 / 128.0);
        let xi = DivField::new(VectorField::from_fn(*m.grid(), |p| p)).unwrap();
        let prof = bad_set_density(&xi, &m, 0.1, [0.6, 0.8], &[0.4, 0.2, 0.1, 0.05], None).unwrap();
        assert!(prof.n_ratios.windows(2).all(|w| w[1] <= w[0]), "{:?}", prof.n_ratios);
        assert!(*prof.n_ratios.last().unwrap() <= 0.1);
        for &r in &prof.n_ratios {
            assert!((0.0..=PI + 0.1).contains(&r));
        }
    }

    #[test]
    fn continuous_field_has_its_value_as_limit() {
        let m = disk(1.0 / 128.0);
        let f = VectorField::from_fn(*m.grid(), |p| [p[0] + 1.0, p[1] * p[1]]);
        let z = [0.2, -0.1];
        let lim = approx_limit(&f, &m, z, 0.1, &[0.2, 0.1, 0.04]).unwrap();
        assert!(lim.exists);
        assert!((lim.estimate[0] - 1.2).abs() < 0.02 && (lim.estimate[1] - 0.01).abs() < 0.02);
        assert_eq!(*lim.residual_mass.last().unwrap(), 0.0);
    }

    #[test]
    fn twisting_field_has_no_limit_at_the_bottom() {
        let g = square_grid(1.0 / 256.0);
        let m = DomainMask::from_predicate(g, |p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])).unwrap();
        let f = twisting_field(&g, 6).unwrap();
        let lim = approx_limit(&f.xi, &m, [0.5, 0.0], 0.1, &[0.25, 0.125, 0.0625]).unwrap();
        assert!(!lim.exists, "{:?}", lim.residual_mass);
    }
}
