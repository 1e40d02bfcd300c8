//! Variational solutions of the prescribed mean curvature equation.
//!
//! Solutions minimize the area functional with the curvature load over the
//! bounding box, the exterior frozen to the datum `Phi`. The cross-boundary
//! difference quotients then play the role of the trace penalty.

mod extremal;
mod newton;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremality::{classify_with, CurvatureSpec, ExtremalityOptions, PairClass};
use crate::geometry::mask::DomainMask;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::stencil;

pub use extremal::{
    epigraph_distance, solve_extremal, solve_extremal_from, uniqueness_probe, ExtremalResult, LadderStep,
};
use newton::{minimize, NewtonOptions, Problem};

/// Exterior datum `Phi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundaryDatum {
    Constant(f64),
    #[serde(skip)]
    Field(ScalarField),
}

impl Default for BoundaryDatum {
    fn default() -> Self {
        BoundaryDatum::Constant(0.0)
    }
}

impl From<f64> for BoundaryDatum {
    fn from(c: f64) -> Self {
        BoundaryDatum::Constant(c)
    }
}

impl BoundaryDatum {
    fn values(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            BoundaryDatum::Constant(c) if c.is_finite() => Ok(vec![*c; grid.len()]),
            BoundaryDatum::Constant(_) => Err(Error::NonFinite("boundary datum")),
            BoundaryDatum::Field(f) => {
                grid.check_same(&f.grid, "boundary datum")?;
                f.check_finite("boundary datum")?;
                Ok(f.values.clone())
            }
        }
    }
}

/// A height function on the bounding box of a domain.
#[derive(Clone, Debug)]
pub struct HeightField {
    pub u: ScalarField,
    pub mask: DomainMask,
}

impl HeightField {
    /// Checks the grid and finiteness on the domain unless `u` is flagged
    /// as extended.
    pub fn new(mask: &DomainMask, u: ScalarField) -> Result<Self> {
        mask.grid().check_same(&u.grid, "height field")?;
        if !u.extended && mask.cells().any(|k| !u.values[k].is_finite()) {
            return Err(Error::NonFinite("height field"));
        }
        Ok(HeightField { u, mask: mask.clone() })
    }

    /// `f` on the domain cells and `phi` elsewhere.
    pub fn from_fn(
        mask: &DomainMask,
        phi: &BoundaryDatum,
        f: impl Fn(crate::grid::Point) -> f64,
    ) -> Result<Self> {
        let g = *mask.grid();
        let mut values = phi.values(&g)?;
        for k in mask.cells() {
            values[k] = f(g.center_of(k));
        }
        HeightField::new(mask, ScalarField::from_values(g, values)?)
    }

    pub fn grid(&self) -> &Grid {
        &self.u.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u.values
    }
}

/// Initial values on the free cells.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seed {
    Zero,
    Constant(f64),
    /// Uniform in `[-1, 1]` from a seeded generator.
    Random(u64),
}

impl Seed {
    fn fill(self, cells: impl Iterator<Item = usize>, u: &mut [f64]) {
        match self {
            Seed::Zero => cells.for_each(|k| u[k] = 0.0),
            Seed::Constant(c) => cells.for_each(|k| u[k] = c),
            Seed::Random(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                cells.for_each(|k| u[k] = rng.gen_range(-1.0..=1.0));
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveConfig {
    /// Newton iteration cap per solve.
    pub max_iter: usize,
    /// Bound on half the squared Newton decrement at termination.
    pub energy_tol: f64,
    pub cg_max_iter: usize,
    /// Sufficient decrease constant of the line search.
    pub armijo: f64,
    /// Step reduction factor of the line search.
    pub backtrack: f64,
    pub phi: BoundaryDatum,
    /// Blow-up threshold; `50 * diameter` when absent.
    pub m_cap: Option<f64>,
    /// First ladder depth in cells.
    pub ladder_t0_cells: f64,
    pub ladder_levels: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            max_iter: 200,
            energy_tol: 1e-11,
            cg_max_iter: 2000,
            armijo: 1e-4,
            backtrack: 0.5,
            phi: BoundaryDatum::default(),
            m_cap: None,
            ladder_t0_cells: 8.0,
            ladder_levels: 4,
        }
    }
}

impl SolveConfig {
    /// Validates the parameters against `mask` and resolves `M_cap`.
    pub fn resolve_cap(&self, mask: &DomainMask) -> Result<f64> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if self.max_iter == 0 || self.cg_max_iter == 0 || self.ladder_levels == 0 {
            return bad("iteration caps and ladder levels must be positive");
        }
        if !(self.energy_tol > 0.0) || !(self.ladder_t0_cells > 0.0) {
            return bad("energy tolerance and ladder depth must be positive");
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) || !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("line search constants out of range");
        }
        let diam = diameter(mask);
        let cap = self.m_cap.unwrap_or(50.0 * diam);
        if !(cap >= 10.0 * diam) {
            return Err(Error::InvalidParameter(format!(
                "M_cap = {cap} is below 10 x diameter = {}",
                10.0 * diam
            )));
        }
        Ok(cap)
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            max_iter: self.max_iter,
            energy_tol: self.energy_tol,
            cg_max_iter: self.cg_max_iter,
            armijo: self.armijo,
            backtrack: self.backtrack,
        }
    }
}

/// Largest distance between cell centers of the domain boundary.
pub fn diameter(mask: &DomainMask) -> f64 {
    let g = mask.grid();
    let edge: Vec<_> = mask
        .cells()
        .filter(|&k| {
            let (i, j) = g.ij(k);
            !(mask.contains(g.idx(i - 1, j))
                && mask.contains(g.idx(i + 1, j))
                && mask.contains(g.idx(i, j - 1))
                && mask.contains(g.idx(i, j + 1)))
        })
        .map(|k| g.center_of(k))
        .collect();
    let mut best: f64 = 0.0;
    for (a, p) in edge.iter().enumerate() {
        for q in &edge[a + 1..] {
            best = best.max(crate::grid::dist(*p, *q));
        }
    }
    best + g.h
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverReport {
    #[serde(skip)]
    pub field: HeightField,
    pub energies: Vec<f64>,
    pub final_energy: f64,
    /// `max |div Tu - H|` over cells at least four cells inside.
    pub residual: f64,
    pub residual_cells: usize,
    pub iterations: usize,
    pub cg_iterations: usize,
    /// Last Newton decrement.
    pub decrement: f64,
    pub converged: bool,
}

/// Whether no step raises the energy by more than `slack`.
pub fn energy_nonincreasing(energies: &[f64], slack: f64) -> bool {
    energies.windows(2).all(|w| w[1] <= w[0] + slack)
}

fn full_values(u: &HeightField, phi: &BoundaryDatum) -> Result<Vec<f64>> {
    let mut v = phi.values(u.grid())?;
    for k in u.mask.cells() {
        let x = u.u.values[k];
        if !x.is_finite() {
            return Err(Error::NonFinite("height field"));
        }
        v[k] = x;
    }
    Ok(v)
}

/// Discrete energy `h^2 sum_box sqrt(1 + |grad+ u|^2) + h^2 sum_Omega H u`
/// with `u = phi` off the domain.
pub fn functional_value(
    u: &HeightField,
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    phi: &BoundaryDatum,
) -> Result<f64> {
    mask.grid().check_same(u.grid(), "height field")?;
    let hv = curvature.values_on(mask)?;
    let u = HeightField { u: u.u.clone(), mask: mask.clone() };
    let v = full_values(&u, phi)?;
    let g = *mask.grid();
    let area: f64 = stencil::gradient(&g, &v)
        .iter()
        .map(|p| (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt())
        .sum();
    let lin: f64 = mask.cells().map(|k| hv[k] * v[k]).sum();
    Ok(g.cell_area() * (area + lin))
}

/// `T(grad u)` with `T(p) = p / sqrt(1 + |p|^2)` and the centered gradient.
pub fn tu_field(u: &HeightField) -> VectorField {
    let g = *u.grid();
    let values = stencil::centered_gradient(&g, u.values())
        .into_iter()
        .map(|p| {
            let s = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
            [p[0] / s, p[1] / s]
        })
        .collect();
    VectorField {
        grid: g,
        values,
        sup_bound: Some(1.0),
    }
}

/// `div Tu` with the negative adjoint of the gradient of [`tu_field`].
pub fn mean_curvature(u: &HeightField) -> ScalarField {
    let t = tu_field(u);
    ScalarField {
        grid: t.grid,
        values: stencil::centered_divergence(&t.grid, &t.values),
        extended: false,
    }
}

fn interior_residual(u: &HeightField, hv: &[f64], depth: usize) -> (f64, usize) {
    let deep = u.mask.deep_interior(depth);
    let mc = mean_curvature(u);
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for k in 0..deep.len() {
        if deep[k] {
            worst = worst.max((mc.values[k] - hv[k]).abs());
            n += 1;
        }
    }
    (worst, n)
}

/// Minimizer of [`functional_value`] for a strict pair.
pub fn solve_dirichlet(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    phi: &BoundaryDatum,
    cfg: &SolveConfig,
) -> Result<SolverReport> {
    solve_dirichlet_from(mask, curvature, phi, cfg, Seed::Zero)
}

pub fn solve_dirichlet_from(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    phi: &BoundaryDatum,
    cfg: &SolveConfig,
    seed: Seed,
) -> Result<SolverReport> {
    cfg.resolve_cap(mask)?;
    let opts = ExtremalityOptions {
        margin: false,
        ..Default::default()
    };
    let class = classify_with(mask, curvature, &opts)?;
    if class.class != PairClass::Strict {
        return Err(Error::RefusedPair {
            classification: class.class.to_string(),
            expected: PairClass::Strict.to_string(),
        });
    }
    let hv = curvature.values_on(mask)?;
    let g = *mask.grid();
    let mut u = phi.values(&g)?;
    seed.fill(mask.cells(), &mut u);
    let report = dirichlet_core(mask, &hv, u, cfg)?;
    if !report.converged {
        return Err(Error::NotConverged {
            iterations: report.iterations,
            gap: report.decrement,
        });
    }
    Ok(report)
}

/// Newton solve on `mask` from the full-grid start `u`, no pair check.
fn dirichlet_core(mask: &DomainMask, hv: &[f64], mut u: Vec<f64>, cfg: &SolveConfig) -> Result<SolverReport> {
    let g = *mask.grid();
    let prob = Problem::new(g, mask.inside().to_vec(), hv.to_vec(), &u);
    let out = minimize(&prob, &mut u, &cfg.newton());
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("solver iterate"));
    }
    let field = HeightField {
        u: ScalarField::from_values(g, u)?,
        mask: mask.clone(),
    };
    let (residual, residual_cells) = interior_residual(&field, hv, 4);
    Ok(SolverReport {
        field,
        final_energy: *out.energies.last().expect("initial energy"),
        energies: out.energies,
        residual,
        residual_cells,
        iterations: out.iterations,
        cg_iterations: out.cg_iterations,
        decrement: out.decrement,
        converged: out.converged,
    })
}

/// Lower median `inf { t : |{u >= t}| <= |Omega| / 2 }` over the domain
/// cells.
pub fn area_median(u: &HeightField, mask: &DomainMask) -> f64 {
    let mut v: Vec<f64> = mask.cells().map(|k| u.u.values[k]).collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v[(v.len() + 1) / 2 - 1]
}

/// Translates `u`, exterior datum included, by minus its area median over
/// the domain cells.
pub fn median_normalize(u: &HeightField, mask: &DomainMask) -> Result<(HeightField, f64)> {
    mask.grid().check_same(u.grid(), "height field")?;
    let m = area_median(u, mask);
    let mut out = u.clone();
    for v in out.u.values.iter_mut() {
        *v -= m;
    }
    out.mask = mask.clone();
    Ok((out, m))
}

/// Minimum of `u` over the domain cells.
pub fn lower_bound_probe(u: &HeightField, mask: &DomainMask) -> f64 {
    mask.cells().map(|k| u.u.values[k]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;
    use crate::grid::dot;
    use std::f64::consts::PI;

    fn disk(h: f64) -> DomainMask {
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], h, 3).unwrap();
        rasterize(&AnalyticDomain::unit_disk(), &g).unwrap()
    }

    fn hemisphere(m: &DomainMask) -> HeightField {
        HeightField::from_fn(m, &0.0.into(), |p| -(1.0 - dot(p, p)).max(0.0).sqrt()).unwrap()
    }

    #[test]
    fn flat_graph_energy_is_the_box_area() {
        let g = Grid::new(48, 48, 1.0 / 32.0, [-0.25, -0.25]).unwrap();
        let m = DomainMask::from_predicate(g, |p| (0.0..1.0).contains(&p[0]) && (0.0..1.0).contains(&p[1])).unwrap();
        let u = HeightField::from_fn(&m, &0.0.into(), |_| 0.0).unwrap();
        let e = functional_value(&u, &m, &0.0.into(), &0.0.into()).unwrap();
        assert!((e - 48.0 * 48.0 / 1024.0).abs() < 1e-12);
    }

    #[test]
    fn constant_lift_pays_the_jump() {
        let m = disk(1.0 / 128.0);
        let zero = HeightField::from_fn(&m, &0.0.into(), |_| 0.0).unwrap();
        let e0 = functional_value(&zero, &m, &0.0.into(), &0.0.into()).unwrap();
        let ind: Vec<f64> = m.inside().iter().map(|&b| b as u8 as f64).collect();
        let tv = crate::geometry::contour::total_variation(m.grid(), &ind, None);
        for c in [1.0, -2.5] {
            let u = HeightField::from_fn(&m, &0.0.into(), |_| c).unwrap();
            let jump = functional_value(&u, &m, &0.0.into(), &0.0.into()).unwrap() - e0;
            assert!((jump - c.abs() * tv).abs() <= 0.01 * c.abs() * tv, "{jump} vs {}", c.abs() * tv);
            assert!(jump > 2.0 * PI * c.abs() && jump < 1.2 * 2.0 * PI * c.abs());
        }
    }

    #[test]
    fn hemisphere_energy() {
        let m = disk(1.0 / 128.0);
        let u = hemisphere(&m);
        let e = functional_value(&u, &m, &2.0.into(), &0.0.into()).unwrap();
        let g = m.grid();
        let outside = g.len() as f64 * g.cell_area() - m.area();
        let target = 2.0 * PI / 3.0;
        assert!(((e - outside) - target).abs() <= 0.03 * target, "{}", e - outside);
    }

    #[test]
    fn non_finite_height_is_rejected() {
        let m = disk(1.0 / 32.0);
        let mut u = hemisphere(&m);
        let k = m.cells().next().unwrap();
        u.u.values[k] = f64::NAN;
        assert!(matches!(
            functional_value(&u, &m, &0.0.into(), &0.0.into()),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn tu_of_simple_fields() {
        let m = disk(1.0 / 32.0);
        let c = HeightField::from_fn(&m, &3.0.into(), |_| 3.0).unwrap();
        assert!(tu_field(&c).sup_norm() == 0.0);
        assert!(mean_curvature(&c).values.iter().all(|&v| v == 0.0));
        let a = [0.7, -1.3];
        let lin = HeightField::new(&m, ScalarField::from_fn(*m.grid(), |p| dot(a, p))).unwrap();
        let t = tu_field(&lin);
        let s = (1.0 + dot(a, a)).sqrt();
        let k = m.cells().next().unwrap();
        for c in 0..2 {
            assert!((t.values[k][c] - a[c] / s).abs() < 1e-12);
        }
        let deep = m.deep_interior(1);
        let mc = mean_curvature(&lin);
        assert!(m.cells().filter(|&k| deep[k]).all(|k| mc.values[k].abs() < 1e-10));
    }

    #[test]
    fn hemisphere_tu_and_curvature() {
        let m = disk(1.0 / 128.0);
        let u = hemisphere(&m);
        let g = *m.grid();
        let t = tu_field(&u);
        let mc = mean_curvature(&u);
        assert_eq!(t.sup_bound, Some(1.0));
        for k in m.cells() {
            let p = g.center_of(k);
            let r = dot(p, p).sqrt();
            if r <= 0.9 {
                assert!((crate::grid::norm(t.values[k]) - r).abs() <= 2.0 * g.h, "{r}");
                assert!((mc.values[k] - 2.0).abs() <= 0.02, "{} at r = {r}", mc.values[k]);
            }
        }
    }

    #[test]
    fn tu_stays_in_the_unit_ball() {
        let m = disk(1.0 / 64.0);
        let u = HeightField::new(&m, ScalarField::from_fn(*m.grid(), |p| 1e3 * p[0] * p[1] + 50.0 * p[0])).unwrap();
        assert!(tu_field(&u).values.iter().all(|v| dot(*v, *v) < 1.0));
    }

    #[test]
    fn discrete_integration_by_parts() {
        let m = disk(1.0 / 64.0);
        let g = *m.grid();
        let u = HeightField::new(&m, ScalarField::from_fn(g, |p| (2.0 * p[0]).sin() + p[1] * p[1])).unwrap();
        let t = tu_field(&u);
        let mc = mean_curvature(&u);
        let v: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.center_of(k);
                (1.0 - dot(p, p)).max(0.0).powi(2)
            })
            .collect();
        let gv = stencil::centered_gradient(&g, &v);
        let lhs: f64 = mc.values.iter().zip(&v).map(|(a, b)| a * b).sum();
        let rhs: f64 = -t.values.iter().zip(&gv).map(|(a, b)| dot(*a, *b)).sum::<f64>();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn translation_changes_energy_by_the_load() {
        let m = disk(1.0 / 64.0);
        let g = *m.grid();
        let u = HeightField::new(&m, ScalarField::from_fn(g, |p| 0.3 * p[0] - 0.1)).unwrap();
        let shifted = HeightField::new(&m, ScalarField::from_fn(g, |p| 0.3 * p[0] - 0.1 + 0.25)).unwrap();
        let hspec = CurvatureSpec::Constant(1.5);
        let load = crate::extremality::total_curvature(&m, &hspec).unwrap();
        let phi = BoundaryDatum::Field(u.u.clone());
        let phi_shifted = BoundaryDatum::Field(shifted.u.clone());
        let a = functional_value(&u, &m, &hspec, &phi).unwrap();
        let b = functional_value(&shifted, &m, &hspec, &phi_shifted).unwrap();
        assert!(((b - a) - 0.25 * load).abs() < 1e-10);
    }

    #[test]
    fn median_examples() {
        let m = disk(1.0 / 64.0);
        let g = *m.grid();
        let five = HeightField::from_fn(&m, &0.0.into(), |_| 5.0).unwrap();
        let (n, shift) = median_normalize(&five, &m).unwrap();
        assert_eq!(shift, 5.0);
        assert!(m.cells().all(|k| n.u.values[k] == 0.0));

        let odd = HeightField::from_fn(&m, &0.0.into(), |p| p[0]).unwrap();
        let (_, shift) = median_normalize(&odd, &m).unwrap();
        assert!(shift.abs() <= g.h);

        let (hn, shift) = median_normalize(&hemisphere(&m), &m).unwrap();
        assert!((shift + 0.5f64.sqrt()).abs() <= 2.0 * g.h, "{shift}");
        let above = m.cells().filter(|&k| hn.u.values[k] >= 0.0).count() as f64 * g.cell_area();
        let below = m.cells().filter(|&k| hn.u.values[k] <= 0.0).count() as f64 * g.cell_area();
        assert!(above >= m.area() / 2.0 - g.cell_area());
        assert!(below >= m.area() / 2.0 - g.cell_area());
        let low = lower_bound_probe(&hn, &m);
        assert!((low - (-1.0 - shift)).abs() <= g.h, "{low}");
        assert_eq!(lower_bound_probe(&HeightField::from_fn(&m, &0.0.into(), |_| 0.0).unwrap(), &m), 0.0);
    }

    #[test]
    fn config_checks() {
        let m = disk(1.0 / 32.0);
        let cfg = SolveConfig::default();
        let cap = cfg.resolve_cap(&m).unwrap();
        assert!((cap - 100.0).abs() < 5.0, "{cap}");
        let low = SolveConfig { m_cap: Some(5.0), ..Default::default() };
        assert!(low.resolve_cap(&m).is_err());
        let bad = SolveConfig { energy_tol: 0.0, ..Default::default() };
        assert!(bad.resolve_cap(&m).is_err());
        let parsed: SolveConfig = toml::from_str("energy_tol = 1e-9\nphi = 0.5\nm_cap = 200.0").unwrap();
        assert_eq!(parsed.phi, BoundaryDatum::Constant(0.5));
        assert_eq!(parsed.max_iter, cfg.max_iter);
    }

    #[test]
    fn flat_minimal_graph() {
        let m = disk(1.0 / 64.0);
        let rep = solve_dirichlet(&m, &0.0.into(), &0.0.into(), &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        assert!(rep.field.u.max_abs_on(m.cells()) <= 1e-4);
        let seeded = solve_dirichlet_from(&m, &0.0.into(), &0.0.into(), &SolveConfig::default(), Seed::Random(7)).unwrap();
        assert!(seeded.field.u.max_abs_on(m.cells()) <= 1e-4);
        for w in seeded.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }

    #[test]
    fn strict_cap_residual() {
        let m = disk(1.0 / 128.0);
        let rep = solve_dirichlet(&m, &1.9.into(), &0.0.into(), &SolveConfig::default()).unwrap();
        let g = *m.grid();
        let mc = mean_curvature(&rep.field);
        let worst = m
            .cells()
            .filter(|&k| crate::grid::norm(g.center_of(k)) <= 0.8)
            .map(|k| (mc.values[k] - 1.9).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 0.05, "{worst}");
        assert!(rep.residual.is_finite());
    }

    #[test]
    fn violated_and_extremal_pairs_are_refused() {
        let m = disk(1.0 / 64.0);
        for hval in [2.2, 2.0] {
            let err = solve_dirichlet(&m, &hval.into(), &0.0.into(), &SolveConfig::default()).unwrap_err();
            assert_eq!(err.kind(), "refused-pair", "{hval}");
        }
    }
}
