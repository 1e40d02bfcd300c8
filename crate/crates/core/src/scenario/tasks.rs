//! Task parameters and pipelines.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::checks::{self, Check};
use super::{stability, DomainSpec, Run, ScenarioConfig, Task};
use crate::error::{Error, Result};
use crate::extremality::{
    cheeger, cheeger_constant_disk, cheeger_constant_square, classify_with, total_curvature, CurvatureSpec,
    ExtremalityOptions, PairClass,
};
use crate::geometry::approx::{build_ladder, inner_minkowski_content};
use crate::geometry::contour::{binary_perimeter, Rect};
use crate::geometry::domain::AnalyticDomain;
use crate::geometry::mask::{rasterize, DomainMask};
use crate::geometry::superreduced::super_reduced_test;
use crate::grid::{dist, Grid, Point, ScalarField};
use crate::io::{self, ErrorRecord};
use crate::solver::{
    mean_curvature, median_normalize, solve_dirichlet_from, solve_extremal_from, tu_field, uniqueness_probe,
    BoundaryDatum, ExtremalResult, HeightField, Seed, SolveConfig,
};
use crate::traces::{
    approx_limit, bad_set_density, boundary_layer_flux, gauss_green_residual, pairing, twisting_field,
    verticality_flux, weak_normal_trace, DivField, TraceConfig,
};

fn yes() -> bool {
    true
}

fn zero_seed() -> Seed {
    Seed::Zero
}

pub(crate) struct Outcome {
    pub result: Value,
    pub checks: Vec<Check>,
    /// Failures that did not stop the task.
    pub soft_errors: Vec<ErrorRecord>,
}

impl Outcome {
    pub fn new(result: Value, checks: Vec<Check>) -> Outcome {
        Outcome {
            result,
            checks,
            soft_errors: Vec::new(),
        }
    }
}

pub(crate) fn dispatch(cfg: &ScenarioConfig, mask: &DomainMask, run: &mut Run) -> Result<Outcome> {
    let curvature = cfg.curvature.resolve(mask)?;
    let adj = checks::adjointness(mask.grid(), cfg.seed);
    let mut out = match &cfg.task {
        Task::Classify(t) => classify_task(t, mask, &curvature, cfg, run)?,
        Task::Cheeger(_) => cheeger_task(mask, cfg, run)?,
        Task::Solve(t) => solve_task(t, mask, &curvature, cfg, run)?,
        Task::Trace(t) => trace_task(t, mask, &curvature, cfg, run)?,
        Task::Verticality(t) => verticality_task(t, mask, &curvature, run)?,
        Task::Stability(t) => stability::run_stability(t, cfg, run)?,
        Task::Superreduced(t) => superreduced_task(t, mask)?,
        Task::Geometry(t) => geometry_task(t, mask, cfg, run)?,
    };
    out.checks.insert(0, adj);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyTask {
    /// Compute the margin of strict pairs.
    #[serde(default = "yes")]
    pub margin: bool,
    /// Also classify `-H` and require the same class.
    #[serde(default = "yes")]
    pub both_signs: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheegerTask {}

/// Expected class and margin from the closed forms: `eps0 = 1 - |H| R / 2`
/// on a disk, and the Cheeger constant of a square.
fn class_oracle(domain: &DomainSpec, curvature: &CurvatureSpec) -> Value {
    let Some(c) = curvature.constant_value() else {
        return Value::Null;
    };
    match domain {
        DomainSpec::Disk { radius, .. } => {
            let q = c.abs() * radius / 2.0;
            let class = if q > 1.0 + 1e-9 {
                "violated"
            } else if q < 1.0 - 1e-9 {
                "strict"
            } else {
                "extremal"
            };
            json!({ "class": class, "eps0": (1.0 - q).max(0.0), "cheeger": cheeger_constant_disk(*radius) })
        }
        DomainSpec::Box { side, .. } => {
            let h = cheeger_constant_square(*side);
            let class = if c.abs() > h { "violated" } else { "strict" };
            json!({ "class": class, "cheeger": h })
        }
        _ => Value::Null,
    }
}

fn classify_task(
    t: &ClassifyTask,
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    cfg: &ScenarioConfig,
    run: &mut Run,
) -> Result<Outcome> {
    let opts = ExtremalityOptions {
        margin: t.margin,
        ..Default::default()
    };
    let c = classify_with(mask, curvature, &opts)?;
    for d in &c.deficits {
        let stem = format!("deficit_{}", format!("{:?}", d.sign).to_lowercase());
        run.scalar(&stem, d.minimizer.field(), Some(mask))?;
    }
    let mut checks = Vec::new();
    if t.both_signs {
        let neg = classify_with(mask, &curvature.negated(), &opts)?;
        checks.push(Check::flag("classify_sign_symmetry", neg.class == c.class));
    }
    let mut result = io::to_json_value(&c)?;
    result["classification"] = json!(c.class);
    result["oracle"] = class_oracle(&cfg.domain, curvature);
    Ok(Outcome::new(result, checks))
}

fn cheeger_task(mask: &DomainMask, cfg: &ScenarioConfig, run: &mut Run) -> Result<Outcome> {
    let r = cheeger(mask)?;
    run.scalar("cheeger_minimizer", r.minimizer.field(), Some(mask))?;
    run.mask("cheeger_set.pgm", &r.set)?;
    let exact = match &cfg.domain {
        DomainSpec::Disk { radius, .. } => Some(cheeger_constant_disk(*radius)),
        DomainSpec::Box { side, .. } => Some(cheeger_constant_square(*side)),
        _ => None,
    };
    let mut result = io::to_json_value(&r)?;
    result["exact"] = json!(exact);
    result["rel_error"] = json!(exact.map(|e| (r.h - e).abs() / e));
    Ok(Outcome::new(result, Vec::new()))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Dirichlet for strict pairs, the ladder for extremal pairs.
    #[default]
    Auto,
    Dirichlet,
    Extremal,
}

/// Result of one solve, median-normalized for extremal pairs.
pub(crate) struct Solved {
    pub field: HeightField,
    pub extremal: Option<ExtremalResult>,
    pub report: Value,
    pub energy_monotone: bool,
}

pub(crate) fn solve(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    mode: SolveMode,
    solver: &SolveConfig,
    start: Seed,
) -> Result<Solved> {
    let mode = match mode {
        SolveMode::Auto => {
            let opts = ExtremalityOptions {
                margin: false,
                ..Default::default()
            };
            match classify_with(mask, curvature, &opts)?.class {
                PairClass::Strict => SolveMode::Dirichlet,
                PairClass::Extremal => SolveMode::Extremal,
                PairClass::Violated => return Err(Error::PairViolated),
            }
        }
        m => m,
    };
    if mode == SolveMode::Dirichlet {
        let rep = solve_dirichlet_from(mask, curvature, &solver.phi, solver, start)?;
        Ok(Solved {
            energy_monotone: crate::solver::energy_nonincreasing(&rep.energies, 1e-10),
            report: json!({ "mode": "dirichlet", "solver": io::to_json_value(&rep)? }),
            field: rep.field,
            extremal: None,
        })
    } else {
        let res = solve_extremal_from(mask, curvature, solver, start)?;
        Ok(Solved {
            energy_monotone: res.limit_energy_monotone && res.steps.iter().all(|s| s.energy_monotone),
            report: json!({ "mode": "extremal", "solver": io::to_json_value(&res)? }),
            field: res.limit.clone(),
            extremal: Some(res),
        })
    }
}

fn negate_datum(phi: &BoundaryDatum) -> BoundaryDatum {
    match phi {
        BoundaryDatum::Constant(c) => BoundaryDatum::Constant(-c),
        BoundaryDatum::Field(f) => BoundaryDatum::Field(ScalarField {
            values: f.values.iter().map(|v| -v).collect(),
            ..f.clone()
        }),
    }
}

fn negate_seed(s: Seed) -> Seed {
    match s {
        Seed::Constant(c) => Seed::Constant(-c),
        other => other,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveTask {
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default = "zero_seed")]
    pub start: Seed,
    /// Starts for the uniqueness probe; skipped with fewer than two.
    #[serde(default)]
    pub uniqueness_seeds: Vec<Seed>,
    /// Solve again with `-H` and compare.
    #[serde(default = "yes")]
    pub equivariance: bool,
    /// Radius about the disk centre on which the solution is compared with
    /// the spherical cap of curvature `H`. Disk domains and constant `H`
    /// only.
    #[serde(default)]
    pub oracle_radius: Option<f64>,
    /// Radius about the domain centre on which `div Tu - H` is measured.
    #[serde(default)]
    pub residual_radius: Option<f64>,
}

impl SolveTask {
    pub(crate) fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.oracle_radius.is_some() {
            let ok = matches!(cfg.domain, DomainSpec::Disk { .. })
                && matches!(cfg.curvature, super::CurvatureConfig::Constant { .. } | super::CurvatureConfig::Normalized);
            if !ok {
                return Err(Error::Config("the cap oracle needs a disk and a constant curvature".into()));
            }
        }
        for r in [self.oracle_radius, self.residual_radius].into_iter().flatten() {
            if !(r > 0.0) {
                return Err(Error::Config(format!("probe radius {r} must be positive")));
            }
        }
        Ok(())
    }
}

/// `max |f_k|` over the domain cells within `radius` of `center`.
fn max_in_ball(mask: &DomainMask, center: Point, radius: f64, f: impl Fn(usize) -> f64) -> f64 {
    let g = mask.grid();
    mask.cells()
        .filter(|&k| dist(g.center_of(k), center) <= radius)
        .map(|k| f(k).abs())
        .fold(0.0, f64::max)
}

/// Spherical cap `-sign(H) sqrt(R^2 - r^2)` of curvature `H = 2 / R`,
/// median-normalized on the mask.
pub(crate) fn cap_oracle(mask: &DomainMask, center: Point, radius: f64, h: f64) -> Result<HeightField> {
    let s = h.signum();
    let w = HeightField::from_fn(mask, &BoundaryDatum::Constant(0.0), |p| {
        let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
        -s * (radius * radius - r2).max(0.0).sqrt()
    })?;
    Ok(median_normalize(&w, mask)?.0)
}

fn solve_task(
    t: &SolveTask,
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    cfg: &ScenarioConfig,
    run: &mut Run,
) -> Result<Outcome> {
    let center = cfg.domain.center();
    let hv = curvature.values_on(mask)?;
    let mut result = json!({});
    let mut oracle = None;
    if let (Some(rho), DomainSpec::Disk { radius, .. }) = (t.oracle_radius, &cfg.domain) {
        let c = curvature.constant_value().expect("validated constant curvature");
        let w = cap_oracle(mask, center, *radius, c)?;
        let region = t.residual_radius.unwrap_or(rho);
        let mc = mean_curvature(&w);
        let fd = max_in_ball(mask, center, region, |k| mc.values[k] - c);
        run.note(format!("cap oracle: finite-difference residual {fd:.3e} on r <= {region}"));
        result["oracle_fd_residual"] = json!(fd);
        oracle = Some((w, rho));
    }

    let cap = t.solver.resolve_cap(mask)?;
    run.default_value("m_cap", json!(cap));
    let solved = solve(mask, curvature, t.mode, &t.solver, t.start)?;
    let u = &solved.field;
    result["solve"] = solved.report.clone();
    if let Some((w, rho)) = &oracle {
        let (un, _) = median_normalize(u, mask)?;
        result["oracle_error"] = json!(max_in_ball(mask, center, *rho, |k| un.u.values[k] - w.u.values[k]));
        run.scalar("oracle", &w.u, Some(mask))?;
    }
    let mc = mean_curvature(u);
    if let Some(r) = t.residual_radius {
        result["region_residual"] = json!(max_in_ball(mask, center, r, |k| mc.values[k] - hv[k]));
    }
    run.scalar("height", &u.u, Some(mask))?;
    run.scalar("curvature", &mc, Some(mask))?;
    run.emit_vector("tu.csv", &tu_field(u), mask)?;
    if let Some(res) = &solved.extremal {
        let rows: Vec<Vec<f64>> = res
            .steps
            .iter()
            .map(|s| vec![s.t, s.energy, s.residual, s.shift, s.epigraph_distance.unwrap_or(f64::NAN)])
            .collect();
        run.csv("ladder.csv", &["t", "energy", "residual", "shift", "epigraph_distance"], &rows)?;
        run.default_value("epigraph_compact", json!("first ladder level"));
    }

    let tol = 2.0 * t.solver.energy_tol.sqrt();
    if t.uniqueness_seeds.len() >= 2 {
        let spread = uniqueness_probe(mask, curvature, &t.solver, &t.uniqueness_seeds)?;
        result["uniqueness"] = json!({ "spread": spread, "tolerance": tol, "pass": spread <= tol });
    }
    let mut checks = vec![checks::tu_below_one(u), checks::energy_monotone(solved.energy_monotone)];
    if t.equivariance {
        let mut neg = t.solver.clone();
        neg.phi = negate_datum(&t.solver.phi);
        let other = solve(mask, &curvature.negated(), t.mode, &neg, negate_seed(t.start))?;
        checks.push(checks::equivariance(u, &other.field, mask, tol));
    }
    Ok(Outcome::new(result, checks))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerticalityTask {
    /// Strictly decreasing erosion depths.
    pub schedule: Vec<f64>,
    #[serde(default)]
    pub mode: SolveMode,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default = "zero_seed")]
    pub start: Seed,
}

impl VerticalityTask {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() || self.schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("verticality schedule must be nonempty and strictly decreasing".into()));
        }
        Ok(())
    }
}

fn verticality_task(t: &VerticalityTask, mask: &DomainMask, curvature: &CurvatureSpec, run: &mut Run) -> Result<Outcome> {
    let solved = solve(mask, curvature, t.mode, &t.solver, t.start)?;
    let ladder = build_ladder(mask, &t.schedule)?;
    let flux = verticality_flux(&solved.field, mask, &ladder)?;
    let rows: Vec<Vec<f64>> = ladder
        .levels
        .iter()
        .zip(&flux)
        .map(|(l, f)| vec![l.t, *f, l.perimeter])
        .collect();
    run.csv("verticality.csv", &["t", "flux", "level_perimeter"], &rows)?;
    let result = json!({
        "t": t.schedule,
        "flux": flux,
        "level_perimeter": ladder.levels.iter().map(|l| l.perimeter).collect::<Vec<_>>(),
        "total_curvature": total_curvature(mask, curvature)?,
        "perimeter": binary_perimeter(mask.grid(), mask.inside(), None),
        "solve": solved.report,
    });
    let checks = vec![checks::tu_below_one(&solved.field), checks::energy_monotone(solved.energy_monotone)];
    Ok(Outcome::new(result, checks))
}

/// Quadratic `c0 + c1 x + c2 y + c3 x^2 + c4 x y + c5 y^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub [f64; 6]);

impl Polynomial {
    pub const ONE: Polynomial = Polynomial([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);

    pub fn eval(&self, p: Point) -> f64 {
        let c = self.0;
        let (x, y) = (p[0], p[1]);
        c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
    }

    pub fn grad(&self, p: Point) -> [f64; 2] {
        let c = self.0;
        let (x, y) = (p[0], p[1]);
        [c[1] + 2.0 * c[3] * x + c[4] * y, c[2] + c[4] * x + 2.0 * c[5] * y]
    }
}

fn one() -> Polynomial {
    Polynomial::ONE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSource {
    /// Rotating fields in balls accumulating at the bottom edge of the box.
    Twisting { i_max: u32 },
    Constant { value: [f64; 2] },
    /// `(x, y)` components as quadratics, with their exact divergence.
    Polynomial { x: Polynomial, y: Polynomial },
    /// `Tu` of the solution for the scenario's curvature.
    Solution {
        #[serde(default)]
        mode: SolveMode,
        #[serde(default)]
        solver: SolveConfig,
        #[serde(default = "zero_seed")]
        start: Seed,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityProbe {
    pub z: Point,
    pub t: f64,
    /// Decreasing ball radii, each at least `4h`.
    pub radii: Vec<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitProbe {
    pub z: Point,
    pub alpha: f64,
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceTask {
    pub field: FieldSource,
    #[serde(default)]
    pub trace: TraceConfig,
    /// Test function of the Gauss-Green residual.
    #[serde(default = "one")]
    pub phi: Polynomial,
    /// Band widths of the boundary-layer flux.
    #[serde(default)]
    pub layer_eps: Vec<f64>,
    #[serde(default)]
    pub densities: Vec<DensityProbe>,
    #[serde(default)]
    pub limits: Vec<LimitProbe>,
    /// Arcs with midpoints in this rectangle are summarized separately.
    #[serde(default)]
    pub window: Option<Rect>,
    /// Also compute the Gauss-Green residual on the grid of spacing `2h`.
    #[serde(default)]
    pub refine_check: bool,
}

impl TraceTask {
    pub(crate) fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if let FieldSource::Twisting { i_max } = self.field {
            if i_max == 0 {
                return Err(Error::Config("twisting field needs i_max >= 1".into()));
            }
        }
        if self.refine_check && matches!(cfg.domain, DomainSpec::MaskFile { .. }) {
            return Err(Error::Config("refine_check needs an analytic domain".into()));
        }
        if self.layer_eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        Ok(())
    }
}

fn div_field(source: &FieldSource, mask: &DomainMask, curvature: &CurvatureSpec) -> Result<(DivField, Option<Solved>)> {
    let g = *mask.grid();
    Ok(match source {
        FieldSource::Twisting { i_max } => (twisting_field(&g, *i_max)?, None),
        FieldSource::Constant { value } => {
            let v = *value;
            (DivField::from_fn(g, move |_| v, Some(&|_: Point| 0.0))?, None)
        }
        FieldSource::Polynomial { x, y } => {
            let (x, y) = (*x, *y);
            let div = move |p: Point| x.grad(p)[0] + y.grad(p)[1];
            (DivField::from_fn(g, move |p| [x.eval(p), y.eval(p)], Some(&div))?, None)
        }
        FieldSource::Solution { mode, solver, start } => {
            let s = solve(mask, curvature, *mode, solver, *start)?;
            (DivField::from_height(&s.field)?, Some(s))
        }
    })
}

fn trace_task(
    t: &TraceTask,
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    cfg: &ScenarioConfig,
    run: &mut Run,
) -> Result<Outcome> {
    let g = *mask.grid();
    let (xi, solved) = div_field(&t.field, mask, curvature)?;
    let tr = weak_normal_trace(&xi, mask, &t.trace)?;
    for w in &tr.warnings {
        run.note(format!("trace warning: {w}"));
    }
    let phi = ScalarField::from_fn(g, |p| t.phi.eval(p));
    let gg = gauss_green_residual(&xi, &phi, mask, &tr)?;
    let mut result = json!({
        "sup": tr.sup,
        "sup_ok": tr.sup_ok,
        "eps": tr.eps,
        "arcs": tr.arcs.len(),
        "max_abs": tr.max_abs(),
        "gauss_green_residual": gg,
        "pairing": pairing(&xi, &phi, mask)?,
        "divergence_mismatch": xi.divergence_mismatch(mask, 2),
        "warnings": tr.warnings,
    });

    let mut header = vec!["x".to_string(), "y".into(), "length".into()];
    header.extend(tr.eps.iter().map(|e| format!("value_eps_{}", io::fmt9(*e))));
    header.extend(["value".into(), "classical".into()]);
    let rows: Vec<Vec<f64>> = tr
        .arcs
        .iter()
        .map(|a| {
            let mut r = vec![a.midpoint[0], a.midpoint[1], a.length];
            r.extend(&a.values);
            r.extend([a.value, a.classical]);
            r
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    run.csv("trace.csv", &header, &rows)?;
    let norm = ScalarField::from_values(g, xi.xi.values.iter().map(|&v| crate::grid::norm(v)).collect())?;
    run.scalar("field_norm", &norm, Some(mask))?;

    if let Some(w) = &t.window {
        let inside: Vec<&_> = tr.arcs.iter().filter(|a| w.contains(a.midpoint)).collect();
        result["window"] = json!({
            "rect": w,
            "arcs": inside.len(),
            "max_abs": inside.iter().map(|a| a.value.abs()).fold(0.0, f64::max),
        });
    }
    if !t.layer_eps.is_empty() {
        let flux = t
            .layer_eps
            .iter()
            .map(|&e| boundary_layer_flux(&xi, mask, e))
            .collect::<Result<Vec<_>>>()?;
        result["layer_flux"] = json!({ "eps": t.layer_eps, "flux": flux });
    }
    let mut dens = Vec::new();
    for (i, p) in t.densities.iter().enumerate() {
        let d = bad_set_density(&xi, mask, p.t, p.z, &p.radii, p.tau)?;
        let nonincreasing = d.n_ratios.windows(2).all(|w| w[1] <= w[0]);
        let rows: Vec<Vec<f64>> = (0..d.radii.len())
            .map(|j| {
                let m = d.m_ratios.as_ref().map_or(f64::NAN, |m| m[j]);
                vec![d.radii[j], d.n_ratios[j], m]
            })
            .collect();
        run.csv(&format!("density_{i}.csv"), &["r", "n_ratio", "m_ratio"], &rows)?;
        let mut v = io::to_json_value(&d)?;
        v["nonincreasing"] = json!(nonincreasing);
        v["final_n_ratio"] = json!(d.n_ratios.last());
        dens.push(v);
    }
    result["densities"] = json!(dens);
    let limits = t
        .limits
        .iter()
        .map(|p| approx_limit(&xi.xi, mask, p.z, p.alpha, &p.radii))
        .collect::<Result<Vec<_>>>()?;
    result["limits"] = io::to_json_value(&limits)?;

    if t.refine_check {
        let coarse = cfg.mask_at(2.0 * g.h)?;
        let (xc, _) = div_field(&t.field, &coarse, &cfg.curvature.resolve(&coarse)?)?;
        let trc = weak_normal_trace(&xc, &coarse, &t.trace)?;
        let phic = ScalarField::from_fn(*coarse.grid(), |p| t.phi.eval(p));
        let ggc = gauss_green_residual(&xc, &phic, &coarse, &trc)?;
        let ratio = ggc / gg;
        result["refine"] = json!({
            "coarse_h": 2.0 * g.h,
            "coarse_residual": ggc,
            "ratio": if ratio.is_finite() { json!(ratio) } else { Value::Null },
        });
    }

    let mut checks = vec![checks::trace_sup_bound(&tr)];
    if let Some(s) = &solved {
        checks.push(checks::tu_below_one(&s.field));
        checks.push(checks::energy_monotone(s.energy_monotone));
        result["solve"] = s.report.clone();
    }
    Ok(Outcome::new(result, checks))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuperreducedTask {
    pub points: Vec<Point>,
    /// Strictly decreasing blow-up scales.
    pub scales: Vec<f64>,
    pub eps: f64,
}

impl SuperreducedTask {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Config("no test points".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("cone slope eps must be positive".into()));
        }
        Ok(())
    }
}

fn superreduced_task(t: &SuperreducedTask, mask: &DomainMask) -> Result<Outcome> {
    let reports = t
        .points
        .iter()
        .map(|&z| super_reduced_test(mask, z, &t.scales, t.eps))
        .collect::<Result<Vec<_>>>()?;
    Ok(Outcome::new(json!({ "points": io::to_json_value(&reports)? }), Vec::new()))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryTask {
    /// Grid spacings for the perimeter convergence study, coarse to fine.
    #[serde(default)]
    pub refinements: Vec<f64>,
    /// Erosion depths of the interior approximations.
    #[serde(default)]
    pub ladder: Vec<f64>,
    /// Shell widths of the inner Minkowski content.
    #[serde(default)]
    pub minkowski: Vec<f64>,
}

impl GeometryTask {
    pub(crate) fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if matches!(cfg.domain, DomainSpec::MaskFile { .. }) {
            return Err(Error::Config("geometry checks need an analytic domain".into()));
        }
        if self.refinements.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::Config("refinement spacings must be positive".into()));
        }
        Ok(())
    }
}

/// Perimeter of the inner parallel set at depth `t`, where closed-form.
fn parallel_perimeter(dom: &AnalyticDomain, t: f64) -> Option<f64> {
    match dom {
        AnalyticDomain::Disk { radius, .. } if t < *radius => Some(2.0 * std::f64::consts::PI * (radius - t)),
        _ => None,
    }
}

fn geometry_task(t: &GeometryTask, mask: &DomainMask, cfg: &ScenarioConfig, run: &mut Run) -> Result<Outcome> {
    let dom = cfg.domain.analytic()?.expect("analytic domain");
    let exact = dom.exact_perimeter();
    let mut result = json!({ "exact_perimeter": exact });
    if !t.refinements.is_empty() {
        let mut rows = Vec::new();
        for &h in &t.refinements {
            let g: Grid = cfg.grid_at(h)?;
            let m = rasterize(&dom, &g)?;
            let p = binary_perimeter(&g, m.inside(), None);
            rows.push(vec![h, p, (p - exact).abs() / exact]);
        }
        run.csv("perimeter.csv", &["h", "perimeter", "rel_error"], &rows)?;
        let errs: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        result["perimeter"] = json!({
            "h": t.refinements,
            "perimeter": rows.iter().map(|r| r[1]).collect::<Vec<_>>(),
            "rel_error": errs,
            "monotone": errs.windows(2).all(|w| w[1] < w[0]),
            "final_rel_error": errs.last(),
        });
    }
    if !t.ladder.is_empty() {
        let ladder = build_ladder(mask, &t.ladder)?;
        let exact_t: Vec<Option<f64>> = t.ladder.iter().map(|&s| parallel_perimeter(&dom, s)).collect();
        let rel: Vec<Option<f64>> = ladder
            .levels
            .iter()
            .zip(&exact_t)
            .map(|(l, e)| e.map(|e| (l.perimeter - e).abs() / e))
            .collect();
        let rows: Vec<Vec<f64>> = ladder
            .levels
            .iter()
            .zip(&exact_t)
            .map(|(l, e)| vec![l.t, l.perimeter, l.area, e.unwrap_or(f64::NAN)])
            .collect();
        run.csv("ladder.csv", &["t", "perimeter", "area", "exact_perimeter"], &rows)?;
        let mut v = io::to_json_value(&ladder.summary())?;
        v["exact"] = json!(exact_t);
        v["rel_error"] = json!(rel);
        result["ladder"] = v;
    }
    if !t.minkowski.is_empty() {
        let m = inner_minkowski_content(mask, &t.minkowski)?;
        let mut v = io::to_json_value(&m)?;
        v["rel_error"] = json!((m.content - exact).abs() / exact);
        result["minkowski"] = v;
    }
    Ok(Outcome::new(result, Vec::new()))
}
