//! Subset isoperimetric condition, Cheeger constant and pair classification.
//!
//! Every set quantifier "for all `A` in `Omega`" is replaced by the convex
//! problem over `u` in `[0, 1]` solved in [`relax`]; the 0.5 superlevel set of
//! the minimizer is checked against the set objective afterwards.

pub mod relax;

use std::f64::consts::PI;

use log::{debug, info};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::contour::{binary_perimeter, coarsened_perimeter};
use crate::geometry::mask::{largest_component, DomainMask};
use crate::geometry::RelaxedIndicator;
use crate::grid::ScalarField;

pub use relax::{solve_relaxed, upwind_total_variation, RelaxOptions, RelaxedSolution};

/// The prescribed curvature `H`.
#[derive(Clone, Debug, PartialEq)]
pub enum CurvatureSpec {
    Constant(f64),
    /// Values are read on the domain cells only.
    Field { field: ScalarField, continuous: bool },
}

impl CurvatureSpec {
    pub fn constant(value: f64) -> Self {
        CurvatureSpec::Constant(value)
    }

    pub fn field(field: ScalarField, continuous: bool) -> Self {
        CurvatureSpec::Field { field, continuous }
    }

    pub fn is_continuous(&self) -> bool {
        match self {
            CurvatureSpec::Constant(_) => true,
            CurvatureSpec::Field { continuous, .. } => *continuous,
        }
    }

    pub fn constant_value(&self) -> Option<f64> {
        match self {
            CurvatureSpec::Constant(c) => Some(*c),
            CurvatureSpec::Field { .. } => None,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        match self {
            CurvatureSpec::Constant(c) => CurvatureSpec::Constant(s * c),
            CurvatureSpec::Field { field, continuous } => CurvatureSpec::Field {
                field: ScalarField {
                    values: field.values.iter().map(|v| s * v).collect(),
                    ..field.clone()
                },
                continuous: *continuous,
            },
        }
    }

    /// Full-grid values, zero off the domain.
    pub fn values_on(&self, mask: &DomainMask) -> Result<Vec<f64>> {
        let g = mask.grid();
        let mut out = vec![0.0; g.len()];
        match self {
            CurvatureSpec::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::NonFinite("curvature"));
                }
                for k in mask.cells() {
                    out[k] = *c;
                }
            }
            CurvatureSpec::Field { field, .. } => {
                g.check_same(&field.grid, "curvature field")?;
                for k in mask.cells() {
                    let v = field.values[k];
                    if !v.is_finite() {
                        return Err(Error::NonFinite("curvature"));
                    }
                    out[k] = v;
                }
            }
        }
        Ok(out)
    }

    /// Cell values as a field on the mask grid.
    pub fn to_field(&self, mask: &DomainMask) -> Result<ScalarField> {
        ScalarField::from_values(*mask.grid(), self.values_on(mask)?)
    }
}

impl From<f64> for CurvatureSpec {
    fn from(c: f64) -> Self {
        CurvatureSpec::Constant(c)
    }
}

/// `int_Omega H` as an area-weighted sum over the domain cells.
pub fn total_curvature(mask: &DomainMask, curvature: &CurvatureSpec) -> Result<f64> {
    let v = curvature.values_on(mask)?;
    Ok(mask.cells().map(|k| v[k]).sum::<f64>() * mask.grid().cell_area())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];
}

/// Decision tolerance `max(1e-3 P, 3 |P_h - P_2h|)` from the contour
/// perimeters of the mask at `h` and after coarsening to `2h`.
pub fn classification_tol(mask: &DomainMask) -> f64 {
    let g = mask.grid();
    let p = binary_perimeter(g, mask.inside(), None);
    let p2 = coarsened_perimeter(g, mask.inside());
    (1e-3 * p).max(3.0 * (p - p2).abs())
}

/// Solver settings shared by the operations of this module.
#[derive(Clone, Copy, Debug)]
pub struct ExtremalityOptions {
    pub max_iter: usize,
    /// Duality gap tolerance relative to `P(Omega)`.
    pub gap_rel: f64,
    /// Decision tolerance; [`classification_tol`] when `None`.
    pub tol: Option<f64>,
    /// Accuracy of the ratio iterations relative to `P(Omega)`.
    pub ratio_rel: f64,
    pub check_every: usize,
    /// Compute the margin of strict pairs during classification.
    pub margin: bool,
}

impl Default for ExtremalityOptions {
    fn default() -> Self {
        ExtremalityOptions {
            max_iter: 20_000,
            gap_rel: 1e-6,
            tol: None,
            ratio_rel: 1e-4,
            check_every: 64,
            margin: true,
        }
    }
}

/// Problem data resolved once per mask.
struct Setup<'a> {
    mask: &'a DomainMask,
    perimeter: f64,
    tol: f64,
    opts: ExtremalityOptions,
}

impl<'a> Setup<'a> {
    fn new(mask: &'a DomainMask, opts: &ExtremalityOptions) -> Setup<'a> {
        Setup {
            mask,
            perimeter: binary_perimeter(mask.grid(), mask.inside(), None),
            tol: opts.tol.unwrap_or_else(|| classification_tol(mask)),
            opts: *opts,
        }
    }

    fn relax(&self) -> RelaxOptions {
        RelaxOptions {
            max_iter: self.opts.max_iter,
            gap_tol: self.opts.gap_rel * self.perimeter,
            certify_tol: None,
            violation_tol: None,
            check_every: self.opts.check_every,
        }
    }

    fn ratio_tol(&self) -> f64 {
        self.opts.ratio_rel * self.perimeter
    }

    /// Whether a threshold set is empty or fills the domain up to one
    /// boundary layer of cells.
    fn trivial(&self, set: &[bool]) -> bool {
        let g = self.mask.grid();
        let slack = g.h * self.perimeter;
        let area = set.iter().filter(|&&b| b).count() as f64 * g.cell_area();
        let missing = self.mask.cells().filter(|&k| !set[k]).count() as f64 * g.cell_area();
        area <= slack || missing <= slack
    }
}

/// Superlevel set `{u > 1/2}` of a relaxed minimizer, scored against the set
/// objective.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdSet {
    #[serde(skip)]
    pub inside: Vec<bool>,
    pub perimeter: f64,
    pub area: f64,
    /// `int_A H`.
    pub curvature_integral: f64,
    /// `sign int_A H - (1 - eps) P(A)`.
    pub excess: f64,
}

impl ThresholdSet {
    fn new(mask: &DomainMask, u: &[f64], h_values: &[f64], sign: Sign, eps: f64) -> Self {
        let g = mask.grid();
        let inside: Vec<bool> = u.iter().map(|&v| v > 0.5).collect();
        let perimeter = if inside.iter().any(|&b| b) {
            binary_perimeter(g, &inside, None)
        } else {
            0.0
        };
        let mut area = 0.0;
        let mut curvature_integral = 0.0;
        for (k, _) in inside.iter().enumerate().filter(|(_, &b)| b) {
            area += 1.0;
            curvature_integral += h_values[k];
        }
        area *= g.cell_area();
        curvature_integral *= g.cell_area();
        ThresholdSet {
            excess: sign.value() * curvature_integral - (1.0 - eps) * perimeter,
            inside,
            perimeter,
            area,
            curvature_integral,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DeficitReport {
    pub eps: f64,
    pub sign: Sign,
    /// Objective of the best iterate, the estimate of `D`.
    pub value: f64,
    /// Certified lower bound on `D`.
    pub lower_bound: f64,
    pub duality_gap: f64,
    pub tol: f64,
    pub iterations: usize,
    pub converged: bool,
    pub threshold: ThresholdSet,
    #[serde(skip)]
    pub minimizer: RelaxedIndicator,
}

impl DeficitReport {
    /// `D >= -tol` is certified by the lower bound.
    pub fn certified_nonnegative(&self) -> bool {
        self.lower_bound >= -self.tol
    }

    pub fn violating(&self) -> bool {
        self.value < -self.tol
    }
}

/// `D = min (1 - eps) TV(u) - sign int H u` over `u` in `[0, 1]` vanishing
/// off the domain.
pub fn subset_deficit(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    eps: f64,
    sign: Sign,
) -> Result<DeficitReport> {
    subset_deficit_with(mask, curvature, eps, sign, &ExtremalityOptions::default())
}

pub fn subset_deficit_with(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    eps: f64,
    sign: Sign,
    opts: &ExtremalityOptions,
) -> Result<DeficitReport> {
    let setup = Setup::new(mask, opts);
    deficit(&setup, &curvature.values_on(mask)?, eps, sign, None)
}

fn deficit(
    setup: &Setup,
    h_values: &[f64],
    eps: f64,
    sign: Sign,
    warm: Option<&[f64]>,
) -> Result<DeficitReport> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1), got {eps}")));
    }
    let mask = setup.mask;
    let s = sign.value();
    let f: Vec<f64> = h_values.iter().map(|v| s * v).collect();
    let zero = || RelaxedIndicator::new(mask, vec![0.0; mask.grid().len()]);
    if mask.cells().all(|k| f[k] <= 0.0) {
        // u = 0 is optimal without solving
        let u = zero()?;
        return Ok(DeficitReport {
            eps,
            sign,
            value: 0.0,
            lower_bound: 0.0,
            duality_gap: 0.0,
            tol: setup.tol,
            iterations: 0,
            converged: true,
            threshold: ThresholdSet::new(mask, u.values(), h_values, sign, eps),
            minimizer: u,
        });
    }
    let mut ro = setup.relax();
    ro.certify_tol = Some(setup.tol);
    ro.violation_tol = Some(setup.tol);
    let sol = solve_relaxed(mask, &f, 1.0 - eps, &ro, warm);
    debug!(
        "deficit eps={eps} sign={sign:?}: value {:.4e}, bound {:.4e}, {} iterations",
        sol.primal, sol.dual, sol.iterations
    );
    if !sol.converged {
        return Err(Error::NotConverged {
            iterations: sol.iterations,
            gap: sol.gap(),
        });
    }
    let threshold = ThresholdSet::new(mask, &sol.u, h_values, sign, eps);
    Ok(DeficitReport {
        eps,
        sign,
        value: sol.primal,
        lower_bound: sol.dual,
        duality_gap: sol.gap(),
        tol: setup.tol,
        iterations: sol.iterations,
        converged: sol.converged,
        threshold,
        minimizer: RelaxedIndicator::new(mask, sol.u)?,
    })
}

/// Outcome of a ratio iteration `mu <- <f, u> / (alpha TV(u))`.
#[derive(Clone, Debug, Serialize)]
pub struct RatioReport {
    /// Best ratio attained by a feasible `u`.
    pub ratio: f64,
    /// Certified bound on the optimal ratio from the final solve.
    pub bound: f64,
    /// `TV(u)` and `int u` of the best `u`, scaled to `max u = 1`.
    pub tv: f64,
    pub mass: f64,
    pub steps: usize,
    pub iterations: usize,
    pub certified: bool,
    #[serde(skip)]
    pub u: Vec<f64>,
}

/// Largest `<f, u> / TV(u)` by the Dinkelbach iteration: each step solves
/// `min mu TV(u) - <f, u>`, whose negative minimum means the minimizer has a
/// larger ratio. Stops when the lower bound certifies that no `u` beats the
/// current ratio by more than `ratio_tol`.
fn max_ratio(setup: &Setup, f: &[f64]) -> Result<RatioReport> {
    let mask = setup.mask;
    let g = mask.grid();
    let h2 = g.cell_area();
    let mut u: Vec<f64> = (0..g.len())
        .map(|k| if mask.contains(k) && f[k] > 0.0 { 1.0 } else { 0.0 })
        .collect();
    let lin = |u: &[f64]| mask.cells().map(|k| f[k] * u[k]).sum::<f64>() * h2;
    let mut tv = upwind_total_variation(g, &u);
    let mut mass = u.iter().sum::<f64>() * h2;
    let mut ratio = lin(&u) / tv;
    let td = setup.ratio_tol();
    let mut ro = setup.relax();
    ro.gap_tol = td;
    ro.certify_tol = Some(td);
    let mut iterations = 0;
    for step in 1..=16 {
        let solved_at = ratio;
        let sol = solve_relaxed(mask, f, solved_at, &ro, Some(&u));
        iterations += sol.iterations;
        let certified = sol.dual >= -td;
        let next = if sol.tv > 0.0 { sol.linear / sol.tv } else { 0.0 };
        debug!(
            "ratio step {step}: mu {ratio:.6}, value {:.3e}, bound {:.3e}, next {next:.6}",
            sol.primal, sol.dual
        );
        if next > ratio && sol.primal < 0.0 {
            // the ratio is scale invariant; keep the full-height profile
            let top = sol.u.iter().fold(0.0f64, |m, &v| m.max(v));
            ratio = next;
            tv = sol.tv / top;
            mass = sol.u.iter().sum::<f64>() * h2 / top;
            u = sol.u.iter().map(|v| v / top).collect();
        }
        if certified || !sol.converged {
            // with D >= dual: <f, v> <= mu TV(v) - dual for every v
            let bound = solved_at - sol.dual / tv;
            return Ok(RatioReport {
                ratio,
                bound,
                tv,
                mass,
                steps: step,
                iterations,
                certified,
                u,
            });
        }
    }
    Err(Error::NotConverged {
        iterations,
        gap: f64::NAN,
    })
}

/// `1 - eps0` is the largest `|int_A H| / P(A)`; the margin reported is
/// `sup {eps : D(eps) >= -tol}` over both signs.
#[derive(Clone, Debug, Serialize)]
pub struct MarginReport {
    pub eps0: f64,
    /// Best quotient `sign int H u / TV(u)` per sign, when positive.
    pub quotient_plus: Option<f64>,
    pub quotient_minus: Option<f64>,
    pub certified: bool,
    pub iterations: usize,
}

fn margin(setup: &Setup, h_values: &[f64]) -> Result<MarginReport> {
    let mut eps0: f64 = 1.0;
    let mut quotients = [None, None];
    let mut certified = true;
    let mut iterations = 0;
    for (slot, sign) in Sign::BOTH.into_iter().enumerate() {
        let f: Vec<f64> = h_values.iter().map(|v| sign.value() * v).collect();
        if setup.mask.cells().all(|k| f[k] <= 0.0) {
            continue;
        }
        let r = max_ratio(setup, &f)?;
        iterations += r.iterations;
        certified &= r.certified;
        quotients[slot] = Some(r.ratio);
        // (1 - eps - mu) TV(u*) >= -tol at the optimal u*
        let e = 1.0 - r.ratio + setup.tol / r.tv;
        eps0 = eps0.min(e);
    }
    Ok(MarginReport {
        eps0: eps0.clamp(0.0, 1.0),
        quotient_plus: quotients[0],
        quotient_minus: quotients[1],
        certified,
        iterations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PairClass {
    Strict,
    Extremal,
    Violated,
}

impl std::fmt::Display for PairClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PairClass::Strict => "strict",
            PairClass::Extremal => "extremal",
            PairClass::Violated => "violated",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Classification {
    pub class: PairClass,
    /// Present for strict (positive) and extremal (zero) pairs.
    pub eps0: Option<f64>,
    pub total_curvature: f64,
    pub perimeter: f64,
    pub tol: f64,
    /// Why the pair was classified as it was.
    pub reason: String,
    pub deficits: Vec<DeficitReport>,
    pub margin: Option<MarginReport>,
}

pub fn classify(mask: &DomainMask, curvature: &CurvatureSpec) -> Result<Classification> {
    classify_with(mask, curvature, &ExtremalityOptions::default())
}

pub fn classify_with(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    opts: &ExtremalityOptions,
) -> Result<Classification> {
    let setup = Setup::new(mask, opts);
    let hv = curvature.values_on(mask)?;
    let total = mask.cells().map(|k| hv[k]).sum::<f64>() * mask.grid().cell_area();
    let (p, tol) = (setup.perimeter, setup.tol);

    let mut deficits = Vec::new();
    let mut proper_violation = None;
    for sign in Sign::BOTH {
        let rep = deficit(&setup, &hv, 0.0, sign, None)?;
        if rep.violating() && !setup.trivial(&rep.threshold.inside) && proper_violation.is_none() {
            proper_violation = Some(format!(
                "{sign:?} run: D = {:.4e} < -tol, threshold set with P = {:.4}, area = {:.4}",
                rep.value, rep.threshold.perimeter, rep.threshold.area
            ));
        }
        deficits.push(rep);
    }

    let done = |class, eps0, reason: String, margin| -> Result<Classification> {
        info!("classification {class}: {reason}");
        Ok(Classification {
            class,
            eps0,
            total_curvature: total,
            perimeter: p,
            tol,
            reason,
            deficits: deficits.clone(),
            margin,
        })
    };
    if let Some(reason) = proper_violation {
        return done(PairClass::Violated, None, reason, None);
    }
    if total.abs() > p + tol {
        let reason = format!("|int H| = {:.6} exceeds P = {p:.6} by more than tol", total.abs());
        return done(PairClass::Violated, None, reason, None);
    }
    if (total.abs() - p).abs() <= tol {
        let reason = format!("|int H| = {:.6} matches P = {p:.6} within tol = {tol:.2e}", total.abs());
        return done(PairClass::Extremal, Some(0.0), reason, None);
    }
    if !opts.margin {
        return done(PairClass::Strict, None, "no violating subset".into(), None);
    }
    let m = margin(&setup, &hv)?;
    let reason = format!("no violating subset; margin eps0 = {:.5}", m.eps0);
    done(PairClass::Strict, Some(m.eps0), reason, Some(m))
}

/// Margin `eps0` with `|int_A H| <= (1 - eps0) P(A)` for all `A`; zero for
/// extremal pairs and one when `H` vanishes on the domain.
pub fn epsilon0(mask: &DomainMask, curvature: &CurvatureSpec) -> Result<f64> {
    epsilon0_with(mask, curvature, &ExtremalityOptions::default())
}

pub fn epsilon0_with(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    opts: &ExtremalityOptions,
) -> Result<f64> {
    let hv = curvature.values_on(mask)?;
    if mask.cells().all(|k| hv[k] == 0.0) {
        return Ok(1.0);
    }
    let c = classify_with(mask, curvature, opts)?;
    match c.class {
        PairClass::Violated => Err(Error::PairViolated),
        _ => Ok(c.eps0.unwrap_or(0.0)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheegerResult {
    /// Estimate of `min P(A) / |A|`.
    pub h: f64,
    /// Certified interval for the relaxed constant.
    pub bracket: [f64; 2],
    /// Contour perimeter over area of the extracted set.
    pub quotient: f64,
    pub set_perimeter: f64,
    pub set_area: f64,
    pub steps: usize,
    pub iterations: usize,
    #[serde(skip)]
    pub set: DomainMask,
    #[serde(skip)]
    pub minimizer: RelaxedIndicator,
}

/// Cheeger constant `2 / R` of a disk.
pub fn cheeger_constant_disk(radius: f64) -> f64 {
    2.0 / radius
}

/// Cheeger constant `(4 - pi) / ((2 - sqrt(pi)) s)` of a square of side `s`.
/// The Cheeger set is the square with its corners rounded at radius `1/h`.
pub fn cheeger_constant_square(side: f64) -> f64 {
    (4.0 - PI) / ((2.0 - PI.sqrt()) * side)
}

/// Cheeger constant by the ratio iteration on `min TV(u) - lambda int u`.
pub fn cheeger(mask: &DomainMask) -> Result<CheegerResult> {
    cheeger_with(mask, &ExtremalityOptions::default())
}

pub fn cheeger_with(mask: &DomainMask, opts: &ExtremalityOptions) -> Result<CheegerResult> {
    let setup = Setup::new(mask, opts);
    let ones: Vec<f64> = (0..mask.grid().len())
        .map(|k| if mask.contains(k) { 1.0 } else { 0.0 })
        .collect();
    // max int u / TV(u) is the reciprocal of the constant
    let r = max_ratio(&setup, &ones)?;
    if !r.certified {
        return Err(Error::NotConverged {
            iterations: r.iterations,
            gap: r.bound - r.ratio,
        });
    }
    let h = 1.0 / r.ratio;
    let bracket = [1.0 / r.bound, h];
    let g = *mask.grid();
    let above: Vec<bool> = r.u.iter().map(|&v| v > 0.5).collect();
    let (set, _) = largest_component(&g, &above);
    let set = DomainMask::new(g, set)?;
    let set_perimeter = binary_perimeter(&g, set.inside(), None);
    let set_area = set.area();
    info!("cheeger: h = {h:.6}, bracket [{:.6}, {:.6}]", bracket[0], bracket[1]);
    Ok(CheegerResult {
        h,
        bracket,
        quotient: set_perimeter / set_area,
        set_perimeter,
        set_area,
        steps: r.steps,
        iterations: r.iterations,
        set,
        minimizer: RelaxedIndicator::new(mask, r.u)?,
    })
}

/// `H = P(Omega) / |Omega|` together with the classification of the pair.
#[derive(Clone, Debug, Serialize)]
pub struct NormalizedCurvature {
    pub value: f64,
    pub classification: Classification,
    /// Whether the normalization produced an extremal pair.
    pub extremal: bool,
    #[serde(skip)]
    pub curvature: CurvatureSpec,
}

pub fn normalized_extremal_curvature(mask: &DomainMask) -> Result<NormalizedCurvature> {
    normalized_extremal_curvature_with(mask, &ExtremalityOptions::default())
}

pub fn normalized_extremal_curvature_with(
    mask: &DomainMask,
    opts: &ExtremalityOptions,
) -> Result<NormalizedCurvature> {
    let value = binary_perimeter(mask.grid(), mask.inside(), None) / mask.area();
    let curvature = CurvatureSpec::Constant(value);
    let classification = classify_with(mask, &curvature, opts)?;
    Ok(NormalizedCurvature {
        value,
        extremal: classification.class == PairClass::Extremal,
        classification,
        curvature,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    fn disk(radius: f64, h: f64) -> DomainMask {
        let g = Grid::covering([-radius, -radius], [radius, radius], h, 4).unwrap();
        rasterize(&AnalyticDomain::disk([0.0, 0.0], radius).unwrap(), &g).unwrap()
    }

    fn unit_square(h: f64) -> DomainMask {
        let g = Grid::covering([0.0, 0.0], [1.0, 1.0], h, 4).unwrap();
        rasterize(&AnalyticDomain::square([0.0, 0.0], 1.0).unwrap(), &g).unwrap()
    }

    #[test]
    fn total_curvature_examples() {
        let m = disk(1.0, 1.0 / 128.0);
        let t = total_curvature(&m, &CurvatureSpec::Constant(2.0)).unwrap();
        assert!((t - 2.0 * PI).abs() < 0.01 * 2.0 * PI);
        assert_eq!(total_curvature(&m, &CurvatureSpec::Constant(0.0)).unwrap(), 0.0);

        let b = unit_square(1.0 / 128.0);
        let field = ScalarField::from_fn(*b.grid(), |p| p[0]);
        let t = total_curvature(&b, &CurvatureSpec::field(field, true)).unwrap();
        assert!((t - 0.5).abs() < 0.005, "{t}");
    }

    #[test]
    fn curvature_field_is_validated() {
        let m = disk(1.0, 1.0 / 32.0);
        let mut field = ScalarField::constant(*m.grid(), 1.0);
        let k = m.cells().next().unwrap();
        field.values[k] = f64::NAN;
        assert!(total_curvature(&m, &CurvatureSpec::field(field, true)).is_err());
        let other = ScalarField::constant(Grid::new(16, 16, 0.1, [0.0, 0.0]).unwrap(), 1.0);
        assert!(matches!(
            total_curvature(&m, &CurvatureSpec::field(other, true)),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn deficit_on_the_disk() {
        let m = disk(1.0, 1.0 / 64.0);
        let two = CurvatureSpec::Constant(2.0);
        let d = subset_deficit(&m, &two, 0.0, Sign::Plus).unwrap();
        assert!(d.value <= 0.0 && d.value >= -d.tol, "{}", d.value);

        let d = subset_deficit(&m, &CurvatureSpec::Constant(1.9), 0.04, Sign::Plus).unwrap();
        assert!(d.value >= -d.tol && d.certified_nonnegative());

        let d = subset_deficit(&m, &two, 0.05, Sign::Plus).unwrap();
        assert!(d.violating());
        let missing = m.cells().filter(|&k| !d.threshold.inside[k]).count() as f64;
        assert!(missing * m.grid().cell_area() < 0.02 * m.area());
        // the threshold set violates the set inequality as well
        assert!(d.threshold.excess > -2.0 * d.tol);
    }

    #[test]
    fn deficit_of_the_opposite_sign_is_trivial() {
        let m = disk(1.0, 1.0 / 32.0);
        let d = subset_deficit(&m, &CurvatureSpec::Constant(3.0), 0.0, Sign::Minus).unwrap();
        assert_eq!((d.value, d.iterations), (0.0, 0));
    }

    #[test]
    fn deficit_rejects_bad_eps() {
        let m = disk(1.0, 1.0 / 32.0);
        let h = CurvatureSpec::Constant(1.0);
        assert!(subset_deficit(&m, &h, 1.0, Sign::Plus).is_err());
        assert!(subset_deficit(&m, &h, -0.1, Sign::Plus).is_err());
    }

    #[test]
    fn deficit_is_monotone_in_eps() {
        let m = unit_square(1.0 / 48.0);
        let h = CurvatureSpec::Constant(4.2);
        let d: Vec<f64> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&e| subset_deficit(&m, &h, e, Sign::Plus).unwrap().value)
            .collect();
        assert!(d[0] >= d[1] - 1e-3 && d[1] >= d[2] - 1e-3, "{d:?}");
        assert!(d[0] < 0.0);
    }

    #[test]
    fn square_closed_form_is_the_rounded_square_quotient() {
        // rounded square with corner radius r: P = 4 - (8 - 2 pi) r, A = 1 - (4 - pi) r^2;
        // the Cheeger radius solves P r = A
        let (a, b, c) = (4.0 - PI, -4.0, 1.0);
        let r = (-b - (b * b - 4.0 * a * c).sqrt()) / (2.0 * a);
        let q = (4.0 - (8.0 - 2.0 * PI) * r) / (1.0 - (4.0 - PI) * r * r);
        assert!((q - 1.0 / r).abs() < 1e-12);
        assert!((cheeger_constant_square(1.0) - q).abs() < 1e-12);
        assert!((cheeger_constant_square(1.0) - 3.7724).abs() < 1e-4);
        assert!((cheeger_constant_square(2.0) - q / 2.0).abs() < 1e-12);
        assert_eq!(cheeger_constant_disk(0.5), 4.0);
    }

    #[test]
    fn cheeger_disk_and_scaling() {
        let small = cheeger(&disk(1.0, 1.0 / 64.0)).unwrap();
        assert!((small.h - 2.0).abs() < 0.04, "{}", small.h);
        assert!(small.bracket[0] <= small.h && small.h <= small.bracket[1]);
        assert!(small.quotient >= small.h * 0.98);
        // same raster at twice the size
        let big = cheeger(&disk(2.0, 1.0 / 32.0)).unwrap();
        assert!((big.h - small.h / 2.0).abs() < 0.02 * small.h / 2.0);
    }

    #[test]
    fn cheeger_brackets_the_relaxed_problem() {
        let m = disk(1.0, 1.0 / 48.0);
        let c = cheeger(&m).unwrap();
        let tol = classification_tol(&m);
        let ro = RelaxOptions {
            max_iter: 20_000,
            gap_tol: 1e-5,
            certify_tol: Some(tol),
            violation_tol: Some(tol),
            check_every: 64,
        };
        let at = |lambda: f64| {
            let f = vec![lambda; m.grid().len()];
            solve_relaxed(&m, &f, 1.0, &ro, None)
        };
        assert!(at(c.h - 0.05).dual >= -tol);
        assert!(at(c.h + 0.05).primal <= -tol);
    }

    #[test]
    fn classification_examples() {
        let m = disk(1.0, 1.0 / 64.0);
        let c = classify(&m, &CurvatureSpec::Constant(2.0)).unwrap();
        assert_eq!(c.class, PairClass::Extremal);
        assert_eq!(c.eps0, Some(0.0));
        let c = classify(&m, &CurvatureSpec::Constant(-2.0)).unwrap();
        assert_eq!(c.class, PairClass::Extremal);
        let c = classify(&m, &CurvatureSpec::Constant(2.2)).unwrap();
        assert_eq!(c.class, PairClass::Violated);

        let s = unit_square(1.0 / 128.0);
        for h in [4.2, -4.2] {
            let c = classify(&s, &CurvatureSpec::Constant(h)).unwrap();
            assert_eq!(c.class, PairClass::Violated);
        }
    }

    #[test]
    fn margin_matches_the_cheeger_route() {
        let m = disk(1.0, 1.0 / 64.0);
        let e = epsilon0(&m, &CurvatureSpec::Constant(1.9)).unwrap();
        let c = cheeger(&m).unwrap();
        let tol = classification_tol(&m);
        let perimeter = binary_perimeter(m.grid(), m.inside(), None);
        let expected = 1.0 - 1.9 / c.h;
        assert!((e - expected).abs() <= 2.0 * tol / perimeter + 1e-3, "{e} vs {expected}");
    }

    #[test]
    fn margin_degenerate_cases() {
        let m = disk(1.0, 1.0 / 32.0);
        assert_eq!(epsilon0(&m, &CurvatureSpec::Constant(0.0)).unwrap(), 1.0);
        assert!(epsilon0(&m, &CurvatureSpec::Constant(2.0)).unwrap().abs() < 0.01);
        assert!(matches!(
            epsilon0(&m, &CurvatureSpec::Constant(2.5)),
            Err(Error::PairViolated)
        ));
    }

    #[test]
    fn normalized_curvature() {
        let n = normalized_extremal_curvature(&disk(1.0, 1.0 / 64.0)).unwrap();
        assert!((n.value - 2.0).abs() < 0.04);
        assert!(n.extremal);
        let n = normalized_extremal_curvature(&unit_square(1.0 / 256.0)).unwrap();
        assert!((n.value - 4.0).abs() < 0.08);
        assert_eq!(n.classification.class, PairClass::Violated);
        assert!(!n.extremal);
    }
}
