//! Hole-filling experiment on porous disks.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::checks::{self, Check};
use super::tasks::{cap_oracle, Outcome};
use super::{DomainSpec, Run, ScenarioConfig};
use crate::error::{Error, Result};
use crate::extremality::normalized_extremal_curvature;
use crate::geometry::domain::{AnalyticDomain, Hole};
use crate::geometry::mask::{rasterize, DomainMask};
use crate::grid::{Grid, Point};
use crate::io::{self, ErrorRecord};
use crate::solver::{epigraph_distance, solve_extremal_from, HeightField, Seed, SolveConfig};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillOrder {
    #[default]
    SmallestFirst,
    LargestFirst,
    /// Hole indices in the order of the domain's hole list.
    Given(Vec<usize>),
}

fn default_compact() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityTask {
    #[serde(default)]
    pub fill_order: FillOrder,
    /// Radius of the compact disk `K` about the origin.
    #[serde(default = "default_compact")]
    pub compact_radius: f64,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default = "zero_seed")]
    pub start: Seed,
}

fn zero_seed() -> Seed {
    Seed::Zero
}

impl Default for StabilityTask {
    fn default() -> Self {
        StabilityTask {
            fill_order: FillOrder::default(),
            compact_radius: default_compact(),
            solver: SolveConfig::default(),
            start: Seed::Zero,
        }
    }
}

impl StabilityTask {
    pub(crate) fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if !matches!(cfg.domain, DomainSpec::SwissCheese { .. } | DomainSpec::DiskMinusBalls { .. }) {
            return Err(Error::Config("stability needs a swiss_cheese or disk_minus_balls domain".into()));
        }
        if !(self.compact_radius > 0.0) {
            return Err(Error::Config("compact radius must be positive".into()));
        }
        let n = cfg.domain.analytic()?.map_or(0, |d| d.holes().len());
        if let FillOrder::Given(order) = &self.fill_order {
            fill_sequence(&vec![Hole { center: [0.0; 2], radius: 1.0 }; n], &self.fill_order)?;
            if order.len() != n {
                return Err(Error::Config(format!("fill order lists {} of {n} holes", order.len())));
            }
        }
        Ok(())
    }
}

fn fill_sequence(holes: &[Hole], order: &FillOrder) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..holes.len()).collect();
    match order {
        FillOrder::SmallestFirst => idx.sort_by(|&a, &b| holes[a].radius.total_cmp(&holes[b].radius)),
        FillOrder::LargestFirst => idx.sort_by(|&a, &b| holes[b].radius.total_cmp(&holes[a].radius)),
        FillOrder::Given(v) => {
            let mut seen = vec![false; holes.len()];
            for &i in v {
                if i >= holes.len() || seen[i] {
                    return Err(Error::Config(format!("fill order entry {i} is out of range or repeated")));
                }
                seen[i] = true;
            }
            idx = v.clone();
        }
    }
    Ok(idx)
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityStep {
    pub step: usize,
    /// Hole filled to reach this step.
    pub filled: Option<usize>,
    pub holes_left: usize,
    pub area: f64,
    pub perimeter: f64,
    /// `P / |Omega|` of the rasterized step domain.
    pub curvature: f64,
    pub classification: String,
    pub extremal: bool,
    pub warnings: Vec<String>,
    pub solver_error: Option<String>,
    pub limit_energy: Option<f64>,
    pub energy_monotone: Option<bool>,
    /// Distance to the previous solved step on `K`.
    pub distance_prev: Option<f64>,
    /// Distance to the last solved step on `K`.
    pub distance_final: Option<f64>,
    #[serde(skip)]
    pub mask: Option<DomainMask>,
    #[serde(skip)]
    pub field: Option<HeightField>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub order: Vec<usize>,
    pub steps: Vec<StabilityStep>,
    /// Step at which the classification was not extremal.
    pub stopped_at: Option<usize>,
    pub compact_radius: f64,
    pub compact_area: f64,
    pub m_cap: f64,
    /// Distance from the last solved step to the cap of the same curvature.
    pub final_oracle_distance: Option<f64>,
    /// Whether each distance to the last step is at most 1.2 times the
    /// previous one.
    pub distances_nonincreasing: bool,
    pub completed: bool,
}

fn run_step(
    step: usize,
    holes: &[Hole],
    filled: Option<usize>,
    grid: &Grid,
    task: &StabilityTask,
) -> Result<StabilityStep> {
    let dom = AnalyticDomain::disk_minus_balls(1.0, holes.to_vec())?;
    let mask = rasterize(&dom, grid)?;
    let nc = normalized_extremal_curvature(&mask)?;
    let mut out = StabilityStep {
        step,
        filled,
        holes_left: holes.len(),
        area: mask.area(),
        perimeter: nc.classification.perimeter,
        curvature: nc.value,
        classification: nc.classification.class.to_string(),
        extremal: nc.extremal,
        warnings: mask.warnings().to_vec(),
        solver_error: None,
        limit_energy: None,
        energy_monotone: None,
        distance_prev: None,
        distance_final: None,
        mask: None,
        field: None,
    };
    if nc.extremal {
        match solve_extremal_from(&mask, &nc.curvature, &task.solver, task.start) {
            Ok(res) => {
                out.limit_energy = Some(res.limit_energy);
                out.energy_monotone =
                    Some(res.limit_energy_monotone && res.steps.iter().all(|s| s.energy_monotone));
                out.field = Some(res.limit);
            }
            Err(e) => out.solver_error = Some(e.to_string()),
        }
    }
    out.mask = Some(mask);
    Ok(out)
}

/// Fills the holes of `domain` one at a time, solving the extremal problem
/// for `H_j = P(Omega_j) / |Omega_j|` on every intermediate domain, and
/// measures the epigraph distances between the median-normalized solutions
/// on the disk `K` of radius `compact_radius`. Stops at the first domain
/// whose normalized pair is not extremal. Steps run on up to `threads`
/// workers; the report does not depend on the thread count.
pub fn stability_experiment(
    domain: &AnalyticDomain,
    grid: &Grid,
    task: &StabilityTask,
    threads: usize,
) -> Result<StabilityReport> {
    let holes = domain.holes().to_vec();
    let order = fill_sequence(&holes, &task.fill_order)?;
    let plan: Vec<(Vec<Hole>, Option<usize>)> = (0..=order.len())
        .map(|j| {
            let left = holes
                .iter()
                .enumerate()
                .filter(|(i, _)| !order[..j].contains(i))
                .map(|(_, h)| *h)
                .collect();
            (left, if j == 0 { None } else { Some(order[j - 1]) })
        })
        .collect();

    let mut steps: Vec<StabilityStep> = Vec::new();
    if threads <= 1 {
        for (j, (left, filled)) in plan.iter().enumerate() {
            let s = run_step(j, left, *filled, grid, task)?;
            let stop = !s.extremal;
            steps.push(s);
            if stop {
                break;
            }
        }
    } else {
        let mut slots: Vec<Option<Result<StabilityStep>>> = (0..plan.len()).map(|_| None).collect();
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads.min(plan.len()))
                .map(|w| {
                    let plan = &plan;
                    scope.spawn(move || {
                        (w..plan.len())
                            .step_by(threads)
                            .map(|j| (j, run_step(j, &plan[j].0, plan[j].1, grid, task)))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            for h in handles {
                for (j, r) in h.join().expect("stability worker panicked") {
                    slots[j] = Some(r);
                }
            }
        });
        for slot in slots {
            let s = slot.expect("every step assigned")?;
            let stop = !s.extremal;
            steps.push(s);
            if stop {
                break;
            }
        }
    }
    let stopped_at = steps.iter().find(|s| !s.extremal).map(|s| s.step);

    let final_mask = steps.last().and_then(|s| s.mask.clone()).expect("at least one step");
    let m_cap = task.solver.resolve_cap(&final_mask)?;
    let center: Point = [0.0, 0.0];
    let compact = DomainMask::from_predicate(*grid, |p| {
        crate::grid::dist(p, center) <= task.compact_radius
    })?;
    let compact = DomainMask::new(
        *grid,
        (0..grid.len())
            .map(|k| compact.contains(k) && steps.iter().all(|s| s.mask.as_ref().is_some_and(|m| m.contains(k))))
            .collect(),
    )?;

    let solved: Vec<usize> = (0..steps.len()).filter(|&j| steps[j].field.is_some()).collect();
    let mut final_oracle_distance = None;
    if let Some(&last) = solved.last() {
        let uf = steps[last].field.clone().expect("solved");
        for w in solved.windows(2) {
            let (a, b) = (steps[w[0]].field.as_ref().unwrap(), steps[w[1]].field.as_ref().unwrap());
            steps[w[1]].distance_prev = Some(epigraph_distance(a.values(), b.values(), &compact, m_cap));
        }
        for &j in &solved {
            let u = steps[j].field.as_ref().unwrap();
            steps[j].distance_final = Some(epigraph_distance(u.values(), uf.values(), &compact, m_cap));
        }
        if steps[last].holes_left == 0 {
            let mask = steps[last].mask.as_ref().unwrap();
            let w = cap_oracle(mask, center, 1.0, steps[last].curvature)?;
            final_oracle_distance = Some(epigraph_distance(uf.values(), w.values(), &compact, m_cap));
        }
    }
    let dists: Vec<f64> = solved.iter().filter_map(|&j| steps[j].distance_final).collect();
    let distances_nonincreasing = dists.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    Ok(StabilityReport {
        completed: stopped_at.is_none() && steps.len() == plan.len(),
        order,
        compact_area: compact.area(),
        stopped_at,
        compact_radius: task.compact_radius,
        m_cap,
        final_oracle_distance,
        distances_nonincreasing,
        steps,
    })
}

pub(crate) fn run_stability(t: &StabilityTask, cfg: &ScenarioConfig, run: &mut Run) -> Result<Outcome> {
    let dom = cfg.domain.analytic()?.expect("analytic domain");
    let grid = cfg.grid_at(cfg.grid.h)?;
    run.default_value("fill_order", io::to_json_value(&t.fill_order)?);
    run.default_value("compact", json!(format!("disk of radius {} about the origin", t.compact_radius)));
    let rep = stability_experiment(&dom, &grid, t, run.threads)?;
    run.default_value("m_cap", json!(rep.m_cap));

    let mut soft = Vec::new();
    let mut checks: Vec<Check> = Vec::new();
    for s in &rep.steps {
        for w in &s.warnings {
            run.note(format!("step {}: {w}", s.step));
        }
        if let Some(m) = &s.mask {
            run.mask(&format!("mask_step{}.pgm", s.step), m)?;
        }
        if let Some(u) = &s.field {
            run.scalar(&format!("height_step{}", s.step), &u.u, s.mask.as_ref())?;
            checks.push(checks::tu_below_one(u));
        }
        if let Some(ok) = s.energy_monotone {
            checks.push(checks::energy_monotone(ok));
        }
        if let Some(e) = &s.solver_error {
            run.note(format!("step {}: solver failed: {e}", s.step));
            soft.push(ErrorRecord {
                stage: "solver".into(),
                kind: "step-failed".into(),
                message: format!("step {}: {e}", s.step),
            });
        }
        if !s.extremal {
            run.note(format!("step {}: normalized pair is {}, stopping", s.step, s.classification));
        }
    }
    let nan = f64::NAN;
    let rows: Vec<Vec<f64>> = rep
        .steps
        .iter()
        .map(|s| {
            vec![
                s.step as f64,
                s.holes_left as f64,
                s.curvature,
                s.area,
                s.perimeter,
                s.distance_prev.unwrap_or(nan),
                s.distance_final.unwrap_or(nan),
            ]
        })
        .collect();
    run.csv(
        "stability.csv",
        &["step", "holes_left", "curvature", "area", "perimeter", "distance_prev", "distance_final"],
        &rows,
    )?;
    let mut out = Outcome::new(io::to_json_value(&rep)?, checks);
    out.soft_errors = soft;
    Ok(out)
}
