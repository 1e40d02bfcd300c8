//! Extremal pairs: Dirichlet solves on interior approximations, vertically
//! renormalized by their area medians.

use std::collections::VecDeque;

use log::info;
use serde::Serialize;

use super::{dirichlet_core, energy_nonincreasing, lower_bound_probe, median_normalize, HeightField, Seed, SolveConfig};
use crate::error::{Error, Result};
use crate::extremality::{classify_with, CurvatureSpec, ExtremalityOptions, PairClass};
use crate::geometry::approx::{build_ladder, geometric_schedule};
use crate::geometry::mask::DomainMask;
use crate::grid::Grid;

#[derive(Clone, Debug, Serialize)]
pub struct LadderStep {
    pub t: f64,
    /// Area median subtracted from the raw level solution.
    pub shift: f64,
    pub energy: f64,
    pub residual: f64,
    pub lower_bound: f64,
    /// Distance to the previous level on the compact.
    pub epigraph_distance: Option<f64>,
    pub area: f64,
    pub iterations: usize,
    pub cg_iterations: usize,
    pub n_plus_cells: usize,
    pub n_minus_cells: usize,
    /// Whether the Newton energies never increased by more than `1e-10`.
    pub energy_monotone: bool,
    /// Median-normalized level solution.
    #[serde(skip)]
    pub field: HeightField,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtremalResult {
    pub steps: Vec<LadderStep>,
    /// Median-normalized solution on the whole domain, started from the
    /// last level.
    #[serde(skip)]
    pub limit: HeightField,
    pub limit_energy: f64,
    pub limit_residual: f64,
    pub limit_iterations: usize,
    pub limit_energy_monotone: bool,
    #[serde(skip)]
    pub n_plus: Vec<bool>,
    #[serde(skip)]
    pub n_minus: Vec<bool>,
    pub n_plus_cells: usize,
    pub n_minus_cells: usize,
    pub m_cap: f64,
    /// Exterior datum of every level.
    pub datum: f64,
    /// Area of the first level, the compact of the epigraph distances.
    pub compact_area: f64,
    pub epigraph_distances: Vec<f64>,
    /// Whether each distance is at most 1.2 times the previous one.
    pub epigraph_monotone: bool,
}

impl ExtremalResult {
    pub fn blow_up(&self) -> bool {
        self.n_plus_cells + self.n_minus_cells > 0
    }

    /// Cells of the first level.
    pub fn compact(&self) -> &DomainMask {
        &self.steps[0].field.mask
    }
}

fn check_extremal(mask: &DomainMask, curvature: &CurvatureSpec) -> Result<PairClass> {
    let opts = ExtremalityOptions {
        margin: false,
        ..Default::default()
    };
    Ok(classify_with(mask, curvature, &opts)?.class)
}

pub fn solve_extremal(mask: &DomainMask, curvature: &CurvatureSpec, cfg: &SolveConfig) -> Result<ExtremalResult> {
    solve_extremal_from(mask, curvature, cfg, Seed::Zero)
}

/// As [`solve_extremal`], starting the first level from `seed`.
pub fn solve_extremal_from(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    cfg: &SolveConfig,
    seed: Seed,
) -> Result<ExtremalResult> {
    let cap = cfg.resolve_cap(mask)?;
    let class = check_extremal(mask, curvature)?;
    if class != PairClass::Extremal {
        return Err(Error::RefusedPair {
            classification: class.to_string(),
            expected: PairClass::Extremal.to_string(),
        });
    }
    ladder(mask, &curvature.values_on(mask)?, cfg, cap, seed)
}

/// Copies `values` from `source` to the cells of `target`, each new cell
/// taking the value of its nearest source cell in breadth-first order.
fn extend_nearest(grid: &Grid, values: &mut [f64], source: &[bool], target: &[bool]) {
    let mut done = source.to_vec();
    let mut queue: VecDeque<usize> = (0..grid.len()).filter(|&k| source[k]).collect();
    while let Some(k) = queue.pop_front() {
        let (i, j) = grid.ij(k);
        for (di, dj) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            if a < 0 || b < 0 || a >= grid.nx as i64 || b >= grid.ny as i64 {
                continue;
            }
            let n = grid.idx(a as usize, b as usize);
            if target[n] && !done[n] {
                done[n] = true;
                values[n] = values[k];
                queue.push_back(n);
            }
        }
    }
}

/// `h^2 sum_K |clamp(a) - clamp(b)|` with heights clamped to `[-cap, cap]`:
/// the measure of the symmetric difference of the truncated epigraphs over
/// the compact `K`.
pub fn epigraph_distance(a: &[f64], b: &[f64], compact: &DomainMask, cap: f64) -> f64 {
    compact
        .cells()
        .map(|k| (a[k].clamp(-cap, cap) - b[k].clamp(-cap, cap)).abs())
        .sum::<f64>()
        * compact.grid().cell_area()
}

fn ladder(mask: &DomainMask, hv: &[f64], cfg: &SolveConfig, cap: f64, seed: Seed) -> Result<ExtremalResult> {
    let g = *mask.grid();
    let schedule = geometric_schedule(cfg.ladder_t0_cells * g.h, cfg.ladder_levels);
    let levels = build_ladder(mask, &schedule)?.levels;
    let mut steps: Vec<LadderStep> = Vec::with_capacity(levels.len());
    let mut raw: Option<Vec<f64>> = None;
    let mut n_plus = vec![false; g.len()];
    let mut n_minus = vec![false; g.len()];
    for (j, level) in levels.iter().enumerate() {
        let lm = &level.mask;
        let mut u = vec![0.0; g.len()];
        match &raw {
            None => seed.fill(lm.cells(), &mut u),
            Some(prev) => {
                let source = levels[j - 1].mask.inside();
                for k in levels[j - 1].mask.cells() {
                    u[k] = prev[k];
                }
                extend_nearest(&g, &mut u, source, lm.inside());
            }
        }
        let rep = dirichlet_core(lm, hv, u, cfg)?;
        if !rep.converged {
            return Err(Error::NotConverged {
                iterations: rep.iterations,
                gap: rep.decrement,
            });
        }
        let values = rep.field.u.values.clone();
        let (mut np, mut nm) = (0, 0);
        for k in lm.cells() {
            if values[k] > cap {
                n_plus[k] = true;
                np += 1;
            } else if values[k] < -cap {
                n_minus[k] = true;
                nm += 1;
            }
        }
        let (field, shift) = median_normalize(&rep.field, lm)?;
        let epigraph = steps
            .last()
            .map(|prev| epigraph_distance(&prev.field.u.values, &field.u.values, &levels[0].mask, cap));
        info!(
            "ladder level t = {:.5}: shift {shift:.6}, energy {:.8}, newton {}, cg {}",
            level.t, rep.final_energy, rep.iterations, rep.cg_iterations
        );
        steps.push(LadderStep {
            t: level.t,
            shift,
            energy: rep.final_energy,
            residual: rep.residual,
            lower_bound: lower_bound_probe(&field, lm),
            epigraph_distance: epigraph,
            area: level.area,
            iterations: rep.iterations,
            cg_iterations: rep.cg_iterations,
            n_plus_cells: np,
            n_minus_cells: nm,
            energy_monotone: energy_nonincreasing(&rep.energies, 1e-10),
            field,
        });
        raw = Some(values);
    }

    let last_mask = &levels[levels.len() - 1].mask;
    let mut u = vec![0.0; g.len()];
    let prev = raw.expect("non-empty ladder");
    for k in last_mask.cells() {
        u[k] = prev[k];
    }
    extend_nearest(&g, &mut u, last_mask.inside(), mask.inside());
    let closing = dirichlet_core(mask, hv, u, cfg)?;
    if !closing.converged {
        return Err(Error::NotConverged {
            iterations: closing.iterations,
            gap: closing.decrement,
        });
    }
    let (limit, _) = median_normalize(&closing.field, mask)?;
    let epigraph_distances: Vec<f64> = steps.iter().filter_map(|s| s.epigraph_distance).collect();
    let epigraph_monotone = epigraph_distances.windows(2).all(|w| w[1] <= 1.2 * w[0]);
    let count = |v: &[bool]| v.iter().filter(|&&b| b).count();
    Ok(ExtremalResult {
        n_plus_cells: count(&n_plus),
        n_minus_cells: count(&n_minus),
        n_plus,
        n_minus,
        m_cap: cap,
        datum: 0.0,
        compact_area: levels[0].area,
        epigraph_distances,
        epigraph_monotone,
        limit,
        limit_energy: closing.final_energy,
        limit_residual: closing.residual,
        limit_iterations: closing.iterations,
        limit_energy_monotone: energy_nonincreasing(&closing.energies, 1e-10),
        steps,
    })
}

/// Largest sup-distance on the first ladder level between the
/// median-normalized solutions started from `seeds`. Extremal pairs go
/// through the ladder, strict pairs through the Dirichlet solve.
pub fn uniqueness_probe(
    mask: &DomainMask,
    curvature: &CurvatureSpec,
    cfg: &SolveConfig,
    seeds: &[Seed],
) -> Result<f64> {
    if seeds.len() < 2 {
        return Ok(0.0);
    }
    let cap = cfg.resolve_cap(mask)?;
    let hv = curvature.values_on(mask)?;
    let class = check_extremal(mask, curvature)?;
    let g = *mask.grid();
    let compact = build_ladder(mask, &[cfg.ladder_t0_cells * g.h])?.levels.remove(0).mask;
    let mut fields = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let u = match class {
            PairClass::Extremal => ladder(mask, &hv, cfg, cap, seed)?.limit,
            PairClass::Strict => {
                let mut u = cfg.phi.values(&g)?;
                seed.fill(mask.cells(), &mut u);
                let rep = dirichlet_core(mask, &hv, u, cfg)?;
                if !rep.converged {
                    return Err(Error::NotConverged {
                        iterations: rep.iterations,
                        gap: rep.decrement,
                    });
                }
                rep.field
            }
            PairClass::Violated => {
                return Err(Error::RefusedPair {
                    classification: class.to_string(),
                    expected: "strict or extremal".into(),
                })
            }
        };
        fields.push(median_normalize(&u, mask)?.0);
    }
    let mut worst: f64 = 0.0;
    for a in 0..fields.len() {
        for b in a + 1..fields.len() {
            for k in compact.cells() {
                worst = worst.max((fields[a].u.values[k] - fields[b].u.values[k]).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;
    use crate::grid::{dot, ScalarField};

    fn disk(h: f64) -> DomainMask {
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], h, 3).unwrap();
        rasterize(&AnalyticDomain::unit_disk(), &g).unwrap()
    }

    #[test]
    fn nearest_extension_fills_the_target() {
        let g = Grid::new(10, 10, 0.1, [0.0, 0.0]).unwrap();
        let source: Vec<bool> = (0..g.len()).map(|k| g.ij(k) == (4, 4)).collect();
        let target = vec![true; g.len()];
        let mut v = vec![0.0; g.len()];
        v[g.idx(4, 4)] = 3.0;
        extend_nearest(&g, &mut v, &source, &target);
        assert!(v.iter().all(|&x| x == 3.0));
    }

    #[test]
    fn hemisphere_limit() {
        let m = disk(1.0 / 128.0);
        let res = solve_extremal(&m, &2.0.into(), &SolveConfig::default()).unwrap();
        assert!(!res.blow_up());
        let (exact, _) = median_normalize(
            &HeightField::from_fn(&m, &0.0.into(), |p| -(1.0 - dot(p, p)).max(0.0).sqrt()).unwrap(),
            &m,
        )
        .unwrap();
        let g = *m.grid();
        let err = m
            .cells()
            .filter(|&k| dot(g.center_of(k), g.center_of(k)) <= 0.81)
            .map(|k| (res.limit.u.values[k] - exact.u.values[k]).abs())
            .fold(0.0, f64::max);
        assert!(err <= 0.02, "{err}");
        let lows: Vec<f64> = res.steps.iter().map(|s| s.lower_bound).collect();
        let spread = lows.iter().cloned().fold(f64::MIN, f64::max) - lows.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread <= 0.05, "{lows:?}");
    }

    #[test]
    fn reflected_curvature_reflects_the_limit() {
        let m = disk(1.0 / 48.0);
        let cfg = SolveConfig::default();
        let up = solve_extremal(&m, &2.0.into(), &cfg).unwrap();
        let down = solve_extremal(&m, &(-2.0).into(), &cfg).unwrap();
        let (a, _) = median_normalize(&up.limit, &m).unwrap();
        let (b, _) = median_normalize(&down.limit, &m).unwrap();
        let flipped = HeightField::new(
            &m,
            ScalarField::from_values(*m.grid(), b.u.values.iter().map(|v| -v).collect()).unwrap(),
        )
        .unwrap();
        let (c, _) = median_normalize(&flipped, &m).unwrap();
        let diff = m.cells().map(|k| (a.u.values[k] - c.u.values[k]).abs()).fold(0.0, f64::max);
        assert!(diff <= 2.0 * m.grid().h, "{diff}");
    }

    #[test]
    fn strict_pair_is_refused() {
        let m = disk(1.0 / 48.0);
        let err = solve_extremal(&m, &1.5.into(), &SolveConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "refused-pair");
    }

    #[test]
    fn single_seed_probe_is_zero() {
        let m = disk(1.0 / 32.0);
        assert_eq!(uniqueness_probe(&m, &2.0.into(), &SolveConfig::default(), &[Seed::Zero]).unwrap(), 0.0);
    }
}
