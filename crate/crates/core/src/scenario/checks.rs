//! Structural invariants attached to every report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::mask::DomainMask;
use crate::grid::{norm, Grid};
use crate::solver::{area_median, tu_field, HeightField};
use crate::stencil::{centered_divergence, centered_gradient, divergence, gradient};
use crate::traces::TraceEstimate;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `value <= bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Check {
        Check {
            name: name.into(),
            value,
            bound,
            pass: value <= bound,
        }
    }

    pub fn flag(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            bound: 1.0,
            pass: ok,
        }
    }
}

/// `max |Tu|` over the whole grid, which must stay below one.
pub fn tu_below_one(u: &HeightField) -> Check {
    let sup = tu_field(u).values.iter().map(|&v| norm(v)).fold(0.0, f64::max);
    Check {
        name: "tu_below_one".into(),
        value: sup,
        bound: 1.0,
        pass: sup < 1.0,
    }
}

/// Relative defect of `<grad u, p> + <u, div p> = 0` for both stencil
/// pairs, with random `u, p` vanishing within two cells of the box edge.
pub fn adjointness(grid: &Grid, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior = |k: usize| {
        let (i, j) = grid.ij(k);
        i >= 2 && j >= 2 && i + 2 < grid.nx && j + 2 < grid.ny
    };
    let u: Vec<f64> = (0..grid.len())
        .map(|k| if interior(k) { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect();
    let p: Vec<[f64; 2]> = (0..grid.len())
        .map(|k| {
            if interior(k) {
                [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]
            } else {
                [0.0, 0.0]
            }
        })
        .collect();
    let defect = |gu: Vec<[f64; 2]>, dp: Vec<f64>| {
        let (mut s, mut scale) = (0.0, 0.0);
        for k in 0..grid.len() {
            let a = gu[k][0] * p[k][0] + gu[k][1] * p[k][1];
            let b = u[k] * dp[k];
            s += a + b;
            scale += a.abs() + b.abs();
        }
        (s / scale).abs()
    };
    let forward = defect(gradient(grid, &u), divergence(grid, &p));
    let centered = defect(centered_gradient(grid, &u), centered_divergence(grid, &p));
    Check::at_most("adjointness", forward.max(centered), 1e-12)
}

pub fn energy_monotone(ok: bool) -> Check {
    Check::flag("energy_monotone", ok)
}

/// Largest excess of an arc trace over `sup |xi|`, allowing the trace
/// estimator's 0.05 slack.
pub fn trace_sup_bound(trace: &TraceEstimate) -> Check {
    Check::at_most("trace_sup_bound", trace.max_abs() - trace.sup, 0.05)
}

/// `u(H)` against `-u(-H)` on the domain after removing the median offset.
pub fn equivariance(a: &HeightField, b: &HeightField, mask: &DomainMask, tol: f64) -> Check {
    let sum = HeightField {
        u: crate::grid::ScalarField {
            values: a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect(),
            ..a.u.clone()
        },
        mask: mask.clone(),
    };
    let m = area_median(&sum, mask);
    let worst = mask.cells().map(|k| (sum.u.values[k] - m).abs()).fold(0.0, f64::max);
    Check::at_most("equivariance", worst, tol)
}
