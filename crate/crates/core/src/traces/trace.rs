//! Weak normal traces from boundary-localized test functions
//! `psi_k(s(x)) (1 + d(x) / eps)_+`.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{cell_term, pairing, DivField};
use crate::error::{Error, Result};
use crate::geometry::distance::signed_distance;
use crate::geometry::mask::DomainMask;
use crate::grid::{dist, dot, Point, ScalarField};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    /// Band widths in cells, each at least 4.
    pub eps_cells: Vec<f64>,
    /// Target number of arcs over the whole boundary.
    pub arcs: usize,
    /// Target arc length in cells; overrides `arcs` when set.
    pub arc_cells: Option<f64>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            eps_cells: vec![16.0, 8.0],
            arcs: 32,
            arc_cells: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceArc {
    pub loop_id: usize,
    /// Arc-length interval on the loop.
    pub s0: f64,
    pub s1: f64,
    pub length: f64,
    pub midpoint: Point,
    pub normal: [f64; 2],
    /// Trace per band width.
    pub values: Vec<f64>,
    /// Linear extrapolation of the two narrowest bands to zero width.
    pub value: f64,
    /// Length-weighted mean of `xi . nu` along the arc.
    pub classical: f64,
    /// Segment midpoints and lengths of the arc.
    #[serde(skip)]
    pub samples: Vec<(Point, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEstimate {
    pub eps: Vec<f64>,
    pub arcs: Vec<TraceArc>,
    pub sup: f64,
    /// Whether every arc value is within `sup + 0.05`.
    pub sup_ok: bool,
    pub warnings: Vec<String>,
}

impl TraceEstimate {
    pub fn max_abs(&self) -> f64 {
        self.arcs.iter().map(|a| a.value.abs()).fold(0.0, f64::max)
    }
}

struct LoopArcs {
    first: usize,
    n: usize,
    len: f64,
}

impl LoopArcs {
    /// Hat-function weights at arc length `s`, nodes at the arc midpoints.
    fn weights(&self, s: f64) -> [(usize, f64); 2] {
        if self.n == 1 {
            return [(self.first, 1.0), (self.first, 0.0)];
        }
        let w = self.len / self.n as f64;
        let u = s / w - 0.5;
        let f = u.floor();
        let k0 = (f as i64).rem_euclid(self.n as i64) as usize;
        let k1 = (k0 + 1) % self.n;
        let t = u - f;
        [(self.first + k0, 1.0 - t), (self.first + k1, t)]
    }
}

pub fn weak_normal_trace(xi: &DivField, mask: &DomainMask, cfg: &TraceConfig) -> Result<TraceEstimate> {
    let g = *mask.grid();
    g.check_same(xi.grid(), "vector field")?;
    let h = g.h;
    if cfg.eps_cells.is_empty() || cfg.arcs == 0 || cfg.arc_cells.is_some_and(|c| !(c > 0.0)) {
        return Err(Error::InvalidParameter("need at least one band width and one arc".into()));
    }
    if let Some(e) = cfg.eps_cells.iter().find(|&&e| !(e >= 4.0)) {
        return Err(Error::Resolution(format!("band width of {e} cells is below 4")));
    }
    let eps: Vec<f64> = cfg.eps_cells.iter().map(|e| e * h).collect();
    let df = signed_distance(mask);
    let grad = df.gradient();
    let total: f64 = (0..df.curve.loops.len()).map(|l| df.loop_length(l)).sum();
    let mut warnings = Vec::new();

    let mut loops = Vec::with_capacity(df.curve.loops.len());
    let mut arcs = Vec::new();
    for l in 0..df.curve.loops.len() {
        let len = df.loop_length(l);
        let target = match cfg.arc_cells {
            Some(c) => len / (c * h),
            None => cfg.arcs as f64 * len / total,
        };
        let mut n = (target.round() as usize).max(1);
        let fit = (len / (4.0 * h)).floor() as usize;
        if n > fit {
            let msg = format!("loop {l}: arcs below 4h merged, {n} -> {}", fit.max(1));
            warn!("{msg}");
            warnings.push(msg);
            n = fit.max(1);
        }
        let first = arcs.len();
        let w = len / n as f64;
        let lp = &df.curve.loops[l];
        let table = &df.arclength[l];
        for k in 0..n {
            let (s0, s1) = (k as f64 * w, (k + 1) as f64 * w);
            let mut samples = Vec::new();
            let mut classical = 0.0;
            let mut normal = [0.0, 0.0];
            let mut best = f64::INFINITY;
            let mut midpoint = lp[0];
            for s in 0..lp.len() {
                let mid_s = 0.5 * (table[s] + table[s + 1]);
                if mid_s < s0 || mid_s >= s1 {
                    continue;
                }
                let (a, b) = (lp[s], lp[(s + 1) % lp.len()]);
                let m = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                let seg = dist(a, b);
                let nu = df.normal_at(&grad, m);
                let v = [
                    g.interpolate(&xi.xi.component(0), m),
                    g.interpolate(&xi.xi.component(1), m),
                ];
                classical += seg * dot(v, nu);
                samples.push((m, seg));
                if (mid_s - 0.5 * (s0 + s1)).abs() < best {
                    best = (mid_s - 0.5 * (s0 + s1)).abs();
                    midpoint = m;
                    normal = nu;
                }
            }
            let covered: f64 = samples.iter().map(|s| s.1).sum();
            arcs.push(TraceArc {
                loop_id: l,
                s0,
                s1,
                length: w,
                midpoint,
                normal,
                values: Vec::with_capacity(eps.len()),
                value: 0.0,
                classical: if covered > 0.0 { classical / covered } else { 0.0 },
                samples,
            });
        }
        loops.push(LoopArcs { first, n, len });
    }

    let d = &df.signed.values;
    let weights: Vec<[(usize, f64); 2]> = (0..g.len())
        .map(|k| match df.nearest[k] {
            Some(nr) => loops[nr.loop_id as usize].weights(nr.s),
            None => [(usize::MAX, 0.0), (usize::MAX, 0.0)],
        })
        .collect();
    let nx = g.nx;
    let area = g.cell_area();
    for &e in &eps {
        let rho = |k: usize| -> f64 {
            if d[k].is_finite() {
                (1.0 + d[k] / e).max(0.0)
            } else {
                0.0
            }
        };
        let phi = |k: usize, arc: usize| -> f64 {
            let w = weights[k];
            let mut s = 0.0;
            if w[0].0 == arc {
                s += w[0].1;
            }
            if w[1].0 == arc {
                s += w[1].1;
            }
            s * rho(k)
        };
        let mut sums = vec![0.0; arcs.len()];
        for k in mask.cells().filter(|&k| d[k] > -e - 2.0 * h) {
            let stencil = [k, k + 1, k - 1, k + nx, k - nx];
            let mut seen: Vec<usize> = Vec::with_capacity(6);
            for &c in &stencil {
                for (a, w) in weights[c] {
                    if a != usize::MAX && w > 0.0 && !seen.contains(&a) {
                        seen.push(a);
                    }
                }
            }
            for &a in &seen {
                sums[a] += cell_term(xi, mask, k, |n| phi(n, a));
            }
        }
        for (arc, s) in arcs.iter_mut().zip(&sums) {
            arc.values.push(s * area / arc.length);
        }
    }

    let mut order: Vec<usize> = (0..eps.len()).collect();
    order.sort_by(|&a, &b| eps[a].total_cmp(&eps[b]));
    for arc in arcs.iter_mut() {
        arc.value = match order.len() {
            1 => arc.values[0],
            _ => {
                let (a, b) = (order[0], order[1]);
                (eps[b] * arc.values[a] - eps[a] * arc.values[b]) / (eps[b] - eps[a])
            }
        };
    }
    let sup_ok = arcs.iter().all(|a| a.value.abs() <= xi.sup + 0.05);
    Ok(TraceEstimate {
        eps,
        arcs,
        sup: xi.sup,
        sup_ok,
        warnings,
    })
}

/// `|pairing(xi, phi) - sum_arcs length * mean_arc(phi) * trace|`.
pub fn gauss_green_residual(xi: &DivField, phi: &ScalarField, mask: &DomainMask, trace: &TraceEstimate) -> Result<f64> {
    let lhs = pairing(xi, phi, mask)?;
    let g = mask.grid();
    let rhs: f64 = trace
        .arcs
        .iter()
        .map(|a| {
            let covered: f64 = a.samples.iter().map(|s| s.1).sum();
            let mean = if covered > 0.0 {
                a.samples.iter().map(|&(p, w)| w * g.interpolate(&phi.values, p)).sum::<f64>() / covered
            } else {
                0.0
            };
            a.length * mean * a.value
        })
        .sum();
    Ok((lhs - rhs).abs())
}
