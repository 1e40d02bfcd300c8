//! Primal-dual solver for the relaxed set problem
//!
//! ```text
//!     min  alpha * TV(u) - sum_Omega h^2 f u,   0 <= u <= 1,  u = 0 off Omega
//! ```
//!
//! with the upwind total variation
//!
//! ```text
//!     TV(u) = h sum_i sqrt( sum_{j ~ i} (u_i - u_j)_+^2 )
//! ```
//!
//! over the four axis neighbours. The dual variable lives in the nonnegative
//! part of the ball `|q| <= alpha`, so every dual iterate certifies the lower
//! bound `h sum_Omega min(0, (K^T q)_i - h f_i)`.

use crate::geometry::mask::DomainMask;
use crate::grid::Grid;

/// Iteration control.
#[derive(Clone, Copy, Debug)]
pub struct RelaxOptions {
    pub max_iter: usize,
    /// Stop once `primal - dual <= gap_tol`.
    pub gap_tol: f64,
    /// Stop once the lower bound reaches `-certify_tol`.
    pub certify_tol: Option<f64>,
    /// Stop once the objective is below `-violation_tol` and the gap is
    /// within `violation_tol`.
    pub violation_tol: Option<f64>,
    pub check_every: usize,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        RelaxOptions {
            max_iter: 20_000,
            gap_tol: 1e-6,
            certify_tol: None,
            violation_tol: None,
            check_every: 64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxedSolution {
    /// Minimizer on the full grid.
    pub u: Vec<f64>,
    /// Objective value of `u`.
    pub primal: f64,
    /// Certified lower bound on the minimum.
    pub dual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `TV(u)` and `h^2 sum f u`.
    pub tv: f64,
    pub linear: f64,
}

impl RelaxedSolution {
    pub fn gap(&self) -> f64 {
        self.primal - self.dual
    }
}

/// Neighbour drops `u_i - u_j` in the order right, left, up, down, with
/// zero outside the slice.
#[inline]
fn drops(u: &[f64], w: usize, hgt: usize, l: usize) -> [f64; 4] {
    let (i, j) = (l % w, l / w);
    let v = u[l];
    let r = if i + 1 < w { u[l + 1] } else { 0.0 };
    let lf = if i > 0 { u[l - 1] } else { 0.0 };
    let up = if j + 1 < hgt { u[l + w] } else { 0.0 };
    let dn = if j > 0 { u[l - w] } else { 0.0 };
    [v - r, v - lf, v - up, v - dn]
}

#[inline]
fn upwind_norm(d: [f64; 4]) -> f64 {
    d.iter().map(|x| x.max(0.0).powi(2)).sum::<f64>().sqrt()
}

/// Nearest point of `{p >= 0, |p| <= alpha}`.
#[inline]
fn project(v: [f32; 4], alpha: f64) -> [f32; 4] {
    let p = v.map(|x| (x as f64).max(0.0));
    let m = p.iter().map(|x| x * x).sum::<f64>().sqrt();
    // shrink slightly so the rounded value stays feasible
    let r = if m > alpha { alpha / m } else { 1.0 } * (1.0 - 1e-6);
    p.map(|x| (x * r) as f32)
}

/// Upwind total variation of a full-grid field.
pub fn upwind_total_variation(grid: &Grid, u: &[f64]) -> f64 {
    (0..u.len())
        .map(|l| upwind_norm(drops(u, grid.nx, grid.ny, l)))
        .sum::<f64>()
        * grid.h
}

/// The domain cells in compact order. Slot `n` is a sentinel holding zero,
/// standing for every exterior neighbour.
pub(crate) struct Local {
    pub cells: Vec<usize>,
    pub nbr: Vec<[u32; 4]>,
    /// `h f` per cell.
    pub c: Vec<f64>,
}

impl Local {
    pub fn new(mask: &DomainMask, f: &[f64]) -> Local {
        let g = mask.grid();
        let cells: Vec<usize> = mask.cells().collect();
        let n = cells.len();
        let mut slot = vec![n as u32; g.len()];
        for (s, &k) in cells.iter().enumerate() {
            slot[k] = s as u32;
        }
        let look = |k: Option<usize>| k.map_or(n as u32, |k| slot[k]);
        let nbr = cells
            .iter()
            .map(|&k| {
                let (i, j) = g.ij(k);
                [
                    look((i + 1 < g.nx).then(|| k + 1)),
                    look((i > 0).then(|| k - 1)),
                    look((j + 1 < g.ny).then(|| k + g.nx)),
                    look((j > 0).then(|| k - g.nx)),
                ]
            })
            .collect();
        let c = cells.iter().map(|&k| g.h * f[k]).collect();
        Local { cells, nbr, c }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    fn drops(&self, u: &[f64], s: usize) -> [f64; 4] {
        let v = u[s];
        let nb = self.nbr[s];
        [
            v - u[nb[0] as usize],
            v - u[nb[1] as usize],
            v - u[nb[2] as usize],
            v - u[nb[3] as usize],
        ]
    }

    /// `(K^T q)_s`.
    #[inline]
    fn adj(&self, q: &[[f32; 4]], s: usize) -> f64 {
        let nb = self.nbr[s];
        let own = q[s];
        (own[0] + own[1] + own[2] + own[3]) as f64
            - q[nb[0] as usize][1] as f64
            - q[nb[1] as usize][0] as f64
            - q[nb[2] as usize][3] as f64
            - q[nb[3] as usize][2] as f64
    }

    /// `(sum |K u|, sum c u)` in units of `1/h`.
    pub fn parts(&self, u: &[f64]) -> (f64, f64) {
        let mut tv = 0.0;
        let mut lin = 0.0;
        for s in 0..self.len() {
            tv += upwind_norm(self.drops(u, s));
            lin += self.c[s] * u[s];
        }
        (tv, lin)
    }

    /// Lower bound certified by `q` after projection onto the dual set.
    pub fn dual_value(&self, q: &[[f32; 4]], alpha: f64) -> f64 {
        let p: Vec<[f32; 4]> = q.iter().map(|v| project(*v, alpha)).collect();
        (0..self.len())
            .map(|s| (self.adj(&p, s) - self.c[s]).min(0.0))
            .sum()
    }
}

/// Solves the relaxed problem with weight `f` (full-grid values, read on the
/// domain) and TV weight `alpha`, warm-starting from `warm` if given.
///
/// The iteration is the primal-dual hybrid gradient method with restarts to
/// the running average and an adaptive primal weight.
pub fn solve_relaxed(
    mask: &DomainMask,
    f: &[f64],
    alpha: f64,
    opts: &RelaxOptions,
    warm: Option<&[f64]>,
) -> RelaxedSolution {
    let loc = Local::new(mask, f);
    solve_local(mask, &loc, alpha, opts, warm)
}

pub(crate) fn solve_local(
    mask: &DomainMask,
    loc: &Local,
    alpha: f64,
    opts: &RelaxOptions,
    warm: Option<&[f64]>,
) -> RelaxedSolution {
    let g = *mask.grid();
    let h = g.h;
    let n = loc.len();
    // one extra sentinel slot, always zero
    let mut u = vec![0.0; n + 1];
    if let Some(w0) = warm {
        for (s, &k) in loc.cells.iter().enumerate() {
            u[s] = w0[k].clamp(0.0, 1.0);
        }
    }
    let mut q = vec![[0.0f32; 4]; n + 1];
    let mut ext = vec![0.0; n + 1];

    let mut best_u = u.clone();
    let (tv0, lin0) = loc.parts(&u);
    let mut best_primal = alpha * tv0 - lin0;
    let mut best_parts = (tv0, lin0);
    let mut best_dual = loc.dual_value(&q, alpha);

    let mut sum_u = vec![0.0; n + 1];
    let mut sum_q = vec![[0.0f32; 4]; n + 1];
    let mut count = 0usize;
    let mut restart_u = u.clone();
    let mut restart_q = q.clone();
    let mut gap_at_restart = best_primal - best_dual;
    let mut last_candidate_gap = f64::INFINITY;
    let mut since_restart = 0usize;

    // |K|^2 <= 16
    let eta = 0.95 / 4.0;
    let mut omega = 1.0f64;
    let mut it = 0;
    let mut converged = n == 0;
    let every = opts.check_every.max(1);
    let a2 = alpha * alpha;
    while !converged {
        let (tau, sigma) = (eta / omega, eta * omega);
        for s in 0..n {
            let old = u[s];
            let v = (old - tau * (loc.adj(&q, s) - loc.c[s])).clamp(0.0, 1.0);
            u[s] = v;
            ext[s] = 2.0 * v - old;
        }
        for s in 0..n {
            let d = loc.drops(&ext, s);
            let qs = q[s];
            let mut p = [0.0; 4];
            let mut m2 = 0.0;
            for c in 0..4 {
                p[c] = (qs[c] as f64 + sigma * d[c]).max(0.0);
                m2 += p[c] * p[c];
            }
            if m2 > a2 {
                let r = alpha / m2.sqrt();
                p = p.map(|x| x * r);
            }
            q[s] = p.map(|x| x as f32);
        }
        for s in 0..n {
            sum_u[s] += u[s];
            let (a, b) = (&mut sum_q[s], q[s]);
            for c in 0..4 {
                a[c] += b[c];
            }
        }
        count += 1;
        since_restart += 1;
        it += 1;

        if it % every != 0 && it < opts.max_iter {
            continue;
        }
        let inv = 1.0 / count as f64;
        let avg_u: Vec<f64> = sum_u.iter().map(|v| v * inv).collect();
        let avg_q: Vec<[f32; 4]> = sum_q.iter().map(|v| v.map(|x| x * inv as f32)).collect();
        let (tv_c, lin_c) = loc.parts(&u);
        let (tv_a, lin_a) = loc.parts(&avg_u);
        let p_c = alpha * tv_c - lin_c;
        let p_a = alpha * tv_a - lin_a;
        let d_c = loc.dual_value(&q, alpha);
        let d_a = loc.dual_value(&avg_q, alpha);
        for (p, parts, uu) in [(p_c, (tv_c, lin_c), &u), (p_a, (tv_a, lin_a), &avg_u)] {
            if p < best_primal {
                best_primal = p;
                best_parts = parts;
                best_u.copy_from_slice(uu);
            }
        }
        best_dual = best_dual.max(d_c).max(d_a);

        if (best_primal - best_dual) * h <= opts.gap_tol {
            converged = true;
        }
        if let Some(t) = opts.certify_tol {
            if best_dual * h >= -t {
                converged = true;
            }
        }
        if let Some(t) = opts.violation_tol {
            if best_primal * h < -t && (best_primal - best_dual) * h <= t {
                converged = true;
            }
        }
        if converged || it >= opts.max_iter {
            break;
        }

        // restart to the better of the current and the averaged iterate
        let (gap_c, gap_a) = (p_c - d_c, p_a - d_a);
        let use_avg = gap_a < gap_c;
        let cand_gap = gap_a.min(gap_c);
        let restart = cand_gap <= 0.2 * gap_at_restart
            || (cand_gap <= 0.8 * gap_at_restart && cand_gap > last_candidate_gap)
            || since_restart >= 36 * every * (1 + it / (100 * every));
        last_candidate_gap = cand_gap;
        if restart {
            if use_avg {
                u = avg_u;
                q = avg_q;
            }
            let du = u
                .iter()
                .zip(&restart_u)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let dq = q
                .iter()
                .zip(&restart_q)
                .map(|(a, b)| (0..4).map(|c| ((a[c] - b[c]) as f64).powi(2)).sum::<f64>())
                .sum::<f64>()
                .sqrt();
            if du > 1e-10 && dq > 1e-10 {
                omega = (0.5 * (dq / du).ln() + 0.5 * omega.ln()).exp();
            }
            restart_u.copy_from_slice(&u);
            restart_q.copy_from_slice(&q);
            gap_at_restart = cand_gap;
            last_candidate_gap = f64::INFINITY;
            since_restart = 0;
            sum_u.iter_mut().for_each(|v| *v = 0.0);
            sum_q.iter_mut().for_each(|v| *v = [0.0; 4]);
            count = 0;
        }
    }
    let mut full = vec![0.0; g.len()];
    for (s, &k) in loc.cells.iter().enumerate() {
        full[k] = best_u[s];
    }
    RelaxedSolution {
        u: full,
        primal: best_primal * h,
        dual: best_dual * h,
        iterations: it,
        converged,
        tv: best_parts.0 * h,
        linear: best_parts.1 * h,
    }
}

/// `alpha * TV(chi_A) - h^2 sum_A f` for a set given on the full grid.
pub fn set_value(mask: &DomainMask, set: &[bool], f: &[f64], alpha: f64) -> (f64, f64, f64) {
    let g = mask.grid();
    let u: Vec<f64> = set.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let tv = upwind_total_variation(g, &u);
    let lin: f64 = set
        .iter()
        .zip(f)
        .filter(|(&b, _)| b)
        .map(|(_, &v)| v)
        .sum::<f64>()
        * g.cell_area();
    (alpha * tv - lin, tv, lin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;
    use crate::grid::Grid;

    fn disk(h: f64) -> DomainMask {
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], h, 4).unwrap();
        rasterize(&AnalyticDomain::unit_disk(), &g).unwrap()
    }

    #[test]
    fn zero_weight_gives_zero_minimum() {
        let m = disk(1.0 / 32.0);
        let f = vec![0.0; m.grid().len()];
        let s = solve_relaxed(&m, &f, 1.0, &RelaxOptions::default(), None);
        assert!(s.primal.abs() < 1e-12 && s.dual.abs() < 1e-12);
        assert!(s.converged);
    }

    #[test]
    fn bounds_bracket_the_minimum() {
        let m = disk(1.0 / 32.0);
        let f = vec![3.0; m.grid().len()];
        let opts = RelaxOptions { max_iter: 500, ..Default::default() };
        let s = solve_relaxed(&m, &f, 1.0, &opts, None);
        assert!(s.dual <= s.primal + 1e-12);
        // the whole disk is a feasible point
        let (v, _, _) = set_value(&m, m.inside(), &f, 1.0);
        assert!(s.dual <= v);
        assert!(s.primal < 0.0);
    }
}
