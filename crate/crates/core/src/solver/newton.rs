//! Damped Newton iteration with preconditioned conjugate gradients for
//!
//! ```text
//!     E(u) = h^2 sum_box sqrt(1 + |grad+ u|^2) + h^2 sum_free H u
//! ```
//!
//! over the free cells, every other cell frozen at its current value.

use log::debug;

use crate::grid::Grid;

/// Iteration control of [`minimize`].
#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once half the squared Newton decrement is below this.
    pub energy_tol: f64,
    pub cg_max_iter: usize,
    pub armijo: f64,
    pub backtrack: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub energies: Vec<f64>,
    pub iterations: usize,
    pub cg_iterations: usize,
    pub decrement: f64,
    pub converged: bool,
}

pub struct Problem {
    pub grid: Grid,
    free_list: Vec<usize>,
    /// Cells whose forward stencil touches a free cell.
    active: Vec<usize>,
    /// Curvature, read on free cells.
    pub h_values: Vec<f64>,
    /// Energy of the inactive cells, constant during the solve.
    frozen_energy: f64,
}

#[inline]
fn forward(grid: &Grid, u: &[f64], k: usize) -> [f64; 2] {
    let (i, j) = (k % grid.nx, k / grid.nx);
    let gx = if i + 1 < grid.nx { u[k + 1] - u[k] } else { 0.0 };
    let gy = if j + 1 < grid.ny { u[k + grid.nx] - u[k] } else { 0.0 };
    [gx / grid.h, gy / grid.h]
}

impl Problem {
    /// `u` supplies the frozen values; free cells must lie at least one cell
    /// away from the grid edge.
    pub fn new(grid: Grid, free: Vec<bool>, h_values: Vec<f64>, u: &[f64]) -> Problem {
        let nx = grid.nx;
        let free_list: Vec<usize> = (0..grid.len()).filter(|&k| free[k]).collect();
        let mut is_active = vec![false; grid.len()];
        for &k in &free_list {
            is_active[k] = true;
            is_active[k - 1] = true;
            is_active[k - nx] = true;
        }
        let active: Vec<usize> = (0..grid.len()).filter(|&k| is_active[k]).collect();
        let h2 = grid.cell_area();
        let frozen_energy = (0..grid.len())
            .filter(|&k| !is_active[k])
            .map(|k| {
                let p = forward(&grid, u, k);
                (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt()
            })
            .sum::<f64>()
            * h2;
        Problem {
            grid,
            free_list,
            active,
            h_values,
            frozen_energy,
        }
    }

    #[cfg(test)]
    fn is_free(&self, k: usize) -> bool {
        self.free_list.binary_search(&k).is_ok()
    }

    pub fn free_cells(&self) -> &[usize] {
        &self.free_list
    }

    /// Total energy of the full field `u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let h2 = self.grid.cell_area();
        let area: f64 = self
            .active
            .iter()
            .map(|&k| {
                let p = forward(&self.grid, u, k);
                (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt()
            })
            .sum();
        let lin: f64 = self.free_list.iter().map(|&k| self.h_values[k] * u[k]).sum();
        self.frozen_energy + h2 * (area + lin)
    }

    /// Energy gradient divided by `h^2`, i.e. `H - div T(grad+ u)`, on the
    /// full grid (zero off the free cells), together with the Hessian weights
    /// `(I - T T^T) / sqrt(1 + |p|^2)` per active cell.
    fn linearize(&self, u: &[f64]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let g = &self.grid;
        let mut t = vec![[0.0; 2]; g.len()];
        let mut w = vec![[0.0; 3]; g.len()];
        for &k in &self.active {
            let p = forward(g, u, k);
            let s = (1.0 + p[0] * p[0] + p[1] * p[1]).sqrt();
            let tk = [p[0] / s, p[1] / s];
            t[k] = tk;
            w[k] = [
                (1.0 - tk[0] * tk[0]) / s,
                -tk[0] * tk[1] / s,
                (1.0 - tk[1] * tk[1]) / s,
            ];
        }
        let mut grad = vec![0.0; g.len()];
        let nx = g.nx;
        for &k in &self.free_list {
            let div = (t[k][0] - t[k - 1][0] + t[k][1] - t[k - nx][1]) / g.h;
            grad[k] = self.h_values[k] - div;
        }
        (grad, w)
    }

    /// `D^T W D v` for `v` supported on the free cells.
    fn hess_vec(&self, w: &[[f64; 3]], v: &[f64], out: &mut [f64], scratch: &mut [[f64; 2]]) {
        let g = &self.grid;
        let nx = g.nx;
        let ih = 1.0 / g.h;
        for &k in &self.active {
            let d = [(v[k + 1] - v[k]) * ih, (v[k + nx] - v[k]) * ih];
            let wk = w[k];
            scratch[k] = [wk[0] * d[0] + wk[1] * d[1], wk[1] * d[0] + wk[2] * d[1]];
        }
        for &k in &self.free_list {
            let s = scratch[k];
            out[k] = (-(s[0] + s[1]) + scratch[k - 1][0] + scratch[k - nx][1]) * ih;
        }
    }

    fn hess_diag(&self, w: &[[f64; 3]]) -> Vec<f64> {
        let nx = self.grid.nx;
        let ih2 = 1.0 / self.grid.cell_area();
        let mut d = vec![1.0; self.grid.len()];
        for &k in &self.free_list {
            let a = w[k];
            d[k] = (a[0] + 2.0 * a[1] + a[2] + w[k - 1][0] + w[k - nx][2]) * ih2;
        }
        d
    }

    /// Preconditioned CG on `A x = b` to relative residual `rtol`.
    fn cg(&self, w: &[[f64; 3]], b: &[f64], rtol: f64, max_iter: usize) -> (Vec<f64>, usize) {
        let n = self.grid.len();
        let diag = self.hess_diag(w);
        let fl = &self.free_list;
        let dot = |a: &[f64], b: &[f64]| fl.iter().map(|&k| a[k] * b[k]).sum::<f64>();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = (0..n).map(|k| r[k] / diag[k]).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut scratch = vec![[0.0; 2]; n];
        let mut rz = dot(&r, &z);
        let b_norm = dot(b, b).sqrt();
        let mut it = 0;
        while it < max_iter {
            if dot(&r, &r).sqrt() <= rtol * b_norm {
                break;
            }
            self.hess_vec(w, &p, &mut ap, &mut scratch);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                break;
            }
            let alpha = rz / pap;
            for &k in fl {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
                z[k] = r[k] / diag[k];
            }
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for &k in fl {
                p[k] = z[k] + beta * p[k];
            }
            it += 1;
        }
        (x, it)
    }
}

/// Minimizes the energy over the free cells of `u` in place.
pub fn minimize(prob: &Problem, u: &mut [f64], opts: &NewtonOptions) -> NewtonOutcome {
    let h2 = prob.grid.cell_area();
    let mut energy = prob.energy(u);
    let mut energies = vec![energy];
    let mut cg_total = 0;
    let mut decrement = f64::INFINITY;
    let mut converged = false;
    let mut it = 0;
    let fl = prob.free_cells();
    while it < opts.max_iter {
        let (grad, w) = prob.linearize(u);
        let gnorm = fl.iter().map(|&k| grad[k] * grad[k]).sum::<f64>().sqrt();
        let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
        // forcing term of the inexact Newton step
        let rtol = (0.5f64).min(gnorm.sqrt() * prob.grid.h).max(1e-10);
        let (dir, cg_it) = prob.cg(&w, &rhs, rtol, opts.cg_max_iter);
        cg_total += cg_it;
        let slope = h2 * fl.iter().map(|&k| grad[k] * dir[k]).sum::<f64>();
        decrement = -slope;
        if !(slope < 0.0) {
            // the step carries no descent; the gradient is numerically zero
            converged = gnorm == 0.0 || decrement.abs() <= 2.0 * opts.energy_tol;
            break;
        }
        if decrement / 2.0 <= opts.energy_tol {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut trial = u.to_vec();
        let mut accepted = false;
        for _ in 0..60 {
            for &k in fl {
                trial[k] = u[k] + alpha * dir[k];
            }
            let e = prob.energy(&trial);
            if e <= energy + opts.armijo * alpha * slope {
                energy = e;
                accepted = true;
                break;
            }
            alpha *= opts.backtrack;
        }
        it += 1;
        if !accepted {
            debug!("newton: line search stalled at iteration {it}");
            converged = decrement / 2.0 <= 1e3 * opts.energy_tol;
            break;
        }
        u.copy_from_slice(&trial);
        energies.push(energy);
        debug!(
            "newton {it}: energy {energy:.12e}, decrement {decrement:.3e}, step {alpha}, cg {cg_it}"
        );
    }
    NewtonOutcome {
        energies,
        iterations: it,
        cg_iterations: cg_total,
        decrement,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Problem, Vec<f64>) {
        let g = Grid::new(24, 20, 0.05, [0.0, 0.0]).unwrap();
        let free: Vec<bool> = (0..g.len())
            .map(|k| {
                let (i, j) = g.ij(k);
                (3..20).contains(&i) && (3..16).contains(&j)
            })
            .collect();
        let hv: Vec<f64> = (0..g.len()).map(|k| 0.5 + 0.1 * g.center_of(k)[0]).collect();
        let u: Vec<f64> = (0..g.len())
            .map(|k| {
                let p = g.center_of(k);
                (3.0 * p[0]).sin() * (2.0 * p[1]).cos()
            })
            .collect();
        (Problem::new(g, free, hv, &u), u)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (prob, u) = setup();
        let (grad, _) = prob.linearize(&u);
        let h2 = prob.grid.cell_area();
        let dir: Vec<f64> = (0..u.len())
            .map(|k| if prob.is_free(k) { ((k * 7919) % 13) as f64 / 13.0 - 0.5 } else { 0.0 })
            .collect();
        let model = h2 * dir.iter().zip(&grad).map(|(d, g)| d * g).sum::<f64>();
        let eps = 1e-6;
        let shifted = |s: f64| -> f64 {
            let v: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + s * d).collect();
            prob.energy(&v)
        };
        let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
        assert!((fd - model).abs() <= 1e-4 * model.abs(), "{fd} vs {model}");
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        let (prob, u) = setup();
        let (g0, w) = prob.linearize(&u);
        let dir: Vec<f64> = (0..u.len())
            .map(|k| if prob.is_free(k) { ((k * 104729) % 17) as f64 / 17.0 - 0.5 } else { 0.0 })
            .collect();
        let mut hv = vec![0.0; u.len()];
        let mut scratch = vec![[0.0; 2]; u.len()];
        prob.hess_vec(&w, &dir, &mut hv, &mut scratch);
        let eps = 1e-6;
        let v: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
        let (g1, _) = prob.linearize(&v);
        let err: f64 = prob
            .free_cells()
            .iter()
            .map(|&k| ((g1[k] - g0[k]) / eps - hv[k]).abs())
            .fold(0.0, f64::max);
        let scale = hv.iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(err <= 1e-4 * scale, "{err} vs {scale}");
    }

    #[test]
    fn minimization_lowers_the_energy_monotonically() {
        let (prob, mut u) = setup();
        let opts = NewtonOptions {
            max_iter: 100,
            energy_tol: 1e-13,
            cg_max_iter: 500,
            armijo: 1e-4,
            backtrack: 0.5,
        };
        let out = minimize(&prob, &mut u, &opts);
        assert!(out.converged);
        for w in out.energies.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        let (grad, _) = prob.linearize(&u);
        let worst = prob.free_cells().iter().map(|&k| grad[k].abs()).fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
    }
}
