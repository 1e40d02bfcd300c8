//! Discrete gradients and their negative adjoints, so that integration by
//! parts `<div p, u> = -<p, grad u>` holds exactly over the whole grid.
//!
//! The forward pair carries the variational energies. Forward differences
//! vanish on the last column/row (Neumann closure). The centered pair
//! evaluates `Tu` and its divergence; centered differences vanish on the
//! outermost ring of cells.

use crate::grid::{Grid, ScalarField, VectorField};

/// Forward gradient of `u`, scaled by `1/h`.
pub fn gradient(grid: &Grid, u: &[f64]) -> Vec<[f64; 2]> {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_h = 1.0 / grid.h;
    let mut g = vec![[0.0; 2]; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let gx = if i + 1 < nx { u[k + 1] - u[k] } else { 0.0 };
            let gy = if j + 1 < ny { u[k + nx] - u[k] } else { 0.0 };
            g[k] = [gx * inv_h, gy * inv_h];
        }
    }
    g
}

#[inline]
pub fn gradient_at(grid: &Grid, u: &[f64], k: usize) -> [f64; 2] {
    let (i, j) = grid.ij(k);
    let gx = if i + 1 < grid.nx { u[k + 1] - u[k] } else { 0.0 };
    let gy = if j + 1 < grid.ny { u[k + grid.nx] - u[k] } else { 0.0 };
    [gx / grid.h, gy / grid.h]
}

/// Backward divergence, the negative adjoint of [`gradient`].
pub fn divergence(grid: &Grid, p: &[[f64; 2]]) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let inv_h = 1.0 / grid.h;
    let mut d = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let mut s = 0.0;
            if i + 1 < nx {
                s += p[k][0];
            }
            if i > 0 {
                s -= p[k - 1][0];
            }
            if j + 1 < ny {
                s += p[k][1];
            }
            if j > 0 {
                s -= p[k - nx][1];
            }
            d[k] = s * inv_h;
        }
    }
    d
}

#[inline]
pub fn divergence_at(grid: &Grid, p: &[[f64; 2]], k: usize) -> f64 {
    let (i, j) = grid.ij(k);
    let nx = grid.nx;
    let mut s = 0.0;
    if i + 1 < nx {
        s += p[k][0];
    }
    if i > 0 {
        s -= p[k - 1][0];
    }
    if j + 1 < grid.ny {
        s += p[k][1];
    }
    if j > 0 {
        s -= p[k - nx][1];
    }
    s / grid.h
}

pub fn gradient_field(u: &ScalarField) -> VectorField {
    VectorField {
        grid: u.grid,
        values: gradient(&u.grid, &u.values),
        sup_bound: None,
    }
}

pub fn divergence_field(p: &VectorField) -> ScalarField {
    ScalarField {
        grid: p.grid,
        values: divergence(&p.grid, &p.values),
        extended: false,
    }
}

/// Centered gradient, zero on the outermost ring.
pub fn centered_gradient(grid: &Grid, u: &[f64]) -> Vec<[f64; 2]> {
    let (nx, ny) = (grid.nx, grid.ny);
    let s = 0.5 / grid.h;
    let mut g = vec![[0.0; 2]; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            if i > 0 && i + 1 < nx {
                g[k][0] = (u[k + 1] - u[k - 1]) * s;
            }
            if j > 0 && j + 1 < ny {
                g[k][1] = (u[k + nx] - u[k - nx]) * s;
            }
        }
    }
    g
}

/// Negative adjoint of [`centered_gradient`].
pub fn centered_divergence(grid: &Grid, p: &[[f64; 2]]) -> Vec<f64> {
    let (nx, ny) = (grid.nx, grid.ny);
    let s = 0.5 / grid.h;
    let mut d = vec![0.0; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let mut v = 0.0;
            if i + 2 < nx {
                v += p[k + 1][0];
            }
            if i >= 2 {
                v -= p[k - 1][0];
            }
            if j + 2 < ny {
                v += p[k + nx][1];
            }
            if j >= 2 {
                v -= p[k - nx][1];
            }
            d[k] = v * s;
        }
    }
    d
}

/// Central-difference gradient (one-sided at the grid edge). Used for
/// normals of distance fields, never inside a variational scheme.
pub fn central_gradient(grid: &Grid, u: &[f64]) -> Vec<[f64; 2]> {
    let (nx, ny) = (grid.nx, grid.ny);
    let h = grid.h;
    let mut g = vec![[0.0; 2]; grid.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = j * nx + i;
            let gx = match (i > 0, i + 1 < nx) {
                (true, true) => (u[k + 1] - u[k - 1]) / (2.0 * h),
                (false, true) => (u[k + 1] - u[k]) / h,
                (true, false) => (u[k] - u[k - 1]) / h,
                _ => 0.0,
            };
            let gy = match (j > 0, j + 1 < ny) {
                (true, true) => (u[k + nx] - u[k - nx]) / (2.0 * h),
                (false, true) => (u[k + nx] - u[k]) / h,
                (true, false) => (u[k] - u[k - nx]) / h,
                _ => 0.0,
            };
            g[k] = [gx, gy];
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn divergence_is_negative_adjoint_of_gradient(
            seed in proptest::collection::vec(-1.0f64..1.0, 3 * 11 * 9)
        ) {
            let g = Grid::new(11, 9, 0.37, [0.0, 0.0]).unwrap();
            let n = g.len();
            let u = &seed[..n];
            let p: Vec<[f64; 2]> = (0..n).map(|k| [seed[n + k], seed[2 * n + k]]).collect();
            let gu = gradient(&g, u);
            let dp = divergence(&g, &p);
            let lhs: f64 = dp.iter().zip(u).map(|(a, b)| a * b).sum();
            let rhs: f64 = -gu.iter().zip(&p).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum::<f64>();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn centered_divergence_is_negative_adjoint(
            seed in proptest::collection::vec(-1.0f64..1.0, 3 * 10 * 8)
        ) {
            let g = Grid::new(10, 8, 0.21, [0.0, 0.0]).unwrap();
            let n = g.len();
            let u = &seed[..n];
            let p: Vec<[f64; 2]> = (0..n).map(|k| [seed[n + k], seed[2 * n + k]]).collect();
            let gu = centered_gradient(&g, u);
            let dp = centered_divergence(&g, &p);
            let lhs: f64 = dp.iter().zip(u).map(|(a, b)| a * b).sum();
            let rhs: f64 = -gu.iter().zip(&p).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum::<f64>();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }
    }

    #[test]
    fn pointwise_helpers_match_whole_field_versions() {
        let g = Grid::new(9, 10, 0.2, [0.0, 0.0]).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| ((k * 37) % 11) as f64).collect();
        let gu = gradient(&g, &u);
        let d = divergence(&g, &gu);
        for k in 0..g.len() {
            assert_eq!(gradient_at(&g, &u, k), gu[k]);
            assert!((divergence_at(&g, &gu, k) - d[k]).abs() < 1e-12);
        }
    }
}
