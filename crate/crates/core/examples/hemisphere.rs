//! The extremal pair (unit disk, H = 2): ladder solve, median normalization
//! and comparison with the lower hemisphere.
//!
//! cargo run --release --example hemisphere

use pmc_lab::extremality::CurvatureSpec;
use pmc_lab::geometry::{rasterize, AnalyticDomain};
use pmc_lab::grid::norm;
use pmc_lab::solver::{mean_curvature, median_normalize, solve_extremal, BoundaryDatum, HeightField, SolveConfig};
use pmc_lab::Grid;

fn main() -> pmc_lab::Result<()> {
    let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 64.0, 4)?;
    let mask = rasterize(&AnalyticDomain::unit_disk(), &g)?;
    let res = solve_extremal(&mask, &CurvatureSpec::Constant(2.0), &SolveConfig::default())?;
    for s in &res.steps {
        println!(
            "t = {:.4}  energy = {:.6}  residual = {:.2e}  median shift = {:.4}",
            s.t, s.energy, s.residual, s.shift
        );
    }
    println!("blow-up cells: N+ {}  N- {}", res.n_plus_cells, res.n_minus_cells);

    let cap = HeightField::from_fn(&mask, &BoundaryDatum::Constant(0.0), |p| -(1.0 - p[0] * p[0] - p[1] * p[1]).max(0.0).sqrt())?;
    let (cap, _) = median_normalize(&cap, &mask)?;
    let mc = mean_curvature(&res.limit);
    let (mut err, mut resid): (f64, f64) = (0.0, 0.0);
    for k in mask.cells() {
        let r = norm(g.center_of(k));
        if r <= 0.9 {
            err = err.max((res.limit.u.values[k] - cap.u.values[k]).abs());
        }
        if r <= 0.8 {
            resid = resid.max((mc.values[k] - 2.0).abs());
        }
    }
    println!("max |u - hemisphere| on r <= 0.9: {err:.4}");
    println!("max |div Tu - 2| on r <= 0.8: {resid:.4}");
    Ok(())
}
