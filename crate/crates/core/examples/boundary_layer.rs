//! Tu of the hemisphere near the boundary: layer flux, density of the set
//! where Tu is not almost normal, and the approximate limit of Tu.
//!
//! cargo run --release --example boundary_layer

use std::f64::consts::PI;

use pmc_lab::extremality::CurvatureSpec;
use pmc_lab::geometry::{rasterize, AnalyticDomain};
use pmc_lab::solver::{solve_extremal, SolveConfig};
use pmc_lab::traces::{approx_limit, bad_set_density, boundary_layer_flux, DivField};
use pmc_lab::Grid;

fn main() -> pmc_lab::Result<()> {
    let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 64.0, 4)?;
    let mask = rasterize(&AnalyticDomain::unit_disk(), &g)?;
    let res = solve_extremal(&mask, &CurvatureSpec::Constant(2.0), &SolveConfig::default())?;
    let xi = DivField::from_height(&res.limit)?;
    for eps in [0.2, 0.1, 0.05] {
        let f = boundary_layer_flux(&xi, &mask, eps)?;
        println!("layer flux eps = {eps:<5} {f:.4}  ({:.3} of 2 pi)", f / (2.0 * PI));
    }
    let z = [1.0, 0.0];
    let radii = [0.4, 0.2, 0.1, 0.0625];
    let d = bad_set_density(&xi, &mask, 0.1, z, &radii, None)?;
    println!("|N_0.1 in B_r(z)| / r^2 at r = {radii:?}: {:.3?}", d.n_ratios);
    let lim = approx_limit(&xi.xi, &mask, z, 0.1, &radii)?;
    println!("approximate limit of Tu at z = {z:?}: {:.3?} (exists: {})", lim.estimate, lim.exists);
    Ok(())
}
