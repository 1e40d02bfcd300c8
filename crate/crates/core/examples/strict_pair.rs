//! A strict pair: the Dirichlet problem for H = 1.9 on the unit disk and
//! the flux of Tu through interior approximations.
//!
//! cargo run --release --example strict_pair

use std::f64::consts::PI;

use pmc_lab::extremality::{epsilon0, CurvatureSpec};
use pmc_lab::geometry::{build_ladder, rasterize, AnalyticDomain};
use pmc_lab::solver::{solve_dirichlet, BoundaryDatum, SolveConfig};
use pmc_lab::traces::verticality_flux;
use pmc_lab::Grid;

fn main() -> pmc_lab::Result<()> {
    let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 64.0, 4)?;
    let mask = rasterize(&AnalyticDomain::unit_disk(), &g)?;
    let h = CurvatureSpec::Constant(1.9);
    println!("margin eps0 = {:.4} (1 - H R / 2 = 0.05)", epsilon0(&mask, &h)?);

    let rep = solve_dirichlet(&mask, &h, &BoundaryDatum::Constant(0.0), &SolveConfig::default())?;
    println!("Newton steps {}  energy {:.6}  residual {:.2e}", rep.iterations, rep.final_energy, rep.residual);

    let ladder = build_ladder(&mask, &[0.2, 0.1, 0.05, 0.025])?;
    let flux = verticality_flux(&rep.field, &mask, &ladder)?;
    for (l, f) in ladder.levels.iter().zip(flux) {
        println!("t = {:<6} flux = {f:.4}  (1.9 pi = {:.4}, P_t = {:.4})", l.t, 1.9 * PI, l.perimeter);
    }
    Ok(())
}
