//! Rasterized domains, perimeters, distances and interior approximations.
//!
//! cargo run --release --example geometry_tour

use std::f64::consts::PI;

use pmc_lab::geometry::{
    binary_perimeter, build_ladder, inner_minkowski_content, rasterize, signed_distance, swiss_cheese_holes,
    AnalyticDomain,
};
use pmc_lab::Grid;

fn main() -> pmc_lab::Result<()> {
    let disk = AnalyticDomain::disk([0.0, 0.0], 0.4)?;
    println!("perimeter of the disk of radius 0.4 (exact {:.6})", 2.0 * PI * 0.4);
    for n in [64.0, 128.0, 256.0] {
        let g = Grid::covering([-0.4, -0.4], [0.4, 0.4], 1.0 / n, 4)?;
        let m = rasterize(&disk, &g)?;
        let p = binary_perimeter(&g, m.inside(), None);
        println!("  h = 1/{n:<4} P = {p:.6}  rel. error {:.2e}", (p - 2.0 * PI * 0.4).abs() / (2.0 * PI * 0.4));
    }

    let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 128.0, 4)?;
    let m = rasterize(&AnalyticDomain::unit_disk(), &g)?;
    let d = signed_distance(&m);
    let k = g.cell_of([0.5, 0.0]).map(|(i, j)| g.idx(i, j)).unwrap();
    println!("signed distance at (0.5, 0): {:.5}", d.signed.values[k]);

    let ladder = build_ladder(&m, &[0.2, 0.1, 0.05])?;
    for l in &ladder.levels {
        println!("  t = {:<5} P(Omega_t) = {:.5}  2 pi (1 - t) = {:.5}", l.t, l.perimeter, 2.0 * PI * (1.0 - l.t));
    }
    let mk = inner_minkowski_content(&m, &[0.05, 0.1, 0.15, 0.2])?;
    println!("inner Minkowski content {:.5} (2 pi = {:.5})", mk.content, 2.0 * PI);

    println!("Swiss-cheese holes for a = 2, delta = 0.01, eps = 0.1, i_max = 2:");
    for c in swiss_cheese_holes(2.0, 0.01, 0.1, 2)? {
        println!("  (i, j) = ({}, {})  rho = {:.4}  radius = {:.2e}", c.i, c.j, c.rho, c.radius);
    }
    Ok(())
}
