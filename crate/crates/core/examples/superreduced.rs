//! Clean-cone test for the super-reduced boundary.
//!
//! cargo run --release --example superreduced

use pmc_lab::geometry::{rasterize, super_reduced_test, AnalyticDomain};
use pmc_lab::Grid;

fn main() -> pmc_lab::Result<()> {
    let g = Grid::covering([0.0, 0.0], [1.0, 1.0], 1.0 / 256.0, 4)?;
    let square = rasterize(&AnalyticDomain::square([0.0, 0.0], 1.0)?, &g)?;
    for z in [[0.5, 0.0], [0.0, 0.0], [1.0, 0.7]] {
        let r = super_reduced_test(&square, z, &[0.4, 0.2, 0.1], 0.1)?;
        let worst: Vec<String> = r.scales.iter().map(|s| format!("{:.3}", s.worst_ratio)).collect();
        println!("z = {z:?}  {:?}  normal {:.3?}  cone ratios {}", r.verdict, r.normal, worst.join(" "));
    }
    Ok(())
}
