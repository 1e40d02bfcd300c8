//! Weak normal traces of bounded divergence-measure fields: a constant
//! field on the disk and the twisting field on the unit square.
//!
//! cargo run --release --example weak_traces

use pmc_lab::geometry::{rasterize, AnalyticDomain};
use pmc_lab::traces::{gauss_green_residual, twisting_field, weak_normal_trace, DivField, TraceConfig};
use pmc_lab::{Grid, ScalarField};

fn main() -> pmc_lab::Result<()> {
    let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 128.0, 4)?;
    let disk = rasterize(&AnalyticDomain::unit_disk(), &g)?;
    let xi = DivField::from_fn(g, |_| [1.0, 0.0], Some(&|_| 0.0))?;
    let tr = weak_normal_trace(&xi, &disk, &TraceConfig { arcs: 8, ..Default::default() })?;
    println!("constant field e1 on the unit disk:");
    for a in &tr.arcs {
        let theta = a.midpoint[1].atan2(a.midpoint[0]);
        println!("  theta = {theta:+.3}  trace = {:+.4}  cos theta = {:+.4}", a.value, theta.cos());
    }

    let g = Grid::covering([0.0, 0.0], [1.0, 1.0], 1.0 / 256.0, 4)?;
    let square = rasterize(&AnalyticDomain::square([0.0, 0.0], 1.0)?, &g)?;
    let tw = twisting_field(&g, 5)?;
    let tr = weak_normal_trace(&tw, &square, &TraceConfig::default())?;
    let bottom = tr
        .arcs
        .iter()
        .filter(|a| a.midpoint[1] < 0.05 && a.midpoint[0] > 0.05 && a.midpoint[0] < 0.95)
        .map(|a| a.value.abs())
        .fold(0.0, f64::max);
    let one = ScalarField::constant(g, 1.0);
    println!("twisting field: sup |xi| = {:.3}, max bottom-edge |trace| = {bottom:.2e}", tr.sup);
    println!("Gauss-Green residual with phi = 1: {:.2e}", gauss_green_residual(&tw, &one, &square, &tr)?);
    Ok(())
}
