//! Necessary-condition classification and Cheeger constants.
//!
//! cargo run --release --example classify_pairs

use pmc_lab::extremality::{cheeger, cheeger_constant_square, classify, normalized_extremal_curvature, CurvatureSpec};
use pmc_lab::geometry::{rasterize, AnalyticDomain, DomainMask};
use pmc_lab::Grid;

fn raster(dom: &AnalyticDomain, h: f64) -> pmc_lab::Result<DomainMask> {
    let (lo, hi) = dom.bounds();
    rasterize(dom, &Grid::covering(lo, hi, h, 4)?)
}

fn main() -> pmc_lab::Result<()> {
    let h = 1.0 / 128.0;
    let disk = raster(&AnalyticDomain::unit_disk(), h)?;
    let square = raster(&AnalyticDomain::square([0.0, 0.0], 1.0)?, h)?;

    for (name, mask, value) in [("disk", &disk, 2.0), ("disk", &disk, 1.9), ("square", &square, 4.2)] {
        let c = classify(mask, &CurvatureSpec::Constant(value))?;
        println!("{name:<6} H = {value}: {} ({})", c.class, c.reason);
    }

    let ch = cheeger(&square)?;
    println!(
        "Cheeger constant of the unit square: {:.4} in [{:.4}, {:.4}], closed form {:.4}",
        ch.h,
        ch.bracket[0],
        ch.bracket[1],
        cheeger_constant_square(1.0)
    );

    // at h = 1/128 the corner-rounding part of the tolerance hides the violation
    let fine = raster(&AnalyticDomain::square([0.0, 0.0], 1.0)?, 1.0 / 256.0)?;
    let n = normalized_extremal_curvature(&fine)?;
    println!("square with H = P / |Omega| = {:.4}: {}", n.value, n.classification.class);
    Ok(())
}
