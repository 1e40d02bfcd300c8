//! Filling the holes of a porous disk one at a time.
//!
//! cargo run --release --example swiss_cheese

use pmc_lab::geometry::{swiss_cheese, AnalyticDomain, Hole};
use pmc_lab::scenario::{stability_experiment, StabilityTask};
use pmc_lab::Grid;

fn main() -> pmc_lab::Result<()> {
    let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 64.0, 4)?;

    // parameters of the construction: holes far below the grid scale
    let cheese = swiss_cheese(2.0, 0.01, 0.1, 2)?;
    let rep = stability_experiment(&cheese, &g, &StabilityTask::default(), 1)?;
    for s in &rep.steps {
        println!("step {}  holes {}  H = {:.4}  {}  warnings {}", s.step, s.holes_left, s.curvature, s.classification, s.warnings.len());
    }

    // resolved holes
    let holes = vec![
        Hole { center: [0.5, 0.3], radius: 0.08 },
        Hole { center: [-0.4, -0.4], radius: 0.12 },
    ];
    let dom = AnalyticDomain::disk_minus_balls(1.0, holes)?;
    let rep = stability_experiment(&dom, &g, &StabilityTask::default(), 2)?;
    for s in &rep.steps {
        println!(
            "step {}  holes {}  H = {:.4}  {}  distance to last {}",
            s.step,
            s.holes_left,
            s.curvature,
            s.classification,
            s.distance_final.map_or("-".into(), |d| format!("{d:.4}"))
        );
    }
    match rep.stopped_at {
        Some(k) => println!("stopped at step {k}"),
        None => println!("all steps extremal"),
    }
    Ok(())
}
