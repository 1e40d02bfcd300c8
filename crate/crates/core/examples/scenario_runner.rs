//! Running a scenario from code; the same file can be run with
//! `pmc-lab run <config>`.
//!
//! cargo run --release --example scenario_runner -- [config] [out]

use std::path::PathBuf;

use pmc_lab::scenario::{load_config, parse_config, run_scenario, RunOptions};

const DEFAULT: &str = r#"
name = "disk_classification"
domain = { kind = "disk", radius = 1.0 }
grid = { h = 0.015625 }
curvature = { kind = "constant", value = 2.0 }

[task]
kind = "classify"
"#;

fn main() -> pmc_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(p) => load_config(&PathBuf::from(p))?,
        None => parse_config(DEFAULT, true)?,
    };
    let opts = RunOptions {
        out: Some(args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("pmc-lab-example"))),
        deterministic: true,
        ..Default::default()
    };
    let art = run_scenario(&cfg, &opts)?;
    println!("status {} in {}", art.manifest.status, art.out_dir.display());
    for f in &art.manifest.files {
        println!("  {:<24} {:>9} bytes  {}", f.path, f.bytes, &f.sha256[..16]);
    }
    if let Some(c) = art.get("/result/classification") {
        println!("classification: {c}");
    }
    Ok(())
}
