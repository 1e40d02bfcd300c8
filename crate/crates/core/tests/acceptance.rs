//! Acceptance suite: runs the shipped scenario configs and prints one
//! PASS/FAIL line per criterion. Exits nonzero if any criterion fails.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use pmc_lab::scenario::{load_config, run_scenario, RunArtifacts, RunOptions};

struct Runner {
    out: tempfile::TempDir,
    runs: Vec<(String, RunArtifacts, f64)>,
}

impl Runner {
    fn run(&mut self, name: &str) -> &RunArtifacts {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(format!("{name}.toml"));
        let cfg = load_config(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
        let opts = RunOptions {
            out: Some(self.out.path().join(name)),
            threads: 1,
            deterministic: true,
        };
        let t0 = Instant::now();
        let art = run_scenario(&cfg, &opts).unwrap_or_else(|e| panic!("{name}: {e}"));
        let secs = t0.elapsed().as_secs_f64();
        println!("  [{name}: {secs:.1} s, status {}]", art.manifest.status);
        for e in &art.manifest.errors {
            println!("    error {}/{}: {}", e.stage, e.kind, e.message);
        }
        self.runs.push((name.into(), art, secs));
        &self.runs.last().unwrap().1
    }
}

fn num(a: &RunArtifacts, p: &str) -> f64 {
    a.f64_at(p).unwrap_or(f64::NAN)
}

fn nums(a: &RunArtifacts, p: &str) -> Vec<f64> {
    a.get(p)
        .and_then(|v| v.as_array())
        .map(|v| v.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .unwrap_or_default()
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

fn report(results: &mut Vec<(usize, bool)>, n: usize, pass: bool, detail: String) {
    println!("criterion {n:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    results.push((n, pass));
}

fn main() -> ExitCode {
    let mut r = Runner {
        out: tempfile::tempdir().expect("temp dir"),
        runs: Vec::new(),
    };
    let mut results = Vec::new();

    let a = r.run("hemisphere").clone();
    let fd = num(&a, "/result/oracle_fd_residual");
    let err = num(&a, "/result/oracle_error");
    let res = num(&a, "/result/region_residual");
    report(
        &mut results,
        1,
        fd <= 0.01 && err <= 0.02 && res <= 0.05,
        format!("cap check |div T(cap) - 2| = {fd:.2e} (<= 0.01), max error on r <= 0.9 = {err:.4} (<= 0.02), residual on r <= 0.8 = {res:.4} (<= 0.05)"),
    );

    let v = r.run("verticality_extremal").clone();
    let t = nums(&v, "/result/t");
    let flux = nums(&v, "/result/flux");
    let i = t.iter().position(|&x| x == 0.05).expect("t = 0.05 level");
    let exact = 2.0 * PI * (1.0 - t[i]).powi(2);
    let ok_a = within(flux[i], 2.0 * PI, 0.05);
    let s = r.run("verticality_strict").clone();
    let sflux = nums(&s, "/result/flux");
    let last = *sflux.last().unwrap_or(&f64::NAN);
    let ok_b = within(last, 1.9 * PI, 0.05) && sflux.iter().all(|&f| f <= 2.0 * PI - 0.1);
    report(
        &mut results,
        2,
        ok_a && ok_b,
        format!(
            "extremal flux at t = 0.05: {:.4} vs 2 pi = {:.4} (rel {:.3}, cap value 2 pi (1 - t)^2 = {exact:.4}); strict fluxes {:.4?} -> 1.9 pi = {:.4}, max <= 2 pi - 0.1 = {:.4}",
            flux[i],
            2.0 * PI,
            (flux[i] - 2.0 * PI).abs() / (2.0 * PI),
            sflux,
            1.9 * PI,
            2.0 * PI - 0.1
        ),
    );

    let ce = r.run("classify_disk_extremal").clone();
    let cs = r.run("classify_disk_strict").clone();
    let cv = r.run("classify_square_violated").clone();
    let class = |a: &RunArtifacts| a.get("/result/classification").and_then(|v| v.as_str()).unwrap_or("?").to_string();
    let oracle = |a: &RunArtifacts| a.get("/result/oracle/class").and_then(|v| v.as_str()).unwrap_or("?").to_string();
    let eps0 = num(&cs, "/result/eps0");
    let ok = class(&ce) == "extremal"
        && class(&cs) == "strict"
        && class(&cv) == "violated"
        && (eps0 - 0.05).abs() <= 0.01
        && [&ce, &cs, &cv].iter().all(|a| class(a) == oracle(a));
    report(
        &mut results,
        3,
        ok,
        format!(
            "(disk, 2) {} [oracle {}], (disk, 1.9) {} eps0 = {eps0:.4} [oracle 0.05], (square, 4.2) {} [oracle {}]",
            class(&ce),
            oracle(&ce),
            class(&cs),
            class(&cv),
            oracle(&cv)
        ),
    );

    let hd = num(r.run("cheeger_disk"), "/result/h");
    let hs = num(r.run("cheeger_square"), "/result/h");
    let sq = (4.0 - PI) / (2.0 - PI.sqrt());
    report(
        &mut results,
        4,
        within(hd, 2.0, 0.02) && within(hs, sq, 0.02),
        format!("disk {hd:.4} vs 2, square {hs:.4} vs {sq:.4}"),
    );

    let tw = r.run("twisting_trace").clone();
    let bottom = num(&tw, "/result/window/max_abs");
    let arcs = num(&tw, "/result/window/arcs");
    let gg = num(&tw, "/result/gauss_green_residual");
    let ratio = num(&tw, "/result/refine/ratio");
    let sm = r.run("gauss_green_refinement").clone();
    let sm_ratio = num(&sm, "/result/refine/ratio");
    report(
        &mut results,
        5,
        bottom <= 0.02 && arcs > 0.0 && gg <= 0.02 && (1.5..=3.0).contains(&ratio),
        format!(
            "bottom-edge max |trace| = {bottom:.2e} over {arcs} arcs, Gauss-Green residual = {gg:.2e} (coarse {:.2e}), ratio = {ratio} (smooth field: {:.2e} -> {:.2e}, ratio {sm_ratio:.3})",
            num(&tw, "/result/refine/coarse_residual"),
            num(&sm, "/result/refine/coarse_residual"),
            num(&sm, "/result/gauss_green_residual"),
        ),
    );

    let p = r.run("perimeter_convergence").clone();
    let errs = nums(&p, "/result/perimeter/rel_error");
    let monotone = p.get("/result/perimeter/monotone").and_then(|v| v.as_bool()) == Some(true);
    report(
        &mut results,
        6,
        monotone && errs.last().is_some_and(|&e| e <= 0.01),
        format!("relative errors {}", sci(&errs)),
    );

    let l = r.run("interior_approximation").clone();
    let lerr = nums(&l, "/result/ladder/rel_error");
    let merr = num(&l, "/result/minkowski/rel_error");
    report(
        &mut results,
        7,
        lerr.len() == 3 && lerr.iter().all(|&e| e <= 0.02) && merr <= 0.03,
        format!(
            "level perimeters {:.4?} (rel errors {}), Minkowski content {:.4} (rel error {merr:.2e})",
            nums(&l, "/result/ladder/perimeter"),
            sci(&lerr),
            num(&l, "/result/minkowski/content")
        ),
    );

    let spread = num(&a, "/result/uniqueness/spread");
    let tol = num(&a, "/result/uniqueness/tolerance");
    report(&mut results, 8, spread <= tol, format!("spread {spread:.2e} <= {tol:.2e}"));

    let b = r.run("boundary_layer").clone();
    let lf = nums(&b, "/result/layer_flux/flux")[0];
    let dens: Vec<(Vec<f64>, bool)> = b
        .get("/result/densities")
        .and_then(|v| v.as_array())
        .map(|v| {
            v.iter()
                .map(|d| {
                    let n: Vec<f64> = d["n_ratios"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
                    (n, d["nonincreasing"].as_bool() == Some(true))
                })
                .collect()
        })
        .unwrap_or_default();
    let dens_ok = !dens.is_empty() && dens.iter().all(|(n, mono)| *mono && n.last().is_some_and(|&x| x <= 0.1));
    report(
        &mut results,
        9,
        within(lf, 2.0 * PI, 0.07) && dens_ok,
        format!(
            "layer flux {lf:.4} ({:.3} of 2 pi), N_0.1 density ratios {:.3?}",
            lf / (2.0 * PI),
            dens.iter().map(|d| &d.0).collect::<Vec<_>>()
        ),
    );

    let st = r.run("swiss_cheese_stability").clone();
    let secs = r.runs.last().unwrap().2;
    let steps = st.get("/result/steps").and_then(|v| v.as_array()).cloned().unwrap_or_default();
    let verified = steps.iter().all(|s| s["extremal"].as_bool() == Some(true))
        || st.get("/result/stopped_at").is_some_and(|v| !v.is_null());
    let fin = num(&st, "/result/final_oracle_distance");
    let mono = st.get("/result/distances_nonincreasing").and_then(|v| v.as_bool()) == Some(true);
    let dist: Vec<f64> = steps.iter().map(|s| s["distance_final"].as_f64().unwrap_or(f64::NAN)).collect();
    report(
        &mut results,
        10,
        verified && fin <= 0.05 && mono && secs <= 300.0,
        format!(
            "{} steps, classes {:?}, final vs cap {fin:.2e}, distances to final {}, {secs:.0} s",
            steps.len(),
            steps.iter().map(|s| s["classification"].as_str().unwrap_or("?")).collect::<Vec<_>>(),
            sci(&dist)
        ),
    );

    let mut kinds = BTreeSet::new();
    let mut failing = Vec::new();
    for (name, art, _) in &r.runs {
        for c in art.get("/invariants").and_then(|v| v.as_array()).into_iter().flatten() {
            let n = c["name"].as_str().unwrap_or("?").to_string();
            if c["pass"].as_bool() != Some(true) {
                failing.push(format!("{name}:{n}={}", c["value"]));
            }
            kinds.insert(n);
        }
    }
    let required = ["tu_below_one", "adjointness", "energy_monotone", "trace_sup_bound", "equivariance"];
    let missing: Vec<_> = required.iter().filter(|k| !kinds.contains(**k)).collect();
    report(
        &mut results,
        11,
        failing.is_empty() && missing.is_empty(),
        format!("checked {kinds:?} over {} scenarios; failing {failing:?}; missing {missing:?}", r.runs.len()),
    );

    let failed: Vec<usize> = results.iter().filter(|(_, p)| !p).map(|(n, _)| *n).collect();
    println!("{} of {} criteria pass; failing: {failed:?}", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
