//! File-driven scenario runs.
//!
//! A scenario names a domain, a grid, a prescribed curvature and one task.
//! [`run_scenario`] writes a run directory holding `report.json`, field
//! dumps (CSV and 16-bit PGM with a JSON sidecar), `run.log` and a
//! `manifest.json` that hashes every other file and carries machine-readable
//! error records.
//!
//! Configs are JSON or TOML, chosen by file extension. Relative input paths
//! (mask images) are resolved against the config's directory.
//!
//! ```toml
//! name = "hemisphere"
//! domain = { kind = "disk", radius = 1.0 }
//! grid = { h = 0.0078125 }
//! curvature = { kind = "constant", value = 2.0 }
//!
//! [task]
//! kind = "solve"
//! mode = "extremal"
//! ```

mod checks;
mod stability;
mod tasks;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub use checks::Check;
pub use stability::{stability_experiment, FillOrder, StabilityStep, StabilityTask};
pub use tasks::{
    CheegerTask, ClassifyTask, DensityProbe, FieldSource, GeometryTask, LimitProbe, Polynomial, SolveMode,
    SolveTask, SuperreducedTask, TraceTask, VerticalityTask,
};

use crate::error::{Error, Result};
use crate::extremality::CurvatureSpec;
use crate::geometry::contour::binary_perimeter;
use crate::geometry::domain::{swiss_cheese, AnalyticDomain, Hole};
use crate::geometry::mask::{rasterize, DomainMask};
use crate::grid::{Grid, Point, ScalarField, VectorField};
use crate::io::{self, ErrorRecord, Manifest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub domain: DomainSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub curvature: CurvatureConfig,
    pub task: Task,
    /// Output directory; `runs/<name>` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    Disk {
        #[serde(default)]
        center: Point,
        radius: f64,
    },
    Box {
        #[serde(default)]
        corner: Point,
        side: f64,
    },
    DiskMinusBalls {
        radius: f64,
        holes: Vec<Hole>,
    },
    /// Unit disk minus the holes of the porous-disk construction.
    SwissCheese {
        a: f64,
        delta: f64,
        eps: f64,
        i_max: u32,
    },
    /// Binary PGM, nonzero pixels inside; the image fixes the grid size and
    /// `origin` is the lower-left corner of the bottom-left pixel.
    MaskFile {
        path: PathBuf,
        #[serde(default)]
        origin: Point,
    },
}

impl DomainSpec {
    pub fn analytic(&self) -> Result<Option<AnalyticDomain>> {
        Ok(Some(match self {
            DomainSpec::Disk { center, radius } => AnalyticDomain::disk(*center, *radius)?,
            DomainSpec::Box { corner, side } => AnalyticDomain::square(*corner, *side)?,
            DomainSpec::DiskMinusBalls { radius, holes } => AnalyticDomain::disk_minus_balls(*radius, holes.clone())?,
            DomainSpec::SwissCheese { a, delta, eps, i_max } => swiss_cheese(*a, *delta, *eps, *i_max)?,
            DomainSpec::MaskFile { .. } => return Ok(None),
        }))
    }

    /// Centre used by radial probes: the disk centre, the box centre, or the
    /// origin.
    pub fn center(&self) -> Point {
        match self {
            DomainSpec::Disk { center, .. } => *center,
            DomainSpec::Box { corner, side } => [corner[0] + side / 2.0, corner[1] + side / 2.0],
            _ => [0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub h: f64,
    /// Empty cells kept around the domain bounds.
    #[serde(default = "default_margin")]
    pub margin: usize,
    /// Box corners; the domain bounds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<Point>,
}

fn default_margin() -> usize {
    4
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureConfig {
    Constant {
        value: f64,
    },
    /// `P(Omega) / |Omega|` from the rasterized domain.
    #[default]
    Normalized,
    /// `c[0] + c[1] x + c[2] y`.
    Affine {
        c: [f64; 3],
    },
}

impl CurvatureConfig {
    pub fn resolve(&self, mask: &DomainMask) -> Result<CurvatureSpec> {
        match self {
            CurvatureConfig::Constant { value } if value.is_finite() => Ok(CurvatureSpec::Constant(*value)),
            CurvatureConfig::Constant { .. } => Err(Error::NonFinite("curvature")),
            CurvatureConfig::Normalized => Ok(CurvatureSpec::Constant(
                binary_perimeter(mask.grid(), mask.inside(), None) / mask.area(),
            )),
            CurvatureConfig::Affine { c } => Ok(CurvatureSpec::field(
                ScalarField::from_fn(*mask.grid(), |p| c[0] + c[1] * p[0] + c[2] * p[1]),
                true,
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Task {
    Classify(ClassifyTask),
    Cheeger(CheegerTask),
    Solve(SolveTask),
    Trace(TraceTask),
    Verticality(VerticalityTask),
    Stability(StabilityTask),
    Superreduced(SuperreducedTask),
    /// Raster perimeter, erosion ladder and Minkowski content against the
    /// closed forms of an analytic domain.
    Geometry(GeometryTask),
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Classify(_) => "classify",
            Task::Cheeger(_) => "cheeger",
            Task::Solve(_) => "solve",
            Task::Trace(_) => "trace",
            Task::Verticality(_) => "verticality",
            Task::Stability(_) => "stability",
            Task::Superreduced(_) => "superreduced",
            Task::Geometry(_) => "geometry",
        }
    }
}

/// Parses `text` as TOML when `toml` is set, JSON otherwise.
pub fn parse_config(text: &str, toml: bool) -> Result<ScenarioConfig> {
    if toml {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    } else {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Reads a config file and resolves relative input paths against its
/// directory.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let mut cfg = parse_config(&text, is_toml)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if let DomainSpec::MaskFile { path: p, .. } = &mut cfg.domain {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if cfg.name.is_empty() {
        cfg.name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scenario".into());
    }
    Ok(cfg)
}

impl ScenarioConfig {
    /// Checks referenced files and task parameters without running anything.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.grid.h > 0.0 && self.grid.h.is_finite()) {
            return bad(format!("grid.h must be positive, got {}", self.grid.h));
        }
        if self.grid.margin < 2 {
            return bad("grid.margin must be at least 2".into());
        }
        if self.grid.lo.is_some() != self.grid.hi.is_some() {
            return bad("grid.lo and grid.hi must be given together".into());
        }
        if let DomainSpec::MaskFile { path, .. } = &self.domain {
            if !path.is_file() {
                return bad(format!("mask file {} does not exist", path.display()));
            }
        } else {
            self.domain.analytic()?;
        }
        match &self.task {
            Task::Classify(_) | Task::Cheeger(_) => Ok(()),
            Task::Solve(t) => t.validate(self),
            Task::Trace(t) => t.validate(self),
            Task::Verticality(t) => t.validate(),
            Task::Stability(t) => t.validate(self),
            Task::Superreduced(t) => t.validate(),
            Task::Geometry(t) => t.validate(self),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| Path::new("runs").join(if self.name.is_empty() { "scenario" } else { &self.name }))
    }

    /// Grid of this scenario at spacing `h`.
    pub fn grid_at(&self, h: f64) -> Result<Grid> {
        if let DomainSpec::MaskFile { .. } = self.domain {
            return Err(Error::Config("mask-file domains have a fixed grid".into()));
        }
        let (lo, hi) = match (self.grid.lo, self.grid.hi) {
            (Some(lo), Some(hi)) => (lo, hi),
            _ => self.domain.analytic()?.expect("analytic domain").bounds(),
        };
        Grid::covering(lo, hi, h, self.grid.margin)
    }

    /// Rasterized domain at spacing `h`.
    pub fn mask_at(&self, h: f64) -> Result<DomainMask> {
        match &self.domain {
            DomainSpec::MaskFile { path, origin } => {
                let pgm = io::read_pgm(path)?;
                let g = Grid::new(pgm.width, pgm.height, self.grid.h, *origin)?;
                if h != self.grid.h {
                    return Err(Error::Config("mask-file domains have a fixed grid".into()));
                }
                io::mask_from_pgm(&pgm, g)
            }
            d => rasterize(&d.analytic()?.expect("analytic domain"), &self.grid_at(h)?),
        }
    }

    pub fn build_mask(&self) -> Result<DomainMask> {
        self.mask_at(self.grid.h)
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the config's output directory.
    pub out: Option<PathBuf>,
    /// Worker threads for tasks with independent sub-runs; 0 or 1 runs
    /// serially. Results are assembled in a fixed order either way.
    pub threads: usize,
    /// Omit wall-clock timings so that reruns produce identical files.
    pub deterministic: bool,
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    /// Contents of `report.json`, absent when the run failed before the
    /// task finished.
    pub report: Option<Value>,
}

impl RunArtifacts {
    pub fn ok(&self) -> bool {
        self.manifest.errors.is_empty()
    }

    /// Value at a `/`-separated JSON pointer into the report.
    pub fn get(&self, pointer: &str) -> Option<&Value> {
        self.report.as_ref()?.pointer(pointer)
    }

    pub fn f64_at(&self, pointer: &str) -> Option<f64> {
        self.get(pointer)?.as_f64()
    }
}

/// Run directory state shared by the task pipelines.
pub(crate) struct Run {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub threads: usize,
    log: Vec<String>,
    deterministic: bool,
    defaults: Map<String, Value>,
}

impl Run {
    fn new(root: PathBuf, opts: &RunOptions, config: Value, seed: u64) -> Result<Run> {
        fs::create_dir_all(&root)?;
        Ok(Run {
            root,
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                status: "running".into(),
                config,
                seed,
                deterministic: opts.deterministic,
                threads: opts.threads.max(1),
                ..Default::default()
            },
            threads: opts.threads.max(1),
            log: Vec::new(),
            deterministic: opts.deterministic,
            defaults: Map::new(),
        })
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        info!("{msg}");
        self.log.push(msg);
    }

    pub fn default_value(&mut self, key: &str, value: Value) {
        self.defaults.insert(key.into(), value);
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Run) -> Result<T>) -> Result<T> {
        let t0 = Instant::now();
        let out = f(self);
        let secs = t0.elapsed().as_secs_f64();
        if !self.deterministic {
            self.manifest.timings.push((stage.into(), secs));
            self.note(format!("{stage}: {secs:.2} s"));
        } else {
            self.note(format!("{stage}: done"));
        }
        out
    }

    fn emit(&mut self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        let p = self.root.join(name);
        write(&p)?;
        self.manifest.record(&self.root.clone(), &p)
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        self.emit(name, |p| io::write_json(p, value))
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.emit(name, |p| io::write_csv(p, header, rows))
    }

    /// `<stem>.csv`, `<stem>.pgm` and the PGM sidecar.
    pub fn scalar(&mut self, stem: &str, field: &ScalarField, mask: Option<&DomainMask>) -> Result<()> {
        self.emit(&format!("{stem}.csv"), |p| io::write_scalar_csv(p, field, mask))?;
        let pgm = self.root.join(format!("{stem}.pgm"));
        let (side, _) = io::write_pgm16(&pgm, field, mask)?;
        let root = self.root.clone();
        self.manifest.record(&root, &pgm)?;
        self.manifest.record(&root, &side)
    }

    pub fn emit_vector(&mut self, name: &str, field: &VectorField, mask: &DomainMask) -> Result<()> {
        self.emit(name, |p| io::write_vector_csv(p, field, Some(mask)))
    }

    pub fn mask(&mut self, name: &str, mask: &DomainMask) -> Result<()> {
        self.emit(name, |p| io::write_mask_pgm(p, mask))
    }

    fn fail(&mut self, stage: &str, e: &Error) {
        self.note(format!("error in {stage}: {e}"));
        self.manifest.errors.push(ErrorRecord::new(stage, e));
    }

    fn finish(mut self, report: Option<Value>) -> Result<RunArtifacts> {
        self.manifest.status = if self.manifest.errors.is_empty() { "ok" } else { "failed" }.into();
        self.manifest.defaults = Value::Object(std::mem::take(&mut self.defaults));
        let mut text = self.log.join("\n");
        text.push('\n');
        self.emit("run.log", |p| Ok(fs::write(p, text)?))?;
        self.manifest.write(&self.root)?;
        Ok(RunArtifacts {
            out_dir: self.root,
            manifest: self.manifest,
            report,
        })
    }
}

fn domain_info(cfg: &ScenarioConfig, mask: &DomainMask) -> Result<Value> {
    let g = mask.grid();
    let exact = cfg.domain.analytic()?;
    Ok(json!({
        "definition": cfg.domain,
        "grid": g,
        "cells": mask.count(),
        "area": mask.area(),
        "perimeter": binary_perimeter(g, mask.inside(), None),
        "exact_area": exact.as_ref().map(|d| d.exact_area()),
        "exact_perimeter": exact.as_ref().map(|d| d.exact_perimeter()),
        "warnings": mask.warnings(),
    }))
}

/// Runs `cfg` and writes the run directory. Hard errors are recorded in the
/// manifest rather than returned; only failures to write the directory
/// itself are returned as `Err`.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    let root = opts.out.clone().unwrap_or_else(|| cfg.output_dir());
    let mut run = Run::new(root, opts, io::to_json_value(cfg)?, cfg.seed)?;
    run.note(format!("scenario {} ({})", cfg.name, cfg.task.name()));
    if let Err(e) = cfg.validate() {
        run.fail("config-parse", &e);
        return run.finish(None);
    }
    let mask = match run.timed("domain", |_| cfg.build_mask()) {
        Ok(m) => m,
        Err(e) => {
            run.fail("domain-build", &e);
            return run.finish(None);
        }
    };
    for w in mask.warnings() {
        run.note(format!("domain warning: {w}"));
    }
    run.mask("mask.pgm", &mask)?;
    let domain = domain_info(cfg, &mask)?;
    let outcome = run.timed(cfg.task.name(), |run| tasks::dispatch(cfg, &mask, run));
    let report = match outcome {
        Ok(out) => {
            let all_pass = out.checks.iter().all(|c| c.pass);
            let mut report = json!({
                "name": cfg.name,
                "task": cfg.task.name(),
                "domain": domain,
                "result": out.result,
                "invariants": out.checks,
                "invariants_pass": all_pass,
            });
            for e in &out.soft_errors {
                run.manifest.errors.push(e.clone());
            }
            report = io::to_json_value(&report)?;
            run.json("report.json", &report)?;
            Some(report)
        }
        Err(e) => {
            run.fail("solver", &e);
            None
        }
    };
    run.finish(report)
}

/// Parses and runs a config file. Parse failures still produce a run
/// directory with an error record, under `opts.out` or `runs/<file stem>`.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunArtifacts> {
    match load_config(path) {
        Ok(cfg) => run_scenario(&cfg, opts),
        Err(e) => {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let root = opts.out.clone().unwrap_or_else(|| Path::new("runs").join(stem));
            let mut run = Run::new(root, opts, Value::Null, 0)?;
            run.fail("config-parse", &e);
            run.finish(None)
        }
    }
}

/// Writes the rasterized domain (`mask.pgm`, `distance.csv/.pgm`) and a
/// `domain.json` summary without running the task.
pub fn dump_domain(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunArtifacts> {
    let root = opts.out.clone().unwrap_or_else(|| cfg.output_dir());
    let mut run = Run::new(root, opts, io::to_json_value(cfg)?, cfg.seed)?;
    let mask = match cfg.validate().and_then(|_| cfg.build_mask()) {
        Ok(m) => m,
        Err(e) => {
            let stage = if matches!(e, Error::Config(_)) { "config-parse" } else { "domain-build" };
            run.fail(stage, &e);
            return run.finish(None);
        }
    };
    run.mask("mask.pgm", &mask)?;
    let df = crate::geometry::distance::signed_distance(&mask);
    run.scalar("distance", &df.signed, None)?;
    let info = io::to_json_value(&domain_info(cfg, &mask)?)?;
    run.json("domain.json", &info)?;
    run.finish(Some(info))
}
