//! Report, field and manifest output.
//!
//! Floating-point numbers are written with 9 significant digits. CSV files
//! use scientific notation; JSON numbers are rounded to 9 digits and then
//! printed in the shortest form that reads back to the rounded value.
//!
//! PGM dumps are binary 16-bit (`P5`, maxval 65535, big-endian), top row
//! first, so row 0 of the image is the largest `y`. A sidecar
//! `<name>.pgm.json` records the affine map `value = offset + scale * pixel`.
//! When a mask is given, pixel 0 marks cells outside it and the field is
//! mapped onto `1..=65535`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::mask::DomainMask;
use crate::grid::{Grid, ScalarField, VectorField};

/// `x` with 9 significant digits in scientific notation.
pub fn fmt9(x: f64) -> String {
    format!("{x:.8e}")
}

/// `x` rounded to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    fmt9(x).parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(r) = n.as_f64().map(round9).and_then(serde_json::Number::from_f64) {
                    *n = r;
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_value),
        Value::Object(o) => o.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes `value` with every float rounded to 9 significant digits.
/// Non-finite floats become `null`.
pub fn to_json_value<T: Serialize + ?Sized>(value: &T) -> Result<Value> {
    let mut v = serde_json::to_value(value)?;
    round_value(&mut v);
    Ok(v)
}

pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(&to_json_value(value)?)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = to_json_string(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Numeric table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "CSV row has {} columns, header has {}",
                row.len(),
                header.len()
            )));
        }
        w.write_record(row.iter().map(|&x| fmt9(x))).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Config(format!("{other:?}")),
    }
}

fn cells<'a>(grid: &'a Grid, mask: Option<&'a DomainMask>) -> impl Iterator<Item = usize> + 'a {
    (0..grid.len()).filter(move |&k| mask.map_or(true, |m| m.contains(k)))
}

/// Columns `x, y, value` over the mask cells, or all cells.
pub fn write_scalar_csv(path: &Path, field: &ScalarField, mask: Option<&DomainMask>) -> Result<()> {
    let g = field.grid;
    let rows: Vec<Vec<f64>> = cells(&g, mask)
        .map(|k| {
            let p = g.center_of(k);
            vec![p[0], p[1], field.values[k]]
        })
        .collect();
    write_csv(path, &["x", "y", "value"], &rows)
}

/// Columns `x, y, vx, vy` over the mask cells, or all cells.
pub fn write_vector_csv(path: &Path, field: &VectorField, mask: Option<&DomainMask>) -> Result<()> {
    let g = field.grid;
    let rows: Vec<Vec<f64>> = cells(&g, mask)
        .map(|k| {
            let p = g.center_of(k);
            let v = field.values[k];
            vec![p[0], p[1], v[0], v[1]]
        })
        .collect();
    write_csv(path, &["x", "y", "vx", "vy"], &rows)
}

/// Affine pixel scaling stored next to a PGM dump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PgmScaling {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    /// `value = offset + scale * pixel`.
    pub offset: f64,
    pub scale: f64,
    /// Pixel value of cells outside the mask, if a mask was applied.
    pub masked_pixel: Option<u32>,
    pub grid: Grid,
    pub row_order: String,
}

impl PgmScaling {
    pub fn value(&self, pixel: u16) -> f64 {
        self.offset + self.scale * pixel as f64
    }
}

/// Writes `field` as a 16-bit PGM and the sidecar JSON; returns the sidecar
/// path.
pub fn write_pgm16(path: &Path, field: &ScalarField, mask: Option<&DomainMask>) -> Result<(PathBuf, PgmScaling)> {
    let g = field.grid;
    let vals = || cells(&g, mask).map(|k| field.values[k]).filter(|v| v.is_finite());
    let lo = vals().fold(f64::INFINITY, f64::min);
    let hi = vals().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
    let first = if mask.is_some() { 1.0 } else { 0.0 };
    let levels = 65535.0 - first;
    let scale = if hi > lo { (hi - lo) / levels } else { 1.0 };
    let offset = lo - first * scale;
    let mut bytes = format!("P5\n{} {}\n65535\n", g.nx, g.ny).into_bytes();
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let v = field.values[k];
            let px = if mask.is_some_and(|m| !m.contains(k)) || !v.is_finite() {
                0u16
            } else {
                ((v - offset) / scale).round().clamp(first, 65535.0) as u16
            };
            bytes.extend_from_slice(&px.to_be_bytes());
        }
    }
    fs::write(path, bytes)?;
    let scaling = PgmScaling {
        width: g.nx,
        height: g.ny,
        maxval: 65535,
        offset,
        scale,
        masked_pixel: mask.map(|_| 0),
        grid: g,
        row_order: "top row first (largest y)".into(),
    };
    let side = sidecar_path(path);
    write_json(&side, &scaling)?;
    Ok((side, scaling))
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Raw `P5` image: width, height, maxval and pixels in row-major order, top
/// row first.
#[derive(Clone, Debug, PartialEq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub pixels: Vec<u16>,
}

pub fn read_pgm(path: &Path) -> Result<Pgm> {
    parse_pgm(&fs::read(path)?)
}

pub fn parse_pgm(data: &[u8]) -> Result<Pgm> {
    let bad = |m: &str| Error::Config(format!("PGM: {m}"));
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            while pos < data.len() && data[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < data.len() && data[pos] == b'#' {
                while pos < data.len() && data[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < data.len() && !data[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(bad("only binary P5 images are supported"));
    }
    let num = |t: String| t.parse::<usize>().map_err(|_| bad("malformed header"));
    let width = num(token()?)?;
    let height = num(token()?)?;
    let maxval = num(token()?)? as u32;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(bad("invalid dimensions or maxval"));
    }
    let body = &data[pos + 1..];
    let wide = maxval > 255;
    let need = width * height * if wide { 2 } else { 1 };
    if body.len() < need {
        return Err(bad("pixel data is truncated"));
    }
    let pixels = if wide {
        body[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        body[..need].iter().map(|&b| b as u16).collect()
    };
    Ok(Pgm { width, height, maxval, pixels })
}

/// Mask from a PGM on the given grid: nonzero pixels are inside.
pub fn mask_from_pgm(pgm: &Pgm, grid: Grid) -> Result<DomainMask> {
    if pgm.width != grid.nx || pgm.height != grid.ny {
        return Err(Error::GridMismatch(format!(
            "mask image is {}x{}, grid is {}x{}",
            pgm.width, pgm.height, grid.nx, grid.ny
        )));
    }
    let mut inside = vec![false; grid.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            inside[grid.idx(i, j)] = pgm.pixels[(grid.ny - 1 - j) * grid.nx + i] != 0;
        }
    }
    DomainMask::new(grid, inside)
}

/// Binary mask dump, 255 inside.
pub fn write_mask_pgm(path: &Path, mask: &DomainMask) -> Result<()> {
    let g = mask.grid();
    let mut bytes = format!("P5\n{} {}\n255\n", g.nx, g.ny).into_bytes();
    for j in (0..g.ny).rev() {
        for i in 0..g.nx {
            bytes.push(if mask.contains(g.idx(i, j)) { 255 } else { 0 });
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    /// Pipeline stage: `config-parse`, `domain-build`, `solver` or `output`.
    pub stage: String,
    /// Machine-readable error kind.
    pub kind: String,
    pub message: String,
}

impl ErrorRecord {
    pub fn new(stage: &str, e: &Error) -> Self {
        ErrorRecord {
            stage: stage.into(),
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub status: String,
    /// Resolved configuration as run.
    pub config: Value,
    pub seed: u64,
    pub deterministic: bool,
    pub threads: usize,
    /// Wall-clock seconds per stage; empty in deterministic mode.
    pub timings: Vec<(String, f64)>,
    /// Defaults applied by the runner that are not visible in the config.
    pub defaults: Value,
    pub files: Vec<FileRecord>,
    pub errors: Vec<ErrorRecord>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let data = fs::read(path)?;
    Ok((data.len() as u64, hex::encode(Sha256::digest(&data))))
}

impl Manifest {
    /// Hashes `path` and records it relative to `root`.
    pub fn record(&mut self, root: &Path, path: &Path) -> Result<()> {
        let (bytes, sha256) = sha256_file(path)?;
        let rel = path.strip_prefix(root).unwrap_or(path).to_string_lossy().into_owned();
        self.files.retain(|f| f.path != rel);
        self.files.push(FileRecord { path: rel, bytes, sha256 });
        Ok(())
    }

    /// Writes `manifest.json` into `root`; the manifest does not list itself.
    pub fn write(&mut self, root: &Path) -> Result<PathBuf> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let path = root.join("manifest.json");
        let mut f = fs::File::create(&path)?;
        writeln!(f, "{}", to_json_string(self)?)?;
        Ok(path)
    }

    /// Files whose content no longer matches the recorded hash.
    pub fn verify(&self, root: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|r| sha256_file(&root.join(&r.path)).map_or(true, |(_, h)| h != r.sha256))
            .map(|r| r.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::AnalyticDomain;
    use crate::geometry::mask::rasterize;

    #[test]
    fn nine_digits() {
        assert_eq!(fmt9(std::f64::consts::PI), "3.14159265e0");
        assert_eq!(round9(1.0 / 3.0), 0.333333333);
        let v = to_json_value(&serde_json::json!({"a": [2.0f64.sqrt(), 1], "b": "x"})).unwrap();
        assert_eq!(v.to_string(), r#"{"a":[1.41421356,1],"b":"x"}"#);
    }

    #[test]
    fn pgm_round_trip_respects_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::covering([-1.0, -1.0], [1.0, 1.0], 1.0 / 16.0, 3).unwrap();
        let m = rasterize(&AnalyticDomain::unit_disk(), &g).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0] - 2.0 * p[1]);
        let path = dir.path().join("f.pgm");
        let (side, scaling) = write_pgm16(&path, &f, Some(&m)).unwrap();
        let read: PgmScaling = serde_json::from_str(&fs::read_to_string(side).unwrap()).unwrap();
        assert_eq!(read, PgmScaling { offset: round9(scaling.offset), scale: round9(scaling.scale), ..scaling.clone() });
        let pgm = read_pgm(&path).unwrap();
        assert_eq!((pgm.width, pgm.height, pgm.maxval), (g.nx, g.ny, 65535));
        for j in 0..g.ny {
            for i in 0..g.nx {
                let k = g.idx(i, j);
                let px = pgm.pixels[(g.ny - 1 - j) * g.nx + i];
                if m.contains(k) {
                    assert!((scaling.value(px) - f.values[k]).abs() <= scaling.scale, "{k}");
                } else {
                    assert_eq!(px, 0);
                }
            }
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::covering([0.0, 0.0], [1.0, 1.0], 1.0 / 16.0, 3).unwrap();
        let m = DomainMask::from_predicate(g, |p| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 0.5).unwrap();
        let path = dir.path().join("m.pgm");
        write_mask_pgm(&path, &m).unwrap();
        let back = mask_from_pgm(&read_pgm(&path).unwrap(), g).unwrap();
        assert_eq!(back.inside(), m.inside());
        assert!(parse_pgm(b"P2\n2 2\n255\n0 0 0 0").is_err());
        assert!(parse_pgm(b"P5\n4 4\n255\n\x00").is_err());
    }

    #[test]
    fn csv_uses_scientific_notation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&path, &["t", "e"], &[vec![0.5, 1.0 / 3.0]]).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,e\n5.00000000e-1,3.33333333e-1\n");
        assert!(write_csv(&path, &["t"], &[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn manifest_hashes_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        fs::write(&p, "abc").unwrap();
        let mut m = Manifest::default();
        m.record(dir.path(), &p).unwrap();
        assert_eq!(m.files[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(m.files[0].path, "a.txt");
        assert!(m.verify(dir.path()).is_empty());
        fs::write(&p, "abd").unwrap();
        assert_eq!(m.verify(dir.path()), vec!["a.txt".to_string()]);
        let written = m.write(dir.path()).unwrap();
        let back: Manifest = serde_json::from_str(&fs::read_to_string(written).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
