//! File formats: curve snapshot CSVs, JSON sidecars, the JSONL step log,
//! run manifests, and SVG curve plots.
//!
//! All numeric output is deterministic: CSV floats are printed with 17
//! significant digits (lossless for f64), JSON floats use the shortest
//! round-trip form.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curve::{GridCurve, Topology};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write one curve as `j,sigma,x,y` rows (interior nodes only, ghosts
/// omitted).
pub fn write_curve_csv(path: &Path, curve: &GridCurve) -> Result<()> {
    let mut out = String::from("j,sigma,x,y\n");
    for j in 1..=curve.n() as i32 {
        let p = curve.point(j)?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            j,
            fmt17(curve.sigma(j)),
            fmt17(p.x),
            fmt17(p.y)
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read a curve snapshot back; `topology` restores what the CSV does not
/// carry.
pub fn read_curve_csv(path: &Path, topology: Topology) -> Result<GridCurve> {
    let text = fs::read_to_string(path)?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "j,sigma,x,y" {
                return Err(Error::Io(format!("unexpected CSV header: {line}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Io(format!("bad CSV row: {line}")));
        }
        let x: f64 = fields[2].parse().map_err(|e| Error::Io(format!("{e}")))?;
        let y: f64 = fields[3].parse().map_err(|e| Error::Io(format!("{e}")))?;
        pts.push(Vec2::new(x, y));
    }
    match topology {
        Topology::Closed => GridCurve::closed(pts),
        t => GridCurve::open(pts, t),
    }
}

/// JSON sidecar for a quarter-loop snapshot.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QuarterLoopSidecar {
    pub t: f64,
    pub m: f64,
    pub alpha: f64,
    pub junction: [f64; 2],
    /// PDAE curvature-ghost unknowns, absent for the parabolic formulation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_ghost: Option<[f64; 2]>,
}

/// Write three curve CSVs plus the JSON sidecar under
/// `dir/<stem>.{grain,left,right}.csv` and `dir/<stem>.json`.
pub fn write_quarterloop_snapshot(
    dir: &Path,
    stem: &str,
    curves: &[GridCurve; 3],
    sidecar: &QuarterLoopSidecar,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (suffix, c) in ["grain", "left", "right"].iter().zip(curves) {
        write_curve_csv(&dir.join(format!("{stem}.{suffix}.csv")), c)?;
    }
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}

/// Cartesian snapshot: `x,y_or_u,branch` rows plus sidecar `{t, s, s_t}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CartesianSidecar {
    pub t: f64,
    pub s: f64,
    pub s_t: f64,
}

pub fn write_cartesian_snapshot(
    dir: &Path,
    stem: &str,
    branches: &[(&str, Vec<(f64, f64)>)],
    sidecar: &CartesianSidecar,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut out = String::from("x,y_or_u,branch\n");
    for (name, rows) in branches {
        for (x, v) in rows {
            out.push_str(&format!("{},{},{}\n", fmt17(*x), fmt17(*v), name));
        }
    }
    fs::write(dir.join(format!("{stem}.csv")), out)?;
    let json = serde_json::to_string_pretty(sidecar).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
    Ok(())
}

/// One line of the JSONL step log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepLogEntry {
    pub step: usize,
    pub t: f64,
    pub iters: usize,
    pub resid: f64,
    pub dt: f64,
}

pub struct RunLog {
    path: PathBuf,
    buf: String,
}

impl RunLog {
    pub fn create(path: PathBuf) -> Self {
        RunLog {
            path,
            buf: String::new(),
        }
    }

    pub fn append(&mut self, entry: &StepLogEntry) {
        self.buf.push_str(&serde_json::to_string(entry).unwrap());
        self.buf.push('\n');
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(parent) = self.path.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)?;
        f.write_all(self.buf.as_bytes())?;
        self.buf.clear();
        Ok(())
    }
}

/// Run manifest: enough to reproduce the run. The wall time lives only here,
/// so every other artifact stays bit-identical across reruns.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub tool: &'a str,
    pub version: &'a str,
    pub config: &'a C,
    pub wall_seconds: f64,
}

pub fn write_manifest<C: Serialize>(dir: &Path, manifest: &Manifest<'_, C>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(())
}

/// Minimal SVG plot: one polyline per curve, a marker at the junction.
pub fn write_svg(path: &Path, curves: &[&GridCurve], junction: Option<Vec2>) -> Result<()> {
    let (mut lo, mut hi) = (
        Vec2::new(f64::INFINITY, f64::INFINITY),
        Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
    );
    for c in curves {
        for p in c.interior() {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
    }
    let span = (hi - lo).norm().max(1e-9);
    let pad = 0.05 * span;
    lo -= Vec2::new(pad, pad);
    hi += Vec2::new(pad, pad);
    let w = 800.0;
    let scale = w / (hi.x - lo.x);
    let hgt = (hi.y - lo.y) * scale;
    let map = |p: Vec2| (((p.x - lo.x) * scale), (hi.y - p.y) * scale);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{hgt:.0}\" \
         viewBox=\"0 0 {w:.0} {hgt:.0}\">\n"
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    for (i, c) in curves.iter().enumerate() {
        let pts: Vec<String> = c
            .interior()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            colors[i % colors.len()],
            pts.join(" ")
        ));
    }
    if let Some(j) = junction {
        let (x, y) = map(j);
        svg.push_str(&format!(
            "  <circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"4\" fill=\"black\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, svg)?;
    Ok(())
}
