//! Nonlinear-circuit blocks and their tabulated impedance over a
//! (frequency × power) grid.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diode::{
    describing_function_impedance, transient_steady_state, DiodeParams, DriveSpec, HbSettings,
    SteadyStateResult, TransientSettings,
};
use crate::error::{Axis, Error, Result};
use crate::units::{Frequency, Grid2D, Immittance, PowerLevel};

/// A grounded block of identical packaged diodes: `n_antiparallel_branches`
/// strings, half conducting in each direction, each holding
/// `n_series_per_branch` diodes in series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonlinearCircuit {
    #[serde(default)]
    pub diode: DiodeParams,
    pub n_series_per_branch: usize,
    pub n_antiparallel_branches: usize,
}

impl Default for NonlinearCircuit {
    /// Eight diodes as four antiparallel branches of two.
    fn default() -> Self {
        NonlinearCircuit {
            diode: DiodeParams::default(),
            n_series_per_branch: 2,
            n_antiparallel_branches: 4,
        }
    }
}

impl NonlinearCircuit {
    pub fn validate(&self) -> Result<()> {
        self.diode.validate()?;
        if self.n_series_per_branch < 1 {
            return Err(Error::config("nc.n_series_per_branch", "must be >= 1"));
        }
        if self.n_antiparallel_branches < 2 || self.n_antiparallel_branches % 2 != 0 {
            return Err(Error::config(
                "nc.n_antiparallel_branches",
                "must be an even count >= 2",
            ));
        }
        Ok(())
    }

    pub fn total_diodes(&self) -> usize {
        self.n_series_per_branch * self.n_antiparallel_branches
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Hb,
    Transient,
}

impl std::str::FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hb" => Ok(SolverKind::Hb),
            "transient" => Ok(SolverKind::Transient),
            other => Err(Error::config("solver", format!("unknown solver `{other}`"))),
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverKind::Hb => "hb",
            SolverKind::Transient => "transient",
        })
    }
}

/// Steady-state solver selection plus the settings of both solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub kind: SolverKind,
    pub hb: HbSettings,
    pub transient: TransientSettings,
    /// Real source impedance used to define the drive level.
    pub source_impedance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            kind: SolverKind::Hb,
            hb: HbSettings::default(),
            transient: TransientSettings::default(),
            source_impedance: 50.0,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        self.hb.validate()?;
        self.transient.validate()?;
        if !(self.source_impedance > 0.0 && self.source_impedance.is_finite()) {
            return Err(Error::config("solver.source_impedance", "must be > 0"));
        }
        Ok(())
    }

    pub fn tolerance(&self) -> f64 {
        match self.kind {
            SolverKind::Hb => self.hb.tolerance,
            SolverKind::Transient => self.transient.tolerance,
        }
    }
}

/// Solves one drive point with the configured solver.
pub fn steady_state(
    nc: &NonlinearCircuit,
    f: Frequency,
    p: PowerLevel,
    solver: &SolverSettings,
) -> Result<SteadyStateResult> {
    let drive = DriveSpec {
        frequency: f,
        available_power: p,
        source_impedance: solver.source_impedance,
    };
    match solver.kind {
        SolverKind::Hb => describing_function_impedance(&nc.diode, nc, &drive, &solver.hb),
        SolverKind::Transient => {
            transient_steady_state(&nc.diode, nc, &drive, &solver.transient)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub solver: SolverKind,
    pub tolerance: f64,
    /// Source resistance that defines the power axis.
    pub source_impedance: f64,
}

impl Provenance {
    pub fn of(solver: &SolverSettings) -> Self {
        Provenance {
            solver: solver.kind,
            tolerance: solver.tolerance(),
            source_impedance: solver.source_impedance,
        }
    }
}

/// Tabulated grounded-NC impedance, row-major by frequency then power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceSurface {
    pub grid: Grid2D,
    values: Vec<Complex64>,
    pub provenance: Provenance,
}

impl ImpedanceSurface {
    pub fn new(grid: Grid2D, values: Vec<Complex64>, provenance: Provenance) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Precondition(format!(
                "surface has {} values for a {}-cell grid",
                values.len(),
                grid.len()
            )));
        }
        if let Some(z) = values.iter().find(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Precondition(format!("non-finite surface value {z}")));
        }
        if let Some(z) = values.iter().find(|z| z.re < -1e-9) {
            return Err(Error::Precondition(format!("active surface value {z}")));
        }
        Ok(ImpedanceSurface {
            grid,
            values,
            provenance,
        })
    }

    pub fn value(&self, fi: usize, pi: usize) -> Complex64 {
        self.values[fi * self.grid.p_axis.len() + pi]
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn f_range(&self) -> (f64, f64) {
        (self.grid.f_axis[0], *self.grid.f_axis.last().unwrap())
    }

    pub fn p_range(&self) -> (f64, f64) {
        (self.grid.p_axis[0], *self.grid.p_axis.last().unwrap())
    }

    /// Bilinear interpolation in (Hz, dBm), applied to Re and Im
    /// separately. Queries outside the grid are rejected.
    pub fn interpolate(&self, f: Frequency, p: PowerLevel) -> Result<Immittance> {
        self.interpolate_dbm(f.hz(), p.dbm())
    }

    pub fn interpolate_dbm(&self, f_hz: f64, p_dbm: f64) -> Result<Immittance> {
        let (fi, tf) = locate(&self.grid.f_axis, f_hz, Axis::Frequency)?;
        let (pi, tp) = locate(&self.grid.p_axis, p_dbm, Axis::Power)?;
        let nf = self.grid.f_axis.len();
        let np = self.grid.p_axis.len();
        let fj = (fi + 1).min(nf - 1);
        let pj = (pi + 1).min(np - 1);
        let z = self.value(fi, pi) * ((1.0 - tf) * (1.0 - tp))
            + self.value(fi, pj) * ((1.0 - tf) * tp)
            + self.value(fj, pi) * (tf * (1.0 - tp))
            + self.value(fj, pj) * (tf * tp);
        Ok(Immittance::from_impedance(z))
    }

    /// Writes `f_hz,p_dbm,re_ohm,im_ohm` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let wrap = |e: csv::Error| Error::Precondition(format!("csv write failed: {e}"));
        w.write_record(["f_hz", "p_dbm", "re_ohm", "im_ohm"]).map_err(wrap)?;
        for (i, (f, p)) in self.grid.cells().enumerate() {
            let z = self.values[i];
            w.write_record([f, p, z.re, z.im].map(fmt_f64)).map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Parses a surface written by [`ImpedanceSurface::write_csv`]. Rows
    /// must form a complete row-major grid.
    pub fn read_csv<R: Read>(input: R, path: &Path, provenance: Provenance) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(input);
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            column: 0,
            message: msg,
        };
        let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["f_hz", "p_dbm", "re_ohm", "im_ohm"] {
            return Err(parse_err(1, format!("unexpected header {headers:?}")));
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let mut vals = [0.0; 4];
            for (j, v) in vals.iter_mut().enumerate() {
                *v = rec
                    .get(j)
                    .ok_or_else(|| parse_err(line, "missing field".into()))?
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(line, format!("column {}: {e}", j + 1)))?;
            }
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(parse_err(1, "no data rows".into()));
        }
        let mut f_axis: Vec<f64> = Vec::new();
        for r in &rows {
            if f_axis.last() != Some(&r[0]) {
                f_axis.push(r[0]);
            }
        }
        let np = rows.len() / f_axis.len();
        let p_axis: Vec<f64> = rows[..np].iter().map(|r| r[1]).collect();
        if np * f_axis.len() != rows.len() {
            return Err(parse_err(1, "rows do not form a complete grid".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r[0] != f_axis[i / np] || r[1] != p_axis[i % np] {
                return Err(parse_err(i + 2, "rows are not row-major by frequency then power".into()));
            }
        }
        let grid = Grid2D::from_axes(f_axis, p_axis)?;
        let values = rows.iter().map(|r| Complex64::new(r[2], r[3])).collect();
        ImpedanceSurface::new(grid, values, provenance)
    }
}

/// 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Cell index and fractional position of `x` on `axis`.
fn locate(axis: &[f64], x: f64, which: Axis) -> Result<(usize, f64)> {
    let (lo, hi) = (axis[0], axis[axis.len() - 1]);
    if !(x >= lo && x <= hi) {
        return Err(Error::Range {
            axis: which,
            value: x,
            min: lo,
            max: hi,
        });
    }
    if axis.len() == 1 {
        return Ok((0, 0.0));
    }
    let i = axis.partition_point(|&a| a <= x).clamp(1, axis.len() - 1) - 1;
    let t = (x - axis[i]) / (axis[i + 1] - axis[i]);
    Ok((i, t))
}

/// Grid used when a configuration does not override it: 0.6–1.5 GHz in
/// 20 MHz steps by −40…+30 dBm in 2 dB steps.
pub fn default_grid() -> Grid2D {
    crate::units::make_grid(0.6e9, 1.5e9, 46, -40.0, 30.0, 36).expect("static grid")
}

/// Solves every grid cell independently (in parallel). Any failed cell
/// fails the whole build, listing all failed cells.
pub fn build_surface(
    nc: &NonlinearCircuit,
    grid: &Grid2D,
    solver: &SolverSettings,
) -> Result<ImpedanceSurface> {
    nc.validate()?;
    solver.validate()?;
    let cells: Vec<(f64, f64)> = grid.cells().collect();
    let results: Vec<Result<SteadyStateResult>> = cells
        .par_iter()
        .map(|&(f, p)| steady_state(nc, Frequency::new(f)?, PowerLevel::from_dbm(p), solver))
        .collect();
    let mut values = Vec::with_capacity(cells.len());
    let mut failed = Vec::new();
    for (cell, r) in cells.iter().zip(results) {
        match r {
            Ok(s) if s.z_fundamental.re() >= -1e-9 => values.push(s.z_fundamental.value),
            _ => failed.push(*cell),
        }
    }
    if !failed.is_empty() {
        return Err(Error::SurfaceBuild { cells: failed });
    }
    ImpedanceSurface::new(
        grid.clone(),
        values,
        Provenance::of(solver),
    )
}

/// Content hash of everything that determines a surface.
pub fn surface_key(nc: &NonlinearCircuit, grid: &Grid2D, solver: &SolverSettings) -> String {
    let doc = serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "nc": nc,
        "grid": grid,
        "solver": solver,
    });
    hex::encode(Sha256::digest(doc.to_string().as_bytes()))
}

/// Directory for cached surfaces: `$NLTR_CACHE_DIR`, else
/// `$XDG_CACHE_HOME/nltr`, else `$HOME/.cache/nltr`.
pub fn cache_dir() -> Option<PathBuf> {
    if let Some(d) = std::env::var_os("NLTR_CACHE_DIR") {
        return Some(PathBuf::from(d));
    }
    if let Some(d) = std::env::var_os("XDG_CACHE_HOME") {
        return Some(PathBuf::from(d).join("nltr"));
    }
    std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache").join("nltr"))
}

/// Returns the cached surface for these inputs if present, otherwise builds
/// and stores it. `dir = None` disables caching.
pub fn cached_surface(
    nc: &NonlinearCircuit,
    grid: &Grid2D,
    solver: &SolverSettings,
    dir: Option<&Path>,
) -> Result<ImpedanceSurface> {
    let Some(dir) = dir else {
        return build_surface(nc, grid, solver);
    };
    let path = dir.join(format!("surface-{}.csv", surface_key(nc, grid, solver)));
    let provenance = Provenance::of(solver);
    if let Ok(file) = std::fs::File::open(&path) {
        if let Ok(s) = ImpedanceSurface::read_csv(std::io::BufReader::new(file), &path, provenance.clone()) {
            if s.grid == *grid {
                return Ok(s);
            }
        }
    }
    let surface = build_surface(nc, grid, solver)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut buf = Vec::new();
    surface.write_csv(&mut buf)?;
    crate::io::write_atomic(&path, &buf)?;
    Ok(surface)
}
