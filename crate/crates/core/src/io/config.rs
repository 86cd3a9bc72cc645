//! JSON run configuration. Every field is optional and defaults to the
//! reference design; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diode::DiodeParams;
use crate::error::{Error, Result};
use crate::network::{OperatingSettings, StubPlacement, SwitchDesign, TransmissionLine};
use crate::optimizer::{GaConfig, Objective};
use crate::surface::{NonlinearCircuit, SolverSettings};
use crate::units::{make_grid, Grid2D};

/// Series/parallel arrangement shared by all four NCs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NcTopology {
    pub n_series_per_branch: usize,
    pub n_antiparallel_branches: usize,
}

impl Default for NcTopology {
    fn default() -> Self {
        let nc = NonlinearCircuit::default();
        NcTopology {
            n_series_per_branch: nc.n_series_per_branch,
            n_antiparallel_branches: nc.n_antiparallel_branches,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lines {
    pub it1: TransmissionLine,
    pub it2: TransmissionLine,
    pub it3: TransmissionLine,
}

impl Default for Lines {
    fn default() -> Self {
        let d = SwitchDesign::default();
        Lines {
            it1: d.it1,
            it2: d.it2,
            it3: d.it3,
        }
    }
}

/// Evenly spaced (frequency × power) tabulation grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub f_points: usize,
    pub p_start_dbm: f64,
    pub p_stop_dbm: f64,
    pub p_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            f_start_hz: 0.6e9,
            f_stop_hz: 1.5e9,
            f_points: 46,
            p_start_dbm: -40.0,
            p_stop_dbm: 30.0,
            p_points: 36,
        }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<Grid2D> {
        make_grid(
            self.f_start_hz,
            self.f_stop_hz,
            self.f_points,
            self.p_start_dbm,
            self.p_stop_dbm,
            self.p_points,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySweep {
    pub power_dbm: f64,
    pub f_start_hz: f64,
    pub f_stop_hz: f64,
    pub points: usize,
}

impl Default for FrequencySweep {
    fn default() -> Self {
        FrequencySweep {
            power_dbm: -30.0,
            f_start_hz: 0.8e9,
            f_stop_hz: 1.3e9,
            points: 101,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerSweep {
    pub f_hz: f64,
    pub p_start_dbm: f64,
    pub p_stop_dbm: f64,
    pub points: usize,
}

impl Default for PowerSweep {
    fn default() -> Self {
        PowerSweep {
            f_hz: 1.2e9,
            p_start_dbm: -40.0,
            p_stop_dbm: 30.0,
            points: 71,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweeps {
    pub frequency: FrequencySweep,
    pub power: PowerSweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub ga: GaConfig,
    pub objective: Objective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub diode: DiodeParams,
    pub nc_topology: NcTopology,
    pub lines: Lines,
    pub z_p: f64,
    pub stub_placement: StubPlacement,
    pub surface_grid: GridSpec,
    pub solver: SolverSettings,
    pub operating: OperatingSettings,
    pub sweeps: Sweeps,
    pub optimizer: OptimizerConfig,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            diode: DiodeParams::default(),
            nc_topology: NcTopology::default(),
            lines: Lines::default(),
            z_p: 50.0,
            stub_placement: StubPlacement::TxPort,
            surface_grid: GridSpec::default(),
            solver: SolverSettings::default(),
            operating: OperatingSettings::default(),
            sweeps: Sweeps::default(),
            optimizer: OptimizerConfig::default(),
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Re-roots a field name reported by a sub-structure's validator.
fn under(prefix: &str, e: Error) -> Error {
    match e {
        Error::Config { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
        other => other,
    }
}

fn positive_points(field: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config(field, "must be >= 1"));
    }
    Ok(())
}

impl RunConfig {
    pub fn nc(&self) -> NonlinearCircuit {
        NonlinearCircuit {
            diode: self.diode,
            n_series_per_branch: self.nc_topology.n_series_per_branch,
            n_antiparallel_branches: self.nc_topology.n_antiparallel_branches,
        }
    }

    pub fn design(&self) -> SwitchDesign {
        SwitchDesign {
            it1: self.lines.it1,
            it2: self.lines.it2,
            it3: self.lines.it3,
            nc: [self.nc(); 4],
            z_p: self.z_p,
            stub_placement: self.stub_placement,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.diode.validate()?;
        let nc = self.nc();
        nc.validate().map_err(|e| match e {
            Error::Config { field, reason } => {
                Error::config(field.replacen("nc.", "nc_topology.", 1), reason)
            }
            other => other,
        })?;
        self.lines.it1.validate("lines.it1")?;
        self.lines.it2.validate("lines.it2")?;
        self.lines.it3.validate("lines.it3")?;
        if !(self.z_p > 0.0 && self.z_p.is_finite()) {
            return Err(Error::config("z_p", "must be > 0"));
        }
        self.surface_grid.grid().map_err(|e| under("surface_grid", e))?;
        self.solver.validate().map_err(|e| under("solver", e))?;
        self.operating.validate()?;
        let fs = &self.sweeps.frequency;
        if !(fs.f_start_hz > 0.0 && fs.f_start_hz <= fs.f_stop_hz && fs.f_stop_hz.is_finite()) {
            return Err(Error::config("sweeps.frequency.f_start_hz", "need 0 < f_start_hz <= f_stop_hz"));
        }
        positive_points("sweeps.frequency.points", fs.points)?;
        if fs.points > 1 && !(fs.f_start_hz < fs.f_stop_hz) {
            return Err(Error::config("sweeps.frequency.points", "more than one point needs f_start_hz < f_stop_hz"));
        }
        let ps = &self.sweeps.power;
        if !(ps.f_hz > 0.0 && ps.f_hz.is_finite()) {
            return Err(Error::config("sweeps.power.f_hz", "must be > 0"));
        }
        if !(ps.p_start_dbm <= ps.p_stop_dbm) {
            return Err(Error::config("sweeps.power.p_start_dbm", "must not exceed p_stop_dbm"));
        }
        positive_points("sweeps.power.points", ps.points)?;
        if ps.points > 1 && !(ps.p_start_dbm < ps.p_stop_dbm) {
            return Err(Error::config("sweeps.power.points", "more than one point needs p_start_dbm < p_stop_dbm"));
        }
        self.optimizer.ga.validate().map_err(|e| under("optimizer", e))?;
        self.optimizer.objective.validate().map_err(|e| under("optimizer", e))?;
        Ok(())
    }

    /// Parses and validates a configuration document. `origin` names the
    /// source in error messages.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty-printed JSON of every field, newline terminated.
    pub fn effective_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of [`RunConfig::effective_json`], hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.effective_json().as_bytes()))
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json(&text, path)
}

/// `{"lines": {...}}` fragment that a config file can be built from.
pub fn lines_fragment(lines: &Lines) -> String {
    let mut s = serde_json::to_string_pretty(&serde_json::json!({ "lines": lines })).expect("lines serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_json(text, Path::new("test.json"))
    }

    #[test]
    fn empty_object_is_the_reference_design() {
        let cfg = parse("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.design(), SwitchDesign::default());
    }

    #[test]
    fn bundled_reference_config() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/table1.json");
        let cfg = load_config(&path).unwrap();
        let l = cfg.lines;
        assert_eq!((l.it1.theta_ref_deg, l.it1.z0), (28.0, 89.0));
        assert_eq!((l.it2.theta_ref_deg, l.it2.z0), (86.0, 97.0));
        assert_eq!((l.it3.theta_ref_deg, l.it3.z0), (25.0, 84.0));
        assert!([l.it1, l.it2, l.it3].iter().all(|t| t.f_ref_hz == 1e9));
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn parse_error_reports_position() {
        match parse("{\n  \"z_p\": 50,\n  \"lines\": [\n}") {
            Err(Error::Parse { line, column, .. }) => {
                assert_eq!(line, 4);
                assert!(column >= 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn negative_port_impedance_names_field() {
        match parse(r#"{"z_p": -50}"#) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "z_p"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse(r#"{"zp": 50}"#), Err(Error::Parse { .. })));
        assert!(matches!(parse(r#"{"diode": {"BV": 2}}"#), Err(Error::Parse { .. })));
    }

    #[test]
    fn nested_validation_names_full_path() {
        let cases = [
            (r#"{"lines": {"it2": {"z0": 0, "theta_ref_deg": 86}}}"#, "lines.it2.z0"),
            (r#"{"diode": {"RS": -1}}"#, "diode.RS"),
            (r#"{"nc_topology": {"n_antiparallel_branches": 3}}"#, "nc_topology.n_antiparallel_branches"),
            (r#"{"solver": {"hb": {"samples": 64}}}"#, "solver.hb.samples"),
            (r#"{"surface_grid": {"f_points": 1}}"#, "surface_grid.f_points"),
            (r#"{"optimizer": {"ga": {"elitism": 0}}}"#, "optimizer.ga.elitism"),
        ];
        for (text, expected) in cases {
            match parse(text) {
                Err(Error::Config { field, .. }) => assert_eq!(field, expected, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn partial_diode_card_keeps_other_defaults() {
        let cfg = parse(r#"{"diode": {"IS": 5e-8}}"#).unwrap();
        assert_eq!(cfg.diode.i_s, 5e-8);
        assert_eq!(cfg.diode.r_s, DiodeParams::default().r_s);
    }

    #[test]
    fn effective_json_is_stable_and_reparses() {
        let cfg = parse(r#"{"z_p": 75, "solver": {"kind": "transient"}}"#).unwrap();
        let a = cfg.effective_json();
        let again = parse(&a).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.effective_json(), a);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn lines_fragment_is_a_config() {
        let lines = Lines {
            it1: TransmissionLine::new(60.0, 40.0, 1e9),
            ..Lines::default()
        };
        let cfg = parse(&lines_fragment(&lines)).unwrap();
        assert_eq!(cfg.lines, lines);
    }
}
