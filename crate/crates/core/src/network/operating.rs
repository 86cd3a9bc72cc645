//! Self-consistent large-signal operating point of the switch.
//!
//! Each NC's impedance depends on the power reaching it, which depends on
//! the network, which depends on the impedances. The loop is closed by
//! damped fixed-point iteration on the per-NC power levels.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::nodal::{s_matrix, solve_ports, Port, ThreePortS};
use super::SwitchDesign;
use crate::error::{Error, Result};
use crate::surface::{cached_surface, ImpedanceSurface, SolverSettings};
use crate::units::{amplitude_to_db, ratio_to_db, watts_to_dbm, Frequency, Grid2D, Immittance, PowerLevel};

/// One tabulated impedance surface per NC, in NC order.
#[derive(Debug, Clone)]
pub struct SurfaceSet {
    pub surfaces: [Arc<ImpedanceSurface>; 4],
}

impl SurfaceSet {
    pub fn uniform(surface: ImpedanceSurface) -> Self {
        let s = Arc::new(surface);
        SurfaceSet {
            surfaces: [s.clone(), s.clone(), s.clone(), s],
        }
    }

    /// Builds (or loads from `cache`) the surfaces of `design`'s NCs,
    /// solving each distinct NC once.
    pub fn build(
        design: &SwitchDesign,
        grid: &Grid2D,
        solver: &SolverSettings,
        cache: Option<&std::path::Path>,
    ) -> Result<Self> {
        let mut built: Vec<(crate::surface::NonlinearCircuit, Arc<ImpedanceSurface>)> = Vec::new();
        let mut out = Vec::with_capacity(4);
        for nc in &design.nc {
            let s = match built.iter().find(|(n, _)| n == nc) {
                Some((_, s)) => s.clone(),
                None => {
                    let s = Arc::new(cached_surface(nc, grid, solver, cache)?);
                    built.push((*nc, s.clone()));
                    s
                }
            };
            out.push(s);
        }
        Ok(SurfaceSet {
            surfaces: out.try_into().expect("four NCs"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationMode {
    /// Index every surface by the excitation power, no feedback.
    Direct,
    /// Iterate per-NC power levels to a fixed point.
    SelfConsistent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingSettings {
    pub iteration: IterationMode,
    /// Fraction of the dB update applied per iteration.
    pub relaxation: f64,
    /// Stop when no NC power estimate moves by more than this (dB).
    pub tolerance_db: f64,
    pub max_iterations: usize,
    /// Power margin (dB) by which one path must dominate to name a mode.
    pub dominance_db: f64,
}

impl Default for OperatingSettings {
    fn default() -> Self {
        OperatingSettings {
            iteration: IterationMode::SelfConsistent,
            relaxation: 0.5,
            tolerance_db: 0.05,
            max_iterations: 100,
            dominance_db: 3.0,
        }
    }
}

impl OperatingSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::config("operating.relaxation", "must lie in (0, 1]"));
        }
        if !(self.tolerance_db > 0.0) {
            return Err(Error::config("operating.tolerance_db", "must be > 0"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("operating.max_iterations", "must be >= 1"));
        }
        if !(self.dominance_db >= 0.0) {
            return Err(Error::config("operating.dominance_db", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Excitation {
    pub port: Port,
    pub power: PowerLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Tx,
    Rx,
    Transition,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Tx => "Tx",
            Mode::Rx => "Rx",
            Mode::Transition => "Transition",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Tx" => Ok(Mode::Tx),
            "Rx" => Ok(Mode::Rx),
            "Transition" => Ok(Mode::Transition),
            other => Err(Error::Domain(format!("unknown mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub mode: Mode,
    pub frequency: Frequency,
    pub excitation: Excitation,
    pub z_nc: [Immittance; 4],
    /// Equivalent drive level of each NC on its surface's power axis (dBm),
    /// before clamping to the surface floor.
    pub nc_power_dbm: [f64; 4],
    /// Power delivered into each port's termination (W); zero at the
    /// excited port.
    pub delivered_w: [f64; 3],
    pub sparams: ThreePortS,
    pub iterations: usize,
    /// Largest per-NC power change (dB) in the final iteration.
    pub residual: f64,
}

impl OperatingPoint {
    pub fn delivered(&self, p: Port) -> f64 {
        self.delivered_w[p.index()]
    }

    pub fn delivered_dbm(&self, p: Port) -> f64 {
        watts_to_dbm(self.delivered(p))
    }

    /// −20·log10|S(to, from)|.
    pub fn loss_db(&self, to: Port, from: Port) -> Result<f64> {
        amplitude_to_db(self.sparams.get(to, from).norm()).map(|v| -v)
    }

    pub fn return_loss_db(&self, p: Port) -> Result<f64> {
        self.loss_db(p, p)
    }

    /// 10·log10 of the Rx-port over Tx-port delivered power.
    pub fn rx_tx_ratio_db(&self) -> Result<f64> {
        ratio_to_db(self.delivered(Port::Rx) / self.delivered(Port::Tx))
    }
}

/// Available power of a source of resistance `r0` that would develop `v`
/// (peak phasor) across `z`.
fn equivalent_drive_dbm(v: Complex64, z: Complex64, r0: f64) -> f64 {
    let w = v.norm_sqr() * (z + r0).norm_sqr() / (8.0 * r0 * z.norm_sqr());
    watts_to_dbm(w)
}

fn lookup(surface: &ImpedanceSurface, f: Frequency, p_dbm: f64) -> Result<Immittance> {
    // Below the floor the NC is in its linear regime.
    surface.interpolate_dbm(f.hz(), p_dbm.max(surface.p_range().0))
}

fn classify(excited: Port, delivered: &[f64; 3], dominance_db: f64) -> Mode {
    let p = |port: Port| delivered[port.index()].max(f64::MIN_POSITIVE);
    // The two candidate destinations, as (Tx-mode path, Rx-mode path).
    let (tx_path, rx_path) = match excited {
        Port::Ant => (p(Port::Tx), p(Port::Rx)),
        Port::Tx => (p(Port::Ant), p(Port::Rx)),
        Port::Rx => (p(Port::Tx), p(Port::Ant)),
    };
    let margin = 10.0 * (rx_path / tx_path).log10();
    if margin >= dominance_db {
        Mode::Rx
    } else if margin <= -dominance_db {
        Mode::Tx
    } else {
        Mode::Transition
    }
}

/// Converged operating point of `design` at frequency `f` under a single
/// excitation.
pub fn solve_operating_point(
    design: &SwitchDesign,
    surfaces: &SurfaceSet,
    f: Frequency,
    excitation: Excitation,
    settings: &OperatingSettings,
) -> Result<OperatingPoint> {
    design.validate()?;
    settings.validate()?;
    let p_exc = excitation.power.dbm();
    // Incident wave amplitude (peak volts) at the excited port.
    let a = (2.0 * excitation.power.watts() * design.z_p).sqrt();
    let floor = |k: usize| surfaces.surfaces[k].p_range().0;

    let mut local = [p_exc; 4];
    let mut trace = Vec::new();
    for it in 1..=settings.max_iterations {
        let mut znc = [Immittance::impedance(0.0, 0.0); 4];
        for k in 0..4 {
            znc[k] = lookup(&surfaces.surfaces[k], f, local[k])?;
        }
        let sol = solve_ports(design, f, &znc, excitation.port)?;
        let vnc = sol.nc_voltages();
        let mut next = [0.0; 4];
        for k in 0..4 {
            let r0 = surfaces.surfaces[k].provenance.source_impedance;
            next[k] = equivalent_drive_dbm(vnc[k] * a, znc[k].as_impedance(), r0);
        }
        let change = (0..4)
            .map(|k| (next[k].max(floor(k)) - local[k].max(floor(k))).abs())
            .fold(0.0, f64::max);
        trace.push(change);
        let done = settings.iteration == IterationMode::Direct || change < settings.tolerance_db;
        if done {
            let sparams = s_matrix(design, f, &znc)?;
            let mut delivered_w = [0.0; 3];
            for p in Port::ALL {
                if p != excitation.port {
                    delivered_w[p.index()] = (sol.port_voltage(p) * a).norm_sqr() / (2.0 * design.z_p);
                }
            }
            let nc_power_dbm = match settings.iteration {
                IterationMode::Direct => local,
                IterationMode::SelfConsistent => next,
            };
            return Ok(OperatingPoint {
                mode: classify(excitation.port, &delivered_w, settings.dominance_db),
                frequency: f,
                excitation,
                z_nc: znc,
                nc_power_dbm,
                delivered_w,
                sparams,
                iterations: it,
                residual: change,
            });
        }
        for k in 0..4 {
            local[k] += settings.relaxation * (next[k].max(floor(k)) - local[k]);
        }
    }
    Err(Error::NonConvergence {
        solver: "operating point",
        iterations: settings.max_iterations,
        residual: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{build_surface, NonlinearCircuit};
    use crate::units::make_grid;
    use std::sync::OnceLock;

    /// A coarse surface of the default NC, shared by the tests below.
    fn surfaces() -> &'static SurfaceSet {
        static S: OnceLock<SurfaceSet> = OnceLock::new();
        S.get_or_init(|| {
            let grid = make_grid(1.0e9, 1.4e9, 5, -40.0, 30.0, 36).unwrap();
            let s = build_surface(&NonlinearCircuit::default(), &grid, &SolverSettings::default()).unwrap();
            SurfaceSet::uniform(s)
        })
    }

    fn op(port: Port, dbm: f64, iteration: IterationMode) -> OperatingPoint {
        let settings = OperatingSettings {
            iteration,
            ..OperatingSettings::default()
        };
        let ex = Excitation {
            port,
            power: PowerLevel::from_dbm(dbm),
        };
        solve_operating_point(&SwitchDesign::default(), surfaces(), Frequency::ghz(1.2), ex, &settings).unwrap()
    }

    #[test]
    fn equivalent_drive_of_a_matched_load() {
        // A 50 Ω load across a 50 Ω source takes half the EMF.
        let p = PowerLevel::from_dbm(7.0);
        let emf = 2.0 * (2.0 * p.watts() * 50.0).sqrt();
        let d = equivalent_drive_dbm(Complex64::new(emf / 2.0, 0.0), Complex64::new(50.0, 0.0), 50.0);
        assert!((d - 7.0).abs() < 1e-12);
    }

    #[test]
    fn low_power_antenna_signal_goes_to_receiver() {
        let o = op(Port::Ant, -30.0, IterationMode::SelfConsistent);
        assert_eq!(o.mode, Mode::Rx);
        assert!(o.rx_tx_ratio_db().unwrap() >= 10.0);
        assert!(o.residual < 0.05);
    }

    #[test]
    fn high_power_transmit_reaches_antenna() {
        let o = op(Port::Tx, 30.0, IterationMode::SelfConsistent);
        assert_eq!(o.mode, Mode::Tx);
    }

    #[test]
    fn direct_and_iterative_agree_at_extremes() {
        for (port, p) in [(Port::Ant, -40.0), (Port::Ant, 30.0), (Port::Tx, 30.0)] {
            let a = op(port, p, IterationMode::Direct);
            let b = op(port, p, IterationMode::SelfConsistent);
            assert_eq!(a.mode, b.mode, "{port} {p} dBm");
            assert_eq!(a.iterations, 1);
        }
    }

    #[test]
    fn delivered_power_never_exceeds_available() {
        for p in [-40.0, -10.0, 0.0, 10.0, 20.0, 30.0] {
            for port in Port::ALL {
                let o = op(port, p, IterationMode::SelfConsistent);
                let total: f64 = o.delivered_w.iter().sum();
                assert!(total <= PowerLevel::from_dbm(p).watts() * (1.0 + 1e-9));
            }
        }
    }

    #[test]
    fn range_errors_propagate() {
        let ex = Excitation {
            port: Port::Ant,
            power: PowerLevel::from_dbm(-30.0),
        };
        let r = solve_operating_point(
            &SwitchDesign::default(),
            surfaces(),
            Frequency::ghz(0.5),
            ex,
            &OperatingSettings::default(),
        );
        assert!(matches!(r, Err(Error::Range { .. })));
    }

    #[test]
    fn nonconvergence_carries_trace() {
        let settings = OperatingSettings {
            max_iterations: 1,
            tolerance_db: 1e-12,
            ..OperatingSettings::default()
        };
        let ex = Excitation {
            port: Port::Ant,
            power: PowerLevel::from_dbm(10.0),
        };
        match solve_operating_point(&SwitchDesign::default(), surfaces(), Frequency::ghz(1.2), ex, &settings) {
            Err(Error::NonConvergence { trace, .. }) => assert_eq!(trace.len(), 1),
            other => panic!("{other:?}"),
        }
    }
}
