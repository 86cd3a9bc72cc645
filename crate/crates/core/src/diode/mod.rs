//! Packaged Schottky diode: junction laws, and steady-state fundamental
//! impedance of a diode stack under single-tone drive.
//!
//! The package is modelled as `CP` across the whole device, in parallel with
//! the series chain `LP` → `RS` → junction, where the junction is the
//! exponential current source in parallel with the graded depletion
//! capacitance.
//!
//! Two independent steady-state solvers are provided:
//! [`describing_function_impedance`] (harmonic balance, fast) and
//! [`transient_steady_state`] (brute-force time stepping, used as oracle).

mod hb;
mod transient;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use hb::{describing_function_impedance, HbSettings};
pub use transient::{transient_steady_state, TransientSettings};

use crate::error::{Error, Result};
use crate::surface::NonlinearCircuit;
use crate::units::{thermal_voltage, Frequency, Immittance, PowerLevel};

/// Exponent argument beyond which the junction law continues linearly.
pub const EXP_LIMIT: f64 = 40.0;

/// SPICE-style large-signal model card for one packaged diode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiodeParams {
    /// Saturation current (A).
    #[serde(rename = "IS")]
    pub i_s: f64,
    /// Emission coefficient.
    #[serde(rename = "N")]
    pub n_ideality: f64,
    /// Series resistance (Ω).
    #[serde(rename = "RS")]
    pub r_s: f64,
    /// Zero-bias junction capacitance (F).
    #[serde(rename = "CJ0")]
    pub c_j0: f64,
    /// Junction potential (V).
    #[serde(rename = "VJ")]
    pub v_j: f64,
    /// Grading coefficient.
    #[serde(rename = "M")]
    pub m_grading: f64,
    /// Package series inductance (H).
    #[serde(rename = "LP")]
    pub l_p: f64,
    /// Package parallel capacitance (F).
    #[serde(rename = "CP")]
    pub c_p: f64,
    /// Device temperature (K).
    #[serde(rename = "TEMP")]
    pub temperature: f64,
    /// Forward-bias depletion-capacitance knee as a fraction of `VJ`.
    #[serde(rename = "FC")]
    pub fc: f64,
}

impl Default for DiodeParams {
    /// SMS7621-class card. `IS` and `N` are typical datasheet values; the
    /// remaining entries are the designed values of the reference switch.
    fn default() -> Self {
        DiodeParams {
            i_s: 4e-8,
            n_ideality: 1.05,
            r_s: 12.0,
            c_j0: 0.1e-12,
            v_j: 0.5,
            m_grading: 0.35,
            l_p: 2e-9,
            c_p: 0.08e-12,
            temperature: 298.15,
            fc: 0.5,
        }
    }
}

impl DiodeParams {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::config(format!("diode.{field}"), reason))
            }
        };
        check(self.i_s > 0.0 && self.i_s.is_finite(), "IS", "must be > 0")?;
        check(self.n_ideality > 0.0 && self.n_ideality.is_finite(), "N", "must be > 0")?;
        check(self.r_s >= 0.0 && self.r_s.is_finite(), "RS", "must be >= 0")?;
        check(self.c_j0 > 0.0 && self.c_j0.is_finite(), "CJ0", "must be > 0")?;
        check(self.v_j > 0.0 && self.v_j.is_finite(), "VJ", "must be > 0")?;
        check(self.m_grading > 0.0 && self.m_grading < 1.0, "M", "must lie in (0, 1)")?;
        check(self.l_p >= 0.0 && self.l_p.is_finite(), "LP", "must be >= 0")?;
        check(self.c_p >= 0.0 && self.c_p.is_finite(), "CP", "must be >= 0")?;
        check(self.temperature > 0.0, "TEMP", "must be > 0")?;
        check(self.fc > 0.0 && self.fc < 1.0, "FC", "must lie in (0, 1)")?;
        Ok(())
    }

    pub fn thermal_voltage(&self) -> f64 {
        thermal_voltage(self.temperature)
    }

    fn nvt(&self) -> f64 {
        self.n_ideality * self.thermal_voltage()
    }

    /// Small-signal conductance at zero bias, `IS / (N·VT)`.
    pub fn zero_bias_conductance(&self) -> f64 {
        self.i_s / self.nvt()
    }

    /// Junction current and its derivative dI/dV.
    pub fn current_and_conductance(&self, v: f64) -> (f64, f64) {
        let nvt = self.nvt();
        let x = v / nvt;
        if x <= EXP_LIMIT {
            let e = x.exp();
            (self.i_s * (e - 1.0), self.i_s * e / nvt)
        } else {
            let e = EXP_LIMIT.exp();
            (self.i_s * (e * (1.0 + x - EXP_LIMIT) - 1.0), self.i_s * e / nvt)
        }
    }

    /// Depletion charge and capacitance dQ/dV, with the standard SPICE
    /// linear extension above `FC·VJ`.
    pub fn charge_and_capacitance(&self, v: f64) -> (f64, f64) {
        let (cj0, vj, m, fc) = (self.c_j0, self.v_j, self.m_grading, self.fc);
        let knee = fc * vj;
        if v < knee {
            let s = 1.0 - v / vj;
            let q = cj0 * vj / (1.0 - m) * (1.0 - s.powf(1.0 - m));
            let c = cj0 * s.powf(-m);
            (q, c)
        } else {
            let f1 = vj / (1.0 - m) * (1.0 - (1.0 - fc).powf(1.0 - m));
            let f2 = (1.0 - fc).powf(1.0 + m);
            let f3 = 1.0 - fc * (1.0 + m);
            let q = cj0 * (f1 + (f3 * (v - knee) + m / (2.0 * vj) * (v * v - knee * knee)) / f2);
            let c = cj0 / f2 * (f3 + m * v / vj);
            (q, c)
        }
    }

    /// Impedance of one packaged diode linearised at zero bias.
    pub fn small_signal_impedance(&self, f: Frequency) -> Complex64 {
        let w = f.omega();
        let j = Complex64::i();
        let y_junction = self.zero_bias_conductance() + j * w * self.c_j0;
        let series = self.r_s + j * w * self.l_p + y_junction.inv();
        let y = series.inv() + j * w * self.c_p;
        y.inv()
    }
}

/// Junction current `IS·(exp(V/(N·VT)) − 1)` with the exponent clamped at
/// [`EXP_LIMIT`] and continued linearly beyond it.
pub fn diode_current(v: f64, d: &DiodeParams) -> f64 {
    d.current_and_conductance(v).0
}

pub fn junction_capacitance(v: f64, d: &DiodeParams) -> f64 {
    d.charge_and_capacitance(v).1
}

/// Single-tone excitation: a sinusoidal source with a real internal
/// resistance, characterised by its available power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub frequency: Frequency,
    pub available_power: PowerLevel,
    pub source_impedance: f64,
}

impl DriveSpec {
    pub fn new(frequency: Frequency, available_power: PowerLevel) -> Self {
        DriveSpec {
            frequency,
            available_power,
            source_impedance: 50.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source_impedance > 0.0 && self.source_impedance.is_finite() {
            Ok(())
        } else {
            Err(Error::config("source_impedance", "must be > 0"))
        }
    }

    /// Peak open-circuit source voltage, `2·sqrt(2·P·R)`.
    pub fn source_amplitude(&self) -> f64 {
        2.0 * (2.0 * self.available_power.watts() * self.source_impedance).sqrt()
    }
}

/// Fundamental-frequency outcome of a steady-state solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateResult {
    pub z_fundamental: Immittance,
    /// Peak amplitude of the fundamental terminal voltage.
    pub v1_amplitude: f64,
    /// Peak amplitude of the fundamental terminal current.
    pub i1_amplitude: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Small-signal impedance of a whole nonlinear circuit (linear AC analysis
/// of the parasitic network at zero bias).
pub fn linear_nc_impedance(nc: &NonlinearCircuit, f: Frequency) -> Complex64 {
    nc.diode.small_signal_impedance(f) * nc.n_series_per_branch as f64
        / nc.n_antiparallel_branches as f64
}
