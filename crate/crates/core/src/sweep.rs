//! Frequency and power sweeps of the switch at its operating point.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::network::{
    rx_mode_closed_form, solve_operating_point, Excitation, Mode, OperatingPoint, OperatingSettings, Port,
    SurfaceSet, SwitchDesign,
};
use crate::units::{linspace, Frequency, PowerLevel};

/// One operating point reduced to the reported figures of merit. All
/// losses are positive dB; `s11` is the antenna reflection and `s21` the
/// antenna → Rx transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub f_hz: f64,
    pub p_dbm: f64,
    pub mode: Mode,
    pub il_ant_rx_db: f64,
    pub il_ant_tx_db: f64,
    pub isolation_db: f64,
    pub rl_db: f64,
    pub s11: Complex64,
    pub s21: Complex64,
    pub p_out_tx_dbm: f64,
    pub p_out_rx_dbm: f64,
    /// Published receive-mode coefficients, when requested.
    pub eq4: Option<(Complex64, Complex64)>,
}

impl SweepRow {
    pub fn from_operating_point(design: &SwitchDesign, op: &OperatingPoint, with_eq4: bool) -> Result<Self> {
        let s = &op.sparams;
        Ok(SweepRow {
            f_hz: op.frequency.hz(),
            p_dbm: op.excitation.power.dbm(),
            mode: op.mode,
            il_ant_rx_db: op.loss_db(Port::Rx, Port::Ant)?,
            il_ant_tx_db: op.loss_db(Port::Tx, Port::Ant)?,
            isolation_db: op.loss_db(Port::Rx, Port::Tx)?,
            rl_db: op.return_loss_db(Port::Ant)?,
            s11: s.get(Port::Ant, Port::Ant),
            s21: s.get(Port::Rx, Port::Ant),
            p_out_tx_dbm: op.delivered_dbm(Port::Tx),
            p_out_rx_dbm: op.delivered_dbm(Port::Rx),
            eq4: with_eq4.then(|| rx_mode_closed_form(design, op.frequency, &op.z_nc)),
        })
    }

    pub fn rx_tx_ratio_db(&self) -> f64 {
        self.p_out_rx_dbm - self.p_out_tx_dbm
    }
}

/// Points of a sweep: `n` evenly spaced values, a single point when `n = 1`.
pub fn sweep_points(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => linspace(start, stop, n),
    }
}

/// Operating points under antenna excitation at each `(f, p)` pair, solved
/// in parallel and returned in input order.
pub fn sweep(
    design: &SwitchDesign,
    surfaces: &SurfaceSet,
    points: &[(f64, f64)],
    settings: &OperatingSettings,
    with_eq4: bool,
) -> Result<Vec<(SweepRow, OperatingPoint)>> {
    points
        .par_iter()
        .map(|&(f, p)| {
            let ex = Excitation {
                port: Port::Ant,
                power: PowerLevel::from_dbm(p),
            };
            let op = solve_operating_point(design, surfaces, Frequency::new(f)?, ex, settings)?;
            Ok((SweepRow::from_operating_point(design, &op, with_eq4)?, op))
        })
        .collect()
}

pub fn sweep_frequency(
    design: &SwitchDesign,
    surfaces: &SurfaceSet,
    power_dbm: f64,
    f_start: f64,
    f_stop: f64,
    n: usize,
    settings: &OperatingSettings,
    with_eq4: bool,
) -> Result<Vec<(SweepRow, OperatingPoint)>> {
    let pts: Vec<_> = sweep_points(f_start, f_stop, n).into_iter().map(|f| (f, power_dbm)).collect();
    sweep(design, surfaces, &pts, settings, with_eq4)
}

pub fn sweep_power(
    design: &SwitchDesign,
    surfaces: &SurfaceSet,
    f_hz: f64,
    p_start: f64,
    p_stop: f64,
    n: usize,
    settings: &OperatingSettings,
    with_eq4: bool,
) -> Result<Vec<(SweepRow, OperatingPoint)>> {
    let pts: Vec<_> = sweep_points(p_start, p_stop, n).into_iter().map(|p| (f_hz, p)).collect();
    sweep(design, surfaces, &pts, settings, with_eq4)
}

/// Powers at which the Rx/Tx delivered-power ratio changes sign, linearly
/// interpolated between rows.
pub fn crossovers(rows: &[SweepRow]) -> Vec<f64> {
    rows.windows(2)
        .filter_map(|w| {
            let (a, b) = (w[0].rx_tx_ratio_db(), w[1].rx_tx_ratio_db());
            if (a > 0.0) != (b > 0.0) {
                Some(w[0].p_dbm + (w[1].p_dbm - w[0].p_dbm) * a / (a - b))
            } else {
                None
            }
        })
        .collect()
}
