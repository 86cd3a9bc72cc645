//! Brute-force periodic steady state by trapezoidal time stepping.
//!
//! State vector: node voltage, inductor currents of a forward and a reverse
//! branch diode, and their junction voltages. Series diodes within one
//! branch are identical and carry the same current, so one representative
//! per polarity is integrated.

use nalgebra::{Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{DiodeParams, DriveSpec, SteadyStateResult};
use crate::error::{Error, Result};
use crate::surface::NonlinearCircuit;
use crate::units::Immittance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransientSettings {
    pub steps_per_period: usize,
    /// Relative agreement required between successive periods'
    /// fundamental phasors.
    pub tolerance: f64,
    pub max_periods: usize,
}

impl Default for TransientSettings {
    fn default() -> Self {
        TransientSettings {
            steps_per_period: 512,
            tolerance: 1e-6,
            max_periods: 400,
        }
    }
}

impl TransientSettings {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period < 200 {
            return Err(Error::config("transient.steps_per_period", "must be >= 200"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config("transient.tolerance", "must lie in (0, 1)"));
        }
        if self.max_periods < 2 {
            return Err(Error::config("transient.max_periods", "must be >= 2"));
        }
        Ok(())
    }
}

type State = Vector5<f64>;

struct Circuit {
    d: DiodeParams,
    ns: f64,
    nb: f64,
    r: f64,
    c_node: f64,
    vs: f64,
    w: f64,
    nvt: f64,
    v_crit: f64,
}

impl Circuit {
    fn source(&self, t: f64) -> f64 {
        self.vs * (self.w * t).sin()
    }

    fn storage(&self, y: &State) -> State {
        Vector5::new(
            self.c_node * y[0],
            self.d.l_p * y[1],
            self.d.l_p * y[2],
            self.d.charge_and_capacitance(y[3]).0,
            self.d.charge_and_capacitance(y[4]).0,
        )
    }

    fn rates(&self, y: &State, t: f64) -> State {
        let rs = self.d.r_s;
        Vector5::new(
            (self.source(t) - y[0]) / self.r - 0.5 * self.nb * (y[1] - y[2]),
            y[0] / self.ns - rs * y[1] - y[3],
            -y[0] / self.ns - rs * y[2] - y[4],
            y[1] - self.d.current_and_conductance(y[3]).0,
            y[2] - self.d.current_and_conductance(y[4]).0,
        )
    }

    /// d(storage)/dy − (h/2)·d(rates)/dy.
    fn iteration_matrix(&self, y: &State, h: f64) -> Matrix5<f64> {
        let (ns, rs, hb) = (self.ns, self.d.r_s, 0.5 * h);
        let gf = self.d.current_and_conductance(y[3]).1;
        let gr = self.d.current_and_conductance(y[4]).1;
        let cf = self.d.charge_and_capacitance(y[3]).1;
        let cr = self.d.charge_and_capacitance(y[4]).1;
        let df = Matrix5::new(
            -1.0 / self.r, -0.5 * self.nb, 0.5 * self.nb, 0.0, 0.0,
            1.0 / ns, -rs, 0.0, -1.0, 0.0,
            -1.0 / ns, 0.0, -rs, 0.0, -1.0,
            0.0, 1.0, 0.0, -gf, 0.0,
            0.0, 0.0, 1.0, 0.0, -gr,
        );
        let dz = Matrix5::from_diagonal(&Vector5::new(self.c_node, self.d.l_p, self.d.l_p, cf, cr));
        dz - df * hb
    }

    /// SPICE-style junction voltage limiting between Newton iterates.
    fn limit(&self, new: f64, old: f64) -> f64 {
        let vt = self.nvt;
        if new > self.v_crit && (new - old).abs() > 2.0 * vt {
            if old > 0.0 {
                let arg = 1.0 + (new - old) / vt;
                if arg > 0.0 {
                    old + vt * arg.ln()
                } else {
                    self.v_crit
                }
            } else {
                vt * (new / vt).ln()
            }
        } else {
            new
        }
    }

    /// One trapezoidal step of length `h` from `(y, t)`; `None` if the
    /// corrector fails to converge.
    fn step(&self, y: &State, t: f64, h: f64) -> Option<State> {
        let z0 = self.storage(y);
        let f0 = self.rates(y, t);
        let t1 = t + h;
        let mut x = *y;
        let scale = Vector5::new(1e-9, 1e-12, 1e-12, 1e-9, 1e-9);
        for _ in 0..60 {
            let g = self.storage(&x) - z0 - (self.rates(&x, t1) + f0) * (0.5 * h);
            let m = self.iteration_matrix(&x, h);
            let dx = m.lu().solve(&(-g))?;
            let mut next = x + dx;
            next[3] = self.limit(next[3], x[3]);
            next[4] = self.limit(next[4], x[4]);
            let done = (0..5).all(|i| (next[i] - x[i]).abs() <= 1e-10 * x[i].abs() + scale[i]);
            if !next.iter().all(|v| v.is_finite()) {
                return None;
            }
            x = next;
            if done {
                return Some(x);
            }
        }
        None
    }

    /// Advances by `h`, subdividing the interval when the corrector fails.
    fn advance(&self, y: &State, t: f64, h: f64, depth: u32) -> Option<State> {
        if let Some(next) = self.step(y, t, h) {
            return Some(next);
        }
        if depth == 0 {
            return None;
        }
        let mid = self.advance(y, t, 0.5 * h, depth - 1)?;
        self.advance(&mid, t + 0.5 * h, 0.5 * h, depth - 1)
    }
}

/// Fundamental-frequency impedance of the grounded stack `nc` driven by
/// `drive`, by integrating the circuit from rest until successive periods
/// agree.
pub fn transient_steady_state(
    d: &DiodeParams,
    nc: &NonlinearCircuit,
    drive: &DriveSpec,
    settings: &TransientSettings,
) -> Result<SteadyStateResult> {
    d.validate()?;
    nc.validate()?;
    drive.validate()?;
    settings.validate()?;
    let ns = nc.n_series_per_branch as f64;
    let nb = nc.n_antiparallel_branches as f64;
    let nvt = d.n_ideality * d.thermal_voltage();
    let ckt = Circuit {
        d: *d,
        ns,
        nb,
        r: drive.source_impedance,
        c_node: nb * d.c_p / ns,
        vs: drive.source_amplitude(),
        w: drive.frequency.omega(),
        nvt,
        v_crit: nvt * (nvt / (std::f64::consts::SQRT_2 * d.i_s)).ln(),
    };

    let n = settings.steps_per_period;
    let period = 1.0 / drive.frequency.hz();
    let h = period / n as f64;
    // Unit phasors of the sample instants within one period.
    let basis: Vec<Complex64> = (1..=n)
        .map(|i| Complex64::from_polar(2.0 / n as f64, -ckt.w * h * i as f64))
        .collect();

    let mut y = State::zeros();
    let mut previous: Option<(Complex64, Complex64)> = None;
    let mut trace = Vec::new();
    for p in 0..settings.max_periods {
        let t0 = p as f64 * period;
        let mut v1 = Complex64::new(0.0, 0.0);
        let mut i1 = Complex64::new(0.0, 0.0);
        for (i, b) in basis.iter().enumerate() {
            let t = t0 + h * i as f64;
            y = ckt.advance(&y, t, h, 8).ok_or_else(|| Error::NonConvergence {
                solver: "transient corrector",
                iterations: p,
                residual: f64::NAN,
                trace: trace.clone(),
            })?;
            let i_node = (ckt.source(t + h) - y[0]) / ckt.r;
            v1 += y[0] * b;
            i1 += i_node * b;
        }
        if let Some((pv, pi)) = previous {
            let dv = (v1 - pv).norm() / v1.norm().max(f64::MIN_POSITIVE);
            let di = (i1 - pi).norm() / i1.norm().max(f64::MIN_POSITIVE);
            let change = dv.max(di);
            trace.push(change);
            if change <= settings.tolerance {
                return Ok(SteadyStateResult {
                    z_fundamental: Immittance::from_impedance(v1 / i1),
                    v1_amplitude: v1.norm(),
                    i1_amplitude: i1.norm(),
                    iterations: p + 1,
                    residual: change,
                });
            }
        }
        previous = Some((v1, i1));
    }
    Err(Error::NonConvergence {
        solver: "transient",
        iterations: settings.max_periods,
        residual: trace.last().copied().unwrap_or(f64::NAN),
        trace,
    })
}
