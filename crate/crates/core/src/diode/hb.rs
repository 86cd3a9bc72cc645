//! Single-tone harmonic balance for a grounded diode stack.
//!
//! Unknowns are the harmonic phasors `V_k` (k = 0..H) of the junction
//! voltage of one forward-branch diode. Reverse-conducting branches see the
//! same waveform shifted by half a period, so only odd harmonics reach the
//! terminal and the node equation is written for the forward branch alone.
//! The nonlinearity is evaluated on `K` time samples per period and mapped
//! back to the harmonic domain with an FFT; the Jacobian is assembled from
//! the spectra of the small-signal conductance and capacitance waveforms.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use rustfft::{Fft, FftPlanner};

use super::{DiodeParams, DriveSpec, SteadyStateResult};
use crate::error::{Error, Result};
use crate::surface::NonlinearCircuit;
use crate::units::Immittance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HbSettings {
    /// Highest harmonic carried in the unknown vector.
    pub harmonics: usize,
    /// Time samples per carrier period.
    pub samples: usize,
    /// Relative tolerance on the Newton update and on the residual.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for HbSettings {
    fn default() -> Self {
        HbSettings {
            harmonics: 32,
            samples: 256,
            tolerance: 1e-6,
            max_iterations: 200,
        }
    }
}

impl HbSettings {
    pub fn validate(&self) -> Result<()> {
        if self.harmonics < 1 {
            return Err(Error::config("hb.harmonics", "must be >= 1"));
        }
        if self.samples <= 4 * self.harmonics {
            return Err(Error::config("hb.samples", "must exceed 4 x harmonics"));
        }
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::config("hb.tolerance", "must lie in (0, 1)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("hb.max_iterations", "must be >= 1"));
        }
        Ok(())
    }
}

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

struct Problem {
    d: DiodeParams,
    h: usize,
    k: usize,
    w: f64,
    /// Coefficients of the forward-branch node equation:
    /// `F_k = alpha_k·J_k + beta_k·V_k − E_k`.
    alpha: Vec<Complex64>,
    beta: Vec<Complex64>,
    zs: Vec<Complex64>,
    yp: Vec<Complex64>,
    e1: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

struct Evaluation {
    residual: Vec<f64>,
    /// Junction current phasors `J_k` (conduction + displacement).
    current: Vec<Complex64>,
    jacobian: Option<DMatrix<f64>>,
}

fn unpack(x: &[f64], h: usize) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(h + 1);
    v.push(Complex64::new(x[0], 0.0));
    for k in 1..=h {
        v.push(Complex64::new(x[2 * k - 1], x[2 * k]));
    }
    v
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl Problem {
    fn new(d: &DiodeParams, nc: &NonlinearCircuit, drive: &DriveSpec, s: &HbSettings) -> Self {
        let w = drive.frequency.omega();
        let ns = nc.n_series_per_branch as f64;
        let nb = nc.n_antiparallel_branches as f64;
        let r = drive.source_impedance;
        let h = s.harmonics;
        let mut alpha = Vec::with_capacity(h + 1);
        let mut beta = Vec::with_capacity(h + 1);
        let mut zs = Vec::with_capacity(h + 1);
        let mut yp = Vec::with_capacity(h + 1);
        for k in 0..=h {
            let kw = k as f64 * w;
            let z = d.r_s + J * kw * d.l_p;
            let y = J * kw * d.c_p;
            let odd = if k % 2 == 1 { r * nb } else { 0.0 };
            alpha.push(ns * z + odd * (1.0 + y * z));
            beta.push(ns + odd * y);
            zs.push(z);
            yp.push(y);
        }
        let mut planner = FftPlanner::new();
        Problem {
            d: *d,
            h,
            k: s.samples,
            w,
            alpha,
            beta,
            zs,
            yp,
            e1: drive.source_amplitude() / 2.0,
            forward: planner.plan_fft_forward(s.samples),
            inverse: planner.plan_fft_inverse(s.samples),
        }
    }

    fn dim(&self) -> usize {
        2 * self.h + 1
    }

    fn spectrum(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.k as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// Two-sided spectral coefficient at (possibly negative) index `m`.
    fn at(coef: &[Complex64], m: isize) -> Complex64 {
        let n = coef.len() as isize;
        coef[m.rem_euclid(n) as usize]
    }

    fn evaluate(&self, x: &[f64], scale: f64, with_jacobian: bool) -> Evaluation {
        let (h, k) = (self.h, self.k);
        let v = unpack(x, h);
        let mut buf = vec![Complex64::new(0.0, 0.0); k];
        buf[0] = v[0];
        for i in 1..=h {
            buf[i] = v[i];
            buf[k - i] = v[i].conj();
        }
        self.inverse.process(&mut buf);

        let mut id = Vec::with_capacity(k);
        let mut g = Vec::with_capacity(k);
        let mut q = Vec::with_capacity(k);
        let mut c = Vec::with_capacity(k);
        for s in &buf {
            let (i_, g_) = self.d.current_and_conductance(s.re);
            let (q_, c_) = self.d.charge_and_capacitance(s.re);
            id.push(i_);
            g.push(g_);
            q.push(q_);
            c.push(c_);
        }
        let id_s = self.spectrum(&id);
        let q_s = self.spectrum(&q);

        let mut residual = vec![0.0; self.dim()];
        let mut current = Vec::with_capacity(h + 1);
        for i in 0..=h {
            let jk = id_s[i] + J * (i as f64 * self.w) * q_s[i];
            let e = if i == 1 { scale * self.e1 } else { 0.0 };
            let f = self.alpha[i] * jk + self.beta[i] * v[i] - e;
            current.push(jk);
            if i == 0 {
                residual[0] = f.re;
            } else {
                residual[2 * i - 1] = f.re;
                residual[2 * i] = f.im;
            }
        }

        let jacobian = with_jacobian.then(|| {
            let g_s = self.spectrum(&g);
            let c_s = self.spectrum(&c);
            let n = self.dim();
            let mut m = DMatrix::<f64>::zeros(n, n);
            for row_k in 0..=h {
                let kw = row_k as f64 * self.w;
                let a = |l: isize| {
                    let idx = row_k as isize - l;
                    Self::at(&g_s, idx) + J * kw * Self::at(&c_s, idx)
                };
                let alpha = self.alpha[row_k];
                let beta = self.beta[row_k];
                let mut put = |col: usize, dfk: Complex64| {
                    if row_k == 0 {
                        m[(0, col)] = dfk.re;
                    } else {
                        m[(2 * row_k - 1, col)] = dfk.re;
                        m[(2 * row_k, col)] = dfk.im;
                    }
                };
                let delta = |l: usize| if l == row_k { 1.0 } else { 0.0 };
                put(0, alpha * a(0) + beta * delta(0));
                for l in 1..=h {
                    let (ap, am) = (a(l as isize), a(-(l as isize)));
                    put(2 * l - 1, alpha * (ap + am) + beta * delta(l));
                    put(2 * l, alpha * J * (ap - am) + J * beta * delta(l));
                }
            }
            m
        });

        Evaluation {
            residual,
            current,
            jacobian,
        }
    }

    /// Solution with the junction frozen at its zero-bias small-signal
    /// admittance, amplitude-limited near the conduction knee.
    fn linear_guess(&self, scale: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let y = self.d.zero_bias_conductance() + J * self.w * self.d.c_j0;
        let mut v1 = scale * self.e1 / (self.alpha[1] * y + self.beta[1]);
        // A forward-biased junction cannot swing much beyond a few tenths of
        // a volt, so large-drive guesses are pulled back to the knee.
        let cap = 8.0 * self.d.n_ideality * self.d.thermal_voltage();
        if v1.norm() > cap {
            v1 *= cap / v1.norm();
        }
        x[1] = v1.re;
        x[2] = v1.im;
        x
    }
}

struct Solved {
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
}

fn newton(
    p: &Problem,
    mut x: Vec<f64>,
    scale: f64,
    s: &HbSettings,
    trace: &mut Vec<f64>,
) -> std::result::Result<Solved, (usize, f64)> {
    let e_ref = (scale * p.e1).max(f64::MIN_POSITIVE);
    let mut ev = p.evaluate(&x, scale, true);
    let mut rnorm = norm(&ev.residual);
    for it in 1..=s.max_iterations {
        trace.push(rnorm / e_ref);
        let jac = ev.jacobian.take().expect("jacobian requested");
        let rhs = DVector::from_iterator(x.len(), ev.residual.iter().map(|r| -r));
        let Some(dx) = jac.lu().solve(&rhs) else {
            return Err((it, rnorm / e_ref));
        };
        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda > 1e-6 {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + lambda * b).collect();
            let tev = p.evaluate(&trial, scale, false);
            let tnorm = norm(&tev.residual);
            if tnorm.is_finite() && tnorm <= (1.0 - 1e-4 * lambda) * rnorm {
                accepted = Some((trial, tnorm));
                break;
            }
            lambda *= 0.5;
        }
        let Some((trial, tnorm)) = accepted else {
            if rnorm <= 1e-12 * e_ref {
                return Ok(Solved {
                    x,
                    iterations: it,
                    residual: rnorm / e_ref,
                });
            }
            return Err((it, rnorm / e_ref));
        };
        let step = lambda * norm(dx.as_slice());
        let v1 = Complex64::new(trial[1], trial[2]).norm();
        let dv1 = lambda * Complex64::new(dx[1], dx[2]).norm();
        x = trial;
        rnorm = tnorm;
        let step_ok = step <= s.tolerance * norm(&x).max(f64::MIN_POSITIVE) && dv1 <= s.tolerance * v1;
        if step_ok && rnorm <= s.tolerance * e_ref {
            trace.push(rnorm / e_ref);
            return Ok(Solved {
                x,
                iterations: it,
                residual: rnorm / e_ref,
            });
        }
        ev = p.evaluate(&x, scale, true);
    }
    Err((s.max_iterations, rnorm / e_ref))
}

/// Fundamental-frequency impedance of the grounded stack `nc` driven by
/// `drive`, by harmonic balance.
///
/// Newton is attempted directly from the small-signal solution; if that
/// fails the source amplitude is ramped up from deep small signal.
pub fn describing_function_impedance(
    d: &DiodeParams,
    nc: &NonlinearCircuit,
    drive: &DriveSpec,
    settings: &HbSettings,
) -> Result<SteadyStateResult> {
    d.validate()?;
    nc.validate()?;
    drive.validate()?;
    settings.validate()?;
    let p = Problem::new(d, nc, drive, settings);
    let mut trace = Vec::new();

    let solved = match newton(&p, p.linear_guess(1.0), 1.0, settings, &mut trace) {
        Ok(s) => s,
        Err(_) => continuation(&p, settings, &mut trace)?,
    };
    Ok(finish(&p, nc, &solved))
}

fn continuation(p: &Problem, s: &HbSettings, trace: &mut Vec<f64>) -> Result<Solved> {
    // Start where the junction swing is a few millivolts.
    let mut scale = (0.02 / (2.0 * p.e1)).min(0.5);
    let mut ratio: f64 = 2f64.sqrt();
    let mut total = 0;
    let mut last = newton(p, p.linear_guess(scale), scale, s, trace).map_err(|(it, r)| {
        Error::NonConvergence {
            solver: "harmonic balance",
            iterations: it,
            residual: r,
            trace: trace.clone(),
        }
    })?;
    total += last.iterations;
    while scale < 1.0 {
        let next = (scale * ratio).min(1.0);
        match newton(p, last.x.clone(), next, s, trace) {
            Ok(sol) => {
                total += sol.iterations;
                last = sol;
                scale = next;
                ratio = (ratio * ratio).min(2f64.sqrt());
            }
            Err((it, r)) => {
                total += it;
                ratio = ratio.sqrt();
                if ratio < 1.0005 {
                    return Err(Error::NonConvergence {
                        solver: "harmonic balance",
                        iterations: total,
                        residual: r,
                        trace: trace.clone(),
                    });
                }
            }
        }
    }
    last.iterations = total;
    Ok(last)
}

fn finish(p: &Problem, nc: &NonlinearCircuit, s: &Solved) -> SteadyStateResult {
    let ns = nc.n_series_per_branch as f64;
    let nb = nc.n_antiparallel_branches as f64;
    let ev = p.evaluate(&s.x, 1.0, false);
    let v = unpack(&s.x, p.h);
    let u1 = p.zs[1] * ev.current[1] + v[1];
    let b1 = ev.current[1] + p.yp[1] * u1;
    let v_node = ns * u1;
    let i_node = nb * b1;
    SteadyStateResult {
        z_fundamental: Immittance::from_impedance(v_node / i_node),
        v1_amplitude: 2.0 * v_node.norm(),
        i1_amplitude: 2.0 * i_node.norm(),
        iterations: s.iterations,
        residual: s.residual,
    }
}
