//! Linear network mathematics for the three-port switch: ideal lines,
//! chain matrices, the closed-form branch and mode expressions, a general
//! nodal solver, and the power-dependent operating point.

mod nodal;
mod operating;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use nodal::{s_matrix, solve_ports, Port, PortSolution, ThreePortS};
pub use operating::{
    solve_operating_point, Excitation, IterationMode, Mode, OperatingPoint, OperatingSettings,
    SurfaceSet,
};

use crate::error::{Error, Result};
use crate::surface::NonlinearCircuit;
use crate::units::{Frequency, Immittance};

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Distance (rad) from an odd multiple of 90° inside which a line is
/// treated as an exact quarter-wave inverter.
pub const QUARTER_WAVE_EPS: f64 = 1e-9;

/// Ideal lossless TEM line with linear dispersion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransmissionLine {
    /// Characteristic impedance (Ω).
    pub z0: f64,
    /// Electrical length at `f_ref_hz` (degrees).
    pub theta_ref_deg: f64,
    #[serde(default = "default_f_ref")]
    pub f_ref_hz: f64,
}

fn default_f_ref() -> f64 {
    1e9
}

impl TransmissionLine {
    pub fn new(z0: f64, theta_ref_deg: f64, f_ref_hz: f64) -> Self {
        TransmissionLine {
            z0,
            theta_ref_deg,
            f_ref_hz,
        }
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            return Err(Error::config(format!("{name}.z0"), "must be > 0"));
        }
        if !(self.theta_ref_deg > 0.0 && self.theta_ref_deg < 180.0) {
            return Err(Error::config(format!("{name}.theta_ref_deg"), "must lie in (0, 180)"));
        }
        if !(self.f_ref_hz > 0.0 && self.f_ref_hz.is_finite()) {
            return Err(Error::config(format!("{name}.f_ref_hz"), "must be > 0"));
        }
        Ok(())
    }

    pub fn abcd(&self, f: Frequency) -> TwoPortABCD {
        TwoPortABCD::line(self.z0, electrical_length(self, f))
    }
}

/// Electrical length in radians at `f`.
pub fn electrical_length(line: &TransmissionLine, f: Frequency) -> f64 {
    (line.theta_ref_deg * (f.hz() / line.f_ref_hz)).to_radians()
}

fn is_quarter_wave(theta: f64) -> bool {
    let r = (theta - std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI);
    r.min(std::f64::consts::PI - r) < QUARTER_WAVE_EPS
}

/// Input admittance of `line` terminated in `z_load`:
/// `Y = (Z0 + j·ZL·tanθ) / (Z0·(ZL + j·Z0·tanθ))`, with the inverter limit
/// `Y = ZL/Z0²` at odd multiples of 90°.
pub fn loaded_line_admittance(line: &TransmissionLine, z_load: Immittance, f: Frequency) -> Immittance {
    let theta = electrical_length(line, f);
    let z0 = line.z0;
    if z_load.is_open() {
        return Immittance::from_admittance(J * theta.tan() / z0);
    }
    let zl = z_load.as_impedance();
    if is_quarter_wave(theta) {
        return Immittance::from_admittance(zl / (z0 * z0));
    }
    let t = theta.tan();
    Immittance::from_admittance((z0 + J * zl * t) / (z0 * (zl + J * z0 * t)))
}

/// Chain (ABCD) matrix of a two-port.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPortABCD {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl TwoPortABCD {
    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        TwoPortABCD {
            a: one,
            b: zero,
            c: zero,
            d: one,
        }
    }

    pub fn line(z0: f64, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        TwoPortABCD {
            a: c.into(),
            b: J * z0 * s,
            c: J * s / z0,
            d: c.into(),
        }
    }

    pub fn shunt(y: Complex64) -> Self {
        TwoPortABCD {
            c: y,
            ..Self::identity()
        }
    }

    pub fn series(z: Complex64) -> Self {
        TwoPortABCD {
            b: z,
            ..Self::identity()
        }
    }

    pub fn then(&self, next: &TwoPortABCD) -> TwoPortABCD {
        TwoPortABCD {
            a: self.a * next.a + self.b * next.c,
            b: self.a * next.b + self.b * next.d,
            c: self.c * next.a + self.d * next.c,
            d: self.c * next.b + self.d * next.d,
        }
    }

    pub fn determinant(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn input_impedance(&self, z_load: Complex64) -> Complex64 {
        (self.a * z_load + self.b) / (self.c * z_load + self.d)
    }

    /// Scattering parameters with both ports referenced to real `zp`.
    pub fn to_sparams(&self, zp: f64) -> Result<SParams> {
        let den = self.a + self.b / zp + self.c * zp + self.d;
        if den.norm() < 1e-12 {
            return Err(Error::Singular("ABCD to S conversion"));
        }
        Ok(SParams {
            s11: (self.a + self.b / zp - self.c * zp - self.d) / den,
            s12: 2.0 * self.determinant() / den,
            s21: 2.0 / den,
            s22: (-self.a + self.b / zp - self.c * zp + self.d) / den,
            z_ref: zp,
        })
    }
}

/// Left-to-right product of `stages`.
pub fn abcd_cascade(stages: &[TwoPortABCD]) -> Result<TwoPortABCD> {
    let (first, rest) = stages
        .split_first()
        .ok_or_else(|| Error::Precondition("cascade needs at least one stage".into()))?;
    Ok(rest.iter().fold(*first, |acc, s| acc.then(s)))
}

/// Two-port scattering parameters referenced to `z_ref` on both ports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SParams {
    pub s11: Complex64,
    pub s21: Complex64,
    pub s12: Complex64,
    pub s22: Complex64,
    pub z_ref: f64,
}

impl SParams {
    /// A shunt admittance across a through line:
    /// `S11 = −Y·Zp/(2 + Y·Zp)`, `S21 = 2/(2 + Y·Zp)`.
    pub fn shunt(y: Complex64, zp: f64) -> Result<Self> {
        let den = 2.0 + y * zp;
        if den.norm() < 1e-12 {
            return Err(Error::Singular("shunt reflection denominator"));
        }
        let s11 = -y * zp / den;
        let s21 = 2.0 / den;
        Ok(SParams {
            s11,
            s21,
            s12: s21,
            s22: s11,
            z_ref: zp,
        })
    }
}

/// Where the second transformer and its grounded NC attach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StubPlacement {
    /// Stub hangs off the Tx port, beyond the series NC.
    TxPort,
    /// Stub hangs off the antenna junction alongside the other branches.
    Junction,
}

/// Line and NC parameters of the three-port switch.
///
/// Antenna junction J. Branch 1: line `it1` from J, then NC1 in series to
/// the Tx port. Branch 3: line `it3` from J to the Rx port, where NC3 and
/// NC4 shunt to ground. Branch 2: line `it2` ending in grounded NC2,
/// attached according to `stub_placement`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchDesign {
    pub it1: TransmissionLine,
    pub it2: TransmissionLine,
    pub it3: TransmissionLine,
    pub nc: [NonlinearCircuit; 4],
    #[serde(default = "default_zp")]
    pub z_p: f64,
    #[serde(default = "default_placement")]
    pub stub_placement: StubPlacement,
}

fn default_zp() -> f64 {
    50.0
}

fn default_placement() -> StubPlacement {
    StubPlacement::TxPort
}

impl Default for SwitchDesign {
    /// Designed values: (28°, 89 Ω), (86°, 97 Ω), (25°, 84 Ω) at 1 GHz.
    fn default() -> Self {
        SwitchDesign {
            it1: TransmissionLine::new(89.0, 28.0, 1e9),
            it2: TransmissionLine::new(97.0, 86.0, 1e9),
            it3: TransmissionLine::new(84.0, 25.0, 1e9),
            nc: [NonlinearCircuit::default(); 4],
            z_p: default_zp(),
            stub_placement: default_placement(),
        }
    }
}

impl SwitchDesign {
    pub fn validate(&self) -> Result<()> {
        self.it1.validate("it1")?;
        self.it2.validate("it2")?;
        self.it3.validate("it3")?;
        for nc in &self.nc {
            nc.validate()?;
        }
        if !(self.z_p > 0.0 && self.z_p.is_finite()) {
            return Err(Error::config("z_p", "must be > 0"));
        }
        Ok(())
    }

    /// Same NCs and port impedance with new line parameters
    /// `[θ1, θ2, θ3]` (degrees) and `[Z1, Z2, Z3]` (Ω).
    pub fn with_lines(&self, theta_deg: [f64; 3], z0: [f64; 3]) -> Self {
        let mk = |old: &TransmissionLine, i: usize| TransmissionLine::new(z0[i], theta_deg[i], old.f_ref_hz);
        SwitchDesign {
            it1: mk(&self.it1, 0),
            it2: mk(&self.it2, 1),
            it3: mk(&self.it3, 2),
            ..*self
        }
    }
}

/// The three branch admittances seen from the antenna junction, each a
/// loaded line: branch 1 loaded by `Z_NC1 + Z_p`, branch 2 by `Z_NC2`,
/// branch 3 by `Z_NC3`.
pub fn branch_admittances(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> [Immittance; 3] {
    let zp = Immittance::from_impedance(znc[0].as_impedance() + design.z_p);
    [
        loaded_line_admittance(&design.it1, zp, f),
        loaded_line_admittance(&design.it2, znc[1], f),
        loaded_line_admittance(&design.it3, znc[2], f),
    ]
}

/// `Yt = Y1 + Y2 + Y3` from [`branch_admittances`].
pub fn total_admittance(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> Immittance {
    let y = branch_admittances(design, f, znc);
    Immittance::from_admittance(y.iter().map(|b| b.as_admittance()).sum())
}

/// Transmit-mode closed form: the junction admittance `Yt` as a shunt on a
/// `Z_p` through path.
pub fn tx_mode_sparams(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> Result<SParams> {
    SParams::shunt(total_admittance(design, f, znc).as_admittance(), design.z_p)
}

/// Closed-form receive-mode coefficients:
/// `c1 = cos θ1 + j·Z_IT1·Y2·sin θ1`, `c2 = j·Z_IT1·sin θ1`.
///
/// These are the A and B entries of line IT1 followed by a shunt `Y2`; `c2`
/// carries ohms, so the pair is not a scattering matrix. Reported
/// alongside, never instead of, [`rx_mode_sparams_abcd`].
pub fn rx_mode_closed_form(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> (Complex64, Complex64) {
    let theta = electrical_length(&design.it1, f);
    let y2 = branch_admittances(design, f, znc)[1].as_admittance();
    let z1 = design.it1.z0;
    (theta.cos() + J * z1 * y2 * theta.sin(), J * z1 * theta.sin())
}

/// Impedance of the Tx-side termination of branch 1: NC1 in series with the
/// Tx port, which is itself shunted by the stub when it sits at the port.
fn branch1_load(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> Complex64 {
    let port = match design.stub_placement {
        StubPlacement::TxPort => {
            let y_stub = loaded_line_admittance(&design.it2, znc[1], f).as_admittance();
            1.0 / (1.0 / design.z_p + y_stub)
        }
        StubPlacement::Junction => design.z_p.into(),
    };
    znc[0].as_impedance() + port
}

/// Antenna → Rx two-port with the Tx port terminated in `Z_p`, as the
/// cascade: shunt(junction branches) · line(IT3) · shunt(NC3 ∥ NC4).
pub fn rx_mode_sparams_abcd(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> Result<SParams> {
    let load = Immittance::from_impedance(branch1_load(design, f, znc));
    let mut y_junction = loaded_line_admittance(&design.it1, load, f).as_admittance();
    if design.stub_placement == StubPlacement::Junction {
        y_junction += loaded_line_admittance(&design.it2, znc[1], f).as_admittance();
    }
    let y_rx = znc[2].as_admittance() + znc[3].as_admittance();
    abcd_cascade(&[
        TwoPortABCD::shunt(y_junction),
        design.it3.abcd(f),
        TwoPortABCD::shunt(y_rx),
    ])?
    .to_sparams(design.z_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
        (a - b).norm() <= rel * b.norm().max(1e-300)
    }

    #[test]
    fn electrical_length_scaling() {
        let l = TransmissionLine::new(89.0, 28.0, 1e9);
        assert_eq!(electrical_length(&l, Frequency::ghz(1.0)), 28f64.to_radians());
        assert!((electrical_length(&l, Frequency::ghz(2.0)).to_degrees() - 56.0).abs() < 1e-12);
        let l2 = TransmissionLine::new(97.0, 86.0, 1e9);
        assert!((electrical_length(&l2, Frequency::ghz(1.2)).to_degrees() - 103.2).abs() < 1e-12);
    }

    #[test]
    fn loaded_line_limits() {
        let f = Frequency::ghz(1.0);
        let matched = TransmissionLine::new(75.0, 47.0, 1e9);
        let y = loaded_line_admittance(&matched, Immittance::impedance(75.0, 0.0), f).value;
        assert!(close(y, c(1.0 / 75.0, 0.0), 1e-14));

        let qw = TransmissionLine::new(89.0, 90.0, 1e9);
        let y = loaded_line_admittance(&qw, Immittance::impedance(50.0, 0.0), f).value;
        assert_eq!(y, c(50.0 / (89.0 * 89.0), 0.0));

        let short = TransmissionLine::new(60.0, 1e-7, 1e9);
        let zl = c(20.0, -13.0);
        let y = loaded_line_admittance(&short, Immittance::from_impedance(zl), f).value;
        assert!(close(y, 1.0 / zl, 1e-6));
    }

    #[test]
    fn tx_closed_form_reference_points() {
        let s = SParams::shunt(c(0.0, 0.0), 50.0).unwrap();
        assert_eq!((s.s11, s.s21), (c(0.0, 0.0), c(1.0, 0.0)));
        let s = SParams::shunt(c(2.0 / 50.0, 0.0), 50.0).unwrap();
        assert!(close(s.s11, c(-0.5, 0.0), 1e-15) && close(s.s21, c(0.5, 0.0), 1e-15));
        let s = SParams::shunt(c(0.0, 2.0 / 50.0), 50.0).unwrap();
        assert!((s.s11.norm_sqr() + s.s21.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(matches!(SParams::shunt(c(-2.0 / 50.0, 0.0), 50.0), Err(Error::Singular(_))));
    }

    #[test]
    fn total_admittance_superposes_matched_branches() {
        let line = |deg| TransmissionLine::new(50.0, deg, 1e9);
        let design = SwitchDesign {
            it1: line(30.0),
            it2: line(60.0),
            it3: line(75.0),
            stub_placement: StubPlacement::Junction,
            ..SwitchDesign::default()
        };
        let znc = [
            Immittance::impedance(0.0, 0.0),
            Immittance::impedance(50.0, 0.0),
            Immittance::impedance(50.0, 0.0),
            Immittance::impedance(50.0, 0.0),
        ];
        let yt = total_admittance(&design, Frequency::ghz(1.0), &znc).value;
        assert!(close(yt, c(3.0 / 50.0, 0.0), 1e-14));

        let sym = SwitchDesign {
            it3: design.it2,
            ..design
        };
        let znc = [Immittance::impedance(3.0, -40.0); 4];
        let y = branch_admittances(&sym, Frequency::ghz(1.1), &znc);
        assert_eq!(y[1], y[2]);
    }

    #[test]
    fn closed_form_rx_coefficients() {
        let mut d = SwitchDesign::default();
        let znc = [Immittance::impedance(2.0, -400.0); 4];
        d.it1.theta_ref_deg = 90.0;
        let (_, c2) = rx_mode_closed_form(&d, Frequency::ghz(1.0), &znc);
        assert!(close(c2, c(0.0, 89.0), 1e-15));
        d.it1.theta_ref_deg = 1e-12;
        let (c1, c2) = rx_mode_closed_form(&d, Frequency::ghz(1.0), &znc);
        assert!(close(c1, c(1.0, 0.0), 1e-12) && c2.norm() < 1e-9);
    }

    #[test]
    fn abcd_reference_points() {
        let s = TwoPortABCD::identity().to_sparams(50.0).unwrap();
        assert_eq!((s.s11, s.s21), (c(0.0, 0.0), c(1.0, 0.0)));
        let s = TwoPortABCD::line(50.0, std::f64::consts::FRAC_PI_2).to_sparams(50.0).unwrap();
        assert!(s.s11.norm() < 1e-15 && (s.s21.norm() - 1.0).abs() < 1e-15);
        assert!(abcd_cascade(&[]).is_err());
        let l = TwoPortABCD::line(70.0, 0.4);
        assert_eq!(abcd_cascade(&[l]).unwrap(), l);
    }

    #[test]
    fn table_design_branches_match_per_branch_abcd() {
        let d = SwitchDesign::default();
        let f = Frequency::ghz(1.0);
        let znc = [Immittance::impedance(2.49, -455.0), Immittance::impedance(2.6, -451.0), Immittance::impedance(2.5, -450.0), Immittance::impedance(2.5, -450.0)];
        let y = branch_admittances(&d, f, &znc);
        let loads = [znc[0].value + d.z_p, znc[1].value, znc[2].value];
        for (i, line) in [d.it1, d.it2, d.it3].iter().enumerate() {
            let zin = line.abcd(f).input_impedance(loads[i]);
            assert!(close(y[i].value, 1.0 / zin, 1e-10));
        }
    }

    proptest! {
        #[test]
        fn loaded_line_matches_abcd(
            z0 in 20.0f64..150.0,
            theta in 0.01f64..179.0,
            rl in 0.0f64..500.0,
            xl in -500.0f64..500.0,
        ) {
            prop_assume!((theta - 90.0).abs() > 0.01);
            prop_assume!(rl > 0.0 || xl.abs() > 1e-3);
            let line = TransmissionLine::new(z0, theta, 1e9);
            let f = Frequency::ghz(1.0);
            let zl = c(rl, xl);
            let y = loaded_line_admittance(&line, Immittance::from_impedance(zl), f).value;
            let y_ref = 1.0 / line.abcd(f).input_impedance(zl);
            prop_assert!(close(y, y_ref, 1e-10), "{} vs {}", y, y_ref);
        }

        #[test]
        fn shunt_abcd_reduces_to_closed_form(g in -0.1f64..0.1, b in -0.1f64..0.1) {
            prop_assume!(g > -0.03);
            let y = c(g, b);
            let s1 = SParams::shunt(y, 50.0).unwrap();
            let s2 = TwoPortABCD::shunt(y).to_sparams(50.0).unwrap();
            prop_assert!((s1.s11 - s2.s11).norm() <= 1e-12 && (s1.s21 - s2.s21).norm() <= 1e-12);
        }

        #[test]
        fn line_composition_and_determinants(z0 in 20.0f64..150.0, a in 0.0f64..3.0, b in 0.0f64..3.0, y in -0.05f64..0.05) {
            let ab = abcd_cascade(&[TwoPortABCD::line(z0, a), TwoPortABCD::line(z0, b)]).unwrap();
            let direct = TwoPortABCD::line(z0, a + b);
            for (p, q) in [(ab.a, direct.a), (ab.b, direct.b), (ab.c, direct.c), (ab.d, direct.d)] {
                prop_assert!((p - q).norm() <= 1e-12 * (1.0 + q.norm()));
            }
            let stages = [TwoPortABCD::line(z0, a), TwoPortABCD::shunt(c(0.01, y)), TwoPortABCD::series(c(3.0, y * 100.0))];
            let det = abcd_cascade(&stages).unwrap().determinant();
            let prod: Complex64 = stages.iter().map(|s| s.determinant()).product();
            prop_assert!((det - prod).norm() <= 1e-9);
        }

        #[test]
        fn lossless_chains_conserve_power(z0 in 20.0f64..150.0, a in 0.05f64..3.0, b1 in -0.05f64..0.05, b2 in -0.05f64..0.05, x in -200.0f64..200.0) {
            let chain = abcd_cascade(&[
                TwoPortABCD::shunt(c(0.0, b1)),
                TwoPortABCD::line(z0, a),
                TwoPortABCD::series(c(0.0, x)),
                TwoPortABCD::shunt(c(0.0, b2)),
            ]).unwrap();
            let s = chain.to_sparams(50.0).unwrap();
            prop_assert!((s.s11.norm_sqr() + s.s21.norm_sqr() - 1.0).abs() <= 1e-9);
            let s = SParams::shunt(c(0.0, b1), 50.0).unwrap();
            prop_assert!((s.s11.norm_sqr() + s.s21.norm_sqr() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn rx_cascade_is_passive(re in 0.5f64..300.0, im in -800.0f64..300.0, f in 0.8f64..1.3) {
            let d = SwitchDesign::default();
            let znc = [Immittance::impedance(re, im); 4];
            let s = rx_mode_sparams_abcd(&d, Frequency::ghz(f), &znc).unwrap();
            prop_assert!(s.s11.norm() <= 1.0 + 1e-9 && s.s21.norm() <= 1.0 + 1e-9);
        }
    }
}
