//! Nodal (admittance-matrix) analysis of the full three-port switch.
//!
//! Independent of the closed forms: every line enters as its two-port
//! admittance matrix and every NC as a lumped admittance, and all three
//! ports are terminated in `Z_p`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{electrical_length, StubPlacement, SwitchDesign, TransmissionLine};
use crate::error::{Error, Result};
use crate::units::{Frequency, Immittance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Port {
    Ant,
    Tx,
    Rx,
}

impl Port {
    pub const ALL: [Port; 3] = [Port::Ant, Port::Tx, Port::Rx];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Port {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Port::Ant => "ant",
            Port::Tx => "tx",
            Port::Rx => "rx",
        })
    }
}

impl std::str::FromStr for Port {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ant" => Ok(Port::Ant),
            "tx" => Ok(Port::Tx),
            "rx" => Ok(Port::Rx),
            other => Err(Error::config("port", format!("unknown port `{other}`"))),
        }
    }
}

// Node numbering: the three ports first, then the far end of IT1 and the
// far end of the IT2 stub.
const NODE_A: usize = 3;
const NODE_STUB: usize = 4;
const NODES: usize = 5;

/// Node voltages for a unit incident wave (source EMF 2 V behind `Z_p`)
/// at the excited port.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSolution {
    pub excited: Port,
    voltages: Vec<Complex64>,
}

impl PortSolution {
    pub fn port_voltage(&self, p: Port) -> Complex64 {
        self.voltages[p.index()]
    }

    /// Voltage across each NC, in NC order.
    pub fn nc_voltages(&self) -> [Complex64; 4] {
        let v = &self.voltages;
        [v[NODE_A] - v[Port::Tx.index()], v[NODE_STUB], v[Port::Rx.index()], v[Port::Rx.index()]]
    }

    /// Scattering coefficient into port `to` from the excited port.
    pub fn s(&self, to: Port) -> Complex64 {
        let v = self.port_voltage(to);
        if to == self.excited {
            v - 1.0
        } else {
            v
        }
    }
}

/// Full 3×3 scattering matrix, indexed `[to][from]` by [`Port::index`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreePortS {
    pub s: [[Complex64; 3]; 3],
    pub z_ref: f64,
}

impl ThreePortS {
    pub fn get(&self, to: Port, from: Port) -> Complex64 {
        self.s[to.index()][from.index()]
    }
}

fn line_y(line: &TransmissionLine, f: Frequency) -> Result<(Complex64, Complex64)> {
    let theta = electrical_length(line, f);
    let (s, c) = theta.sin_cos();
    if s.abs() < 1e-12 {
        return Err(Error::Singular("line at a multiple of 180 degrees"));
    }
    let j = Complex64::i();
    Ok((-j * c / (line.z0 * s), j / (line.z0 * s)))
}

fn stamp_line(y: &mut DMatrix<Complex64>, a: usize, b: usize, line: &TransmissionLine, f: Frequency) -> Result<()> {
    let (self_y, mutual) = line_y(line, f)?;
    y[(a, a)] += self_y;
    y[(b, b)] += self_y;
    y[(a, b)] += mutual;
    y[(b, a)] += mutual;
    Ok(())
}

fn stamp_series(y: &mut DMatrix<Complex64>, a: usize, b: usize, adm: Complex64) {
    y[(a, a)] += adm;
    y[(b, b)] += adm;
    y[(a, b)] -= adm;
    y[(b, a)] -= adm;
}

fn finite(adm: Complex64, what: &'static str) -> Result<Complex64> {
    if adm.re.is_finite() && adm.im.is_finite() {
        Ok(adm)
    } else {
        Err(Error::Singular(what))
    }
}

fn system(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> Result<DMatrix<Complex64>> {
    let mut y = DMatrix::<Complex64>::zeros(NODES, NODES);
    let (ant, tx, rx) = (Port::Ant.index(), Port::Tx.index(), Port::Rx.index());
    stamp_line(&mut y, ant, NODE_A, &design.it1, f)?;
    let stub_root = match design.stub_placement {
        StubPlacement::TxPort => tx,
        StubPlacement::Junction => ant,
    };
    stamp_line(&mut y, stub_root, NODE_STUB, &design.it2, f)?;
    stamp_line(&mut y, ant, rx, &design.it3, f)?;
    stamp_series(&mut y, NODE_A, tx, finite(znc[0].as_admittance(), "NC1 is a short")?);
    y[(NODE_STUB, NODE_STUB)] += finite(znc[1].as_admittance(), "NC2 is a short")?;
    y[(rx, rx)] += finite(znc[2].as_admittance() + znc[3].as_admittance(), "NC3/NC4 is a short")?;
    for p in [ant, tx, rx] {
        y[(p, p)] += Complex64::new(1.0 / design.z_p, 0.0);
    }
    Ok(y)
}

fn solve_with(
    lu: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    excited: Port,
    zp: f64,
) -> Result<PortSolution> {
    let mut rhs = DVector::<Complex64>::zeros(NODES);
    rhs[excited.index()] = Complex64::new(2.0 / zp, 0.0);
    let v = lu.solve(&rhs).ok_or(Error::Singular("nodal matrix"))?;
    if v.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
        return Err(Error::Singular("nodal matrix"));
    }
    Ok(PortSolution {
        excited,
        voltages: v.iter().copied().collect(),
    })
}

/// Solves the network with a unit incident wave at `excited` and the other
/// ports matched.
pub fn solve_ports(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4], excited: Port) -> Result<PortSolution> {
    let lu = system(design, f, znc)?.lu();
    solve_with(&lu, excited, design.z_p)
}

pub fn s_matrix(design: &SwitchDesign, f: Frequency, znc: &[Immittance; 4]) -> Result<ThreePortS> {
    let lu = system(design, f, znc)?.lu();
    let mut s = [[Complex64::new(0.0, 0.0); 3]; 3];
    for from in Port::ALL {
        let sol = solve_with(&lu, from, design.z_p)?;
        for to in Port::ALL {
            s[to.index()][from.index()] = sol.s(to);
        }
    }
    Ok(ThreePortS { s, z_ref: design.z_p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{rx_mode_sparams_abcd, tx_mode_sparams, TwoPortABCD};
    use proptest::prelude::*;

    fn znc_strategy() -> impl Strategy<Value = [Immittance; 4]> {
        prop::array::uniform4((0.5f64..300.0, -800.0f64..300.0))
            .prop_map(|a| a.map(|(r, x)| Immittance::impedance(r, x)))
    }

    #[test]
    fn ports_round_trip_names() {
        for p in Port::ALL {
            assert_eq!(p.to_string().parse::<Port>().unwrap(), p);
        }
    }

    proptest! {
        #[test]
        fn nodal_matches_rx_cascade(znc in znc_strategy(), f in 0.8f64..1.3, junction in any::<bool>()) {
            let mut d = SwitchDesign::default();
            if junction {
                d.stub_placement = StubPlacement::Junction;
            }
            let f = Frequency::ghz(f);
            let s3 = s_matrix(&d, f, &znc).unwrap();
            let s2 = rx_mode_sparams_abcd(&d, f, &znc).unwrap();
            for (a, b) in [
                (s3.get(Port::Ant, Port::Ant), s2.s11),
                (s3.get(Port::Rx, Port::Ant), s2.s21),
                (s3.get(Port::Ant, Port::Rx), s2.s12),
                (s3.get(Port::Rx, Port::Rx), s2.s22),
            ] {
                prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()), "{} vs {}", a, b);
            }
        }

        #[test]
        fn nodal_is_reciprocal_and_passive(znc in znc_strategy(), f in 0.8f64..1.3) {
            let d = SwitchDesign::default();
            let s = s_matrix(&d, Frequency::ghz(f), &znc).unwrap();
            for i in Port::ALL {
                let mut col = 0.0;
                for j in Port::ALL {
                    prop_assert!((s.get(i, j) - s.get(j, i)).norm() <= 1e-12);
                    prop_assert!(s.get(i, j).norm() <= 1.0 + 1e-9);
                    col += s.get(j, i).norm_sqr();
                }
                prop_assert!(col <= 1.0 + 1e-9);
            }
        }

        #[test]
        fn lossless_ncs_make_a_unitary_matrix(x in prop::array::uniform4(-800.0f64..300.0), f in 0.8f64..1.3) {
            prop_assume!(x.iter().all(|v| v.abs() > 1e-3));
            let znc = x.map(|v| Immittance::impedance(0.0, v));
            let d = SwitchDesign::default();
            let s = s_matrix(&d, Frequency::ghz(f), &znc).unwrap();
            for i in Port::ALL {
                let col: f64 = Port::ALL.iter().map(|&j| s.get(j, i).norm_sqr()).sum();
                prop_assert!((col - 1.0).abs() <= 1e-9, "column {} sums to {}", i, col);
            }
        }

        #[test]
        fn frequency_scaling_invariance(znc in znc_strategy(), k in 0.5f64..2.0) {
            let d = SwitchDesign::default();
            let mut scaled = d;
            for l in [&mut scaled.it1, &mut scaled.it2, &mut scaled.it3] {
                l.f_ref_hz *= k;
            }
            let a = s_matrix(&d, Frequency::ghz(1.1), &znc).unwrap();
            let b = s_matrix(&scaled, Frequency::ghz(1.1 * k), &znc).unwrap();
            for i in Port::ALL {
                for j in Port::ALL {
                    prop_assert!((a.get(i, j) - b.get(i, j)).norm() <= 1e-9);
                }
            }
        }
    }

    #[test]
    fn junction_shunt_reduces_to_tx_closed_form() {
        // With every branch a pure shunt at the junction and the through
        // path replaced by a zero-length connection, the antenna sees Yt.
        let d = SwitchDesign {
            stub_placement: StubPlacement::Junction,
            ..SwitchDesign::default()
        };
        let f = Frequency::ghz(1.0);
        let znc = [
            Immittance::impedance(3.0, -450.0),
            Immittance::impedance(2.5, -455.0),
            Immittance::impedance(2.4, -460.0),
            Immittance::impedance(2.4, -460.0),
        ];
        let yt = crate::network::total_admittance(&d, f, &znc).value;
        let via_abcd = TwoPortABCD::shunt(yt).to_sparams(d.z_p).unwrap();
        let closed = tx_mode_sparams(&d, f, &znc).unwrap();
        assert!((via_abcd.s11 - closed.s11).norm() <= 1e-12);
        assert!((via_abcd.s21 - closed.s21).norm() <= 1e-12);
    }
}
