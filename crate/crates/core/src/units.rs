//! Physical quantities shared by every other module.
//!
//! Power is carried in watts internally and converted to dBm only at the
//! edges (configuration, tables, reports).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// A strictly positive frequency in hertz.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Frequency(f64);

impl Frequency {
    pub fn new(hz: f64) -> Result<Self> {
        if hz.is_finite() && hz > 0.0 {
            Ok(Frequency(hz))
        } else {
            Err(Error::Domain(format!("frequency must be positive and finite, got {hz}")))
        }
    }

    pub fn ghz(ghz: f64) -> Self {
        Frequency::new(ghz * 1e9).expect("positive frequency")
    }

    pub fn hz(self) -> f64 {
        self.0
    }

    pub fn omega(self) -> f64 {
        2.0 * std::f64::consts::PI * self.0
    }
}

/// A power level. Stored in watts; constructed from and reported in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PowerLevel {
    watts: f64,
}

impl PowerLevel {
    pub fn from_dbm(dbm: f64) -> Self {
        PowerLevel {
            watts: dbm_to_watts(dbm),
        }
    }

    pub fn from_watts(watts: f64) -> Result<Self> {
        if watts.is_finite() && watts > 0.0 {
            Ok(PowerLevel { watts })
        } else {
            Err(Error::Domain(format!("power must be positive, got {watts} W")))
        }
    }

    pub fn watts(self) -> f64 {
        self.watts
    }

    pub fn dbm(self) -> f64 {
        watts_to_dbm(self.watts)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// 10·log10 of a power ratio.
pub fn ratio_to_db(ratio: f64) -> Result<f64> {
    if ratio > 0.0 && ratio.is_finite() {
        Ok(10.0 * ratio.log10())
    } else {
        Err(Error::Domain(format!("power ratio must be positive, got {ratio}")))
    }
}

/// 20·log10|a| for a wave amplitude (voltage or S-parameter).
pub fn amplitude_to_db(amplitude: f64) -> Result<f64> {
    ratio_to_db(amplitude * amplitude)
}

/// Thermal voltage kT/q.
pub fn thermal_voltage(temperature_k: f64) -> f64 {
    BOLTZMANN * temperature_k / ELEMENTARY_CHARGE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImmittanceKind {
    Impedance,
    Admittance,
}

/// A complex impedance (ohms) or admittance (siemens), in rectangular form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Immittance {
    pub value: Complex64,
    pub kind: ImmittanceKind,
}

impl Immittance {
    pub fn impedance(re: f64, im: f64) -> Self {
        Immittance {
            value: Complex64::new(re, im),
            kind: ImmittanceKind::Impedance,
        }
    }

    pub fn admittance(re: f64, im: f64) -> Self {
        Immittance {
            value: Complex64::new(re, im),
            kind: ImmittanceKind::Admittance,
        }
    }

    pub fn from_impedance(z: Complex64) -> Self {
        Immittance {
            value: z,
            kind: ImmittanceKind::Impedance,
        }
    }

    pub fn from_admittance(y: Complex64) -> Self {
        Immittance {
            value: y,
            kind: ImmittanceKind::Admittance,
        }
    }

    /// Reciprocal with the kind flipped. A zero value maps to infinity,
    /// which callers treat as an explicit open (or short).
    pub fn reciprocal(self) -> Self {
        let kind = match self.kind {
            ImmittanceKind::Impedance => ImmittanceKind::Admittance,
            ImmittanceKind::Admittance => ImmittanceKind::Impedance,
        };
        Immittance {
            value: self.value.inv(),
            kind,
        }
    }

    pub fn as_impedance(self) -> Complex64 {
        match self.kind {
            ImmittanceKind::Impedance => self.value,
            ImmittanceKind::Admittance => self.value.inv(),
        }
    }

    pub fn as_admittance(self) -> Complex64 {
        match self.kind {
            ImmittanceKind::Admittance => self.value,
            ImmittanceKind::Impedance => self.value.inv(),
        }
    }

    pub fn re(self) -> f64 {
        self.value.re
    }

    pub fn im(self) -> f64 {
        self.value.im
    }

    pub fn is_open(self) -> bool {
        !self.as_impedance().norm().is_finite()
    }
}

/// A (frequency × power) grid with both axes strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub f_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
}

impl Grid2D {
    pub fn from_axes(f_axis: Vec<f64>, p_axis: Vec<f64>) -> Result<Self> {
        check_axis("frequency axis", &f_axis)?;
        check_axis("power axis", &p_axis)?;
        if f_axis[0] <= 0.0 {
            return Err(Error::config("frequency axis", "frequencies must be positive"));
        }
        Ok(Grid2D { f_axis, p_axis })
    }

    pub fn len(&self) -> usize {
        self.f_axis.len() * self.p_axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major (frequency, power) pairs.
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.f_axis
            .iter()
            .flat_map(move |&f| self.p_axis.iter().map(move |&p| (f, p)))
    }
}

fn check_axis(name: &str, axis: &[f64]) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::config(name, "empty axis"));
    }
    if axis.iter().any(|v| !v.is_finite()) {
        return Err(Error::config(name, "non-finite value"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config(name, "values must be strictly increasing"));
    }
    Ok(())
}

/// Linearly spaced points with both endpoints reproduced exactly.
pub fn linspace(start: f64, stop: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![start];
    }
    let step = (stop - start) / (points - 1) as f64;
    (0..points)
        .map(|i| {
            if i == points - 1 {
                stop
            } else {
                start + step * i as f64
            }
        })
        .collect()
}

pub fn make_grid(
    f_start: f64,
    f_stop: f64,
    f_points: usize,
    p_start: f64,
    p_stop: f64,
    p_points: usize,
) -> Result<Grid2D> {
    if !(f_start < f_stop) {
        return Err(Error::config("f_start", "must be below f_stop"));
    }
    if !(p_start < p_stop) {
        return Err(Error::config("p_start", "must be below p_stop"));
    }
    if f_points < 2 {
        return Err(Error::config("f_points", "need at least 2 points"));
    }
    if p_points < 2 {
        return Err(Error::config("p_points", "need at least 2 points"));
    }
    Grid2D::from_axes(
        linspace(f_start, f_stop, f_points),
        linspace(p_start, p_stop, p_points),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn dbm_reference_points() {
        assert_relative_eq!(dbm_to_watts(0.0), 1.0e-3, max_relative = 1e-15);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0, max_relative = 1e-15);
        assert_relative_eq!(dbm_to_watts(-30.0), 1.0e-6, max_relative = 1e-15);
    }

    #[test]
    fn ratio_reference_points() {
        assert_eq!(ratio_to_db(1.0).unwrap(), 0.0);
        assert_relative_eq!(ratio_to_db(0.5).unwrap(), -3.0103, epsilon = 1e-4);
        assert_relative_eq!(ratio_to_db(100.0).unwrap(), 20.0, epsilon = 1e-12);
        assert_relative_eq!(amplitude_to_db(10.0).unwrap(), 20.0, epsilon = 1e-12);
        assert!(matches!(ratio_to_db(0.0), Err(Error::Domain(_))));
        assert!(ratio_to_db(-1.0).is_err());
    }

    #[test]
    fn grid_endpoints_are_exact() {
        let g = make_grid(0.6e9, 1.5e9, 10, -40.0, 30.0, 8).unwrap();
        assert_eq!(g.f_axis[0], 0.6e9);
        assert_eq!(*g.f_axis.last().unwrap(), 1.5e9);
        assert_eq!(g.p_axis[0], -40.0);
        assert_eq!(*g.p_axis.last().unwrap(), 30.0);

        let g = make_grid(1e9, 2e9, 2, 0.0, 10.0, 2).unwrap();
        assert_eq!(g.f_axis, vec![1e9, 2e9]);
        assert_eq!(g.p_axis, vec![0.0, 10.0]);
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(matches!(
            make_grid(2e9, 1e9, 5, -40.0, 30.0, 5),
            Err(Error::Config { .. })
        ));
        assert!(make_grid(1e9, 2e9, 1, -40.0, 30.0, 5).is_err());
        assert!(make_grid(1e9, 2e9, 5, 30.0, -40.0, 5).is_err());
    }

    #[test]
    fn immittance_reciprocal() {
        let z = Immittance::impedance(30.0, -40.0);
        let y = z.reciprocal();
        assert_eq!(y.kind, ImmittanceKind::Admittance);
        assert_relative_eq!(y.re(), 30.0 / 2500.0, max_relative = 1e-15);
        assert_relative_eq!(y.im(), 40.0 / 2500.0, max_relative = 1e-15);
        assert_eq!(y.as_impedance(), y.reciprocal().value);
        assert!(Immittance::admittance(0.0, 0.0).is_open());
    }

    proptest! {
        #[test]
        fn dbm_round_trip(dbm in -60.0f64..40.0) {
            let back = watts_to_dbm(dbm_to_watts(dbm));
            prop_assert!((back - dbm).abs() <= 1e-12 * dbm.abs().max(1.0));
            let w = dbm_to_watts(dbm);
            prop_assert!((dbm_to_watts(watts_to_dbm(w)) - w).abs() <= 1e-12 * w);
        }

        #[test]
        fn db_of_product_is_sum(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            let lhs = ratio_to_db(a * b).unwrap();
            let rhs = ratio_to_db(a).unwrap() + ratio_to_db(b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
