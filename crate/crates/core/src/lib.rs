//! Simulation and design synthesis for a passive, power-autonomous
//! transmit/receive switch built from Schottky-diode limiters and
//! transmission-line impedance transformers.

pub mod cli;
pub mod diode;
pub mod error;
pub mod io;
pub mod network;
pub mod optimizer;
pub mod surface;
pub mod sweep;
pub mod units;

pub use error::{Error, Result};
