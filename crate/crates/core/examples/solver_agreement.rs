//! Harmonic balance against the transient oracle for one grounded NC block.
//!
//! Run with `cargo run --release --example solver_agreement`.

use std::time::Instant;

use nltr::diode::{
    describing_function_impedance, transient_steady_state, DriveSpec, HbSettings, TransientSettings,
};
use nltr::surface::NonlinearCircuit;
use nltr::units::{linspace, Frequency, PowerLevel};

fn main() -> nltr::Result<()> {
    let nc = NonlinearCircuit::default();
    println!("f_ghz  p_dbm    hb_z                 transient_z          |dZ|/|Z|   dphase_deg  hb_ms  tr_ms");
    for f in linspace(0.8, 1.3, 4) {
        for p in linspace(-40.0, 30.0, 4) {
            let drive = DriveSpec::new(Frequency::ghz(f), PowerLevel::from_dbm(p));
            let t0 = Instant::now();
            let hb = describing_function_impedance(&nc.diode, &nc, &drive, &HbSettings::default())?;
            let t1 = Instant::now();
            let tr = transient_steady_state(&nc.diode, &nc, &drive, &TransientSettings::default())?;
            let t2 = Instant::now();
            let (a, b) = (hb.z_fundamental.value, tr.z_fundamental.value);
            let mag = (a.norm() - b.norm()).abs() / b.norm();
            let phase = (a.arg() - b.arg()).to_degrees();
            println!(
                "{f:.3}  {p:6.1}  {:8.2}{:+9.2}j  {:8.2}{:+9.2}j  {mag:9.2e}  {phase:9.3}  {:5.1}  {:6.1}  ({} hb iters, {} periods)",
                a.re, a.im, b.re, b.im,
                (t1 - t0).as_secs_f64() * 1e3,
                (t2 - t1).as_secs_f64() * 1e3,
                hb.iterations, tr.iterations
            );
        }
    }
    Ok(())
}
