//! Small-signal three-port S-matrix of the reference switch with every NC
//! at its zero-bias impedance, checked against the closed-form receive
//! path.
//!
//! Run with `cargo run --release --example switch_sparams`.

use nltr::diode::linear_nc_impedance;
use nltr::network::{rx_mode_sparams_abcd, s_matrix, Port, SwitchDesign};
use nltr::units::{Frequency, Immittance};

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

fn main() -> nltr::Result<()> {
    let design = SwitchDesign::default();
    println!("f_ghz  |S_rx,ant| dB  |S_tx,ant| dB  |S_rx,tx| dB  |S_ant,ant| dB  |S21| cascade dB");
    for k in 0..=10 {
        let f = Frequency::ghz(0.8 + 0.05 * k as f64);
        let znc = design.nc.map(|nc| Immittance::from_impedance(linear_nc_impedance(&nc, f)));
        let s = s_matrix(&design, f, &znc)?;
        let cascade = rx_mode_sparams_abcd(&design, f, &znc)?;
        println!(
            "{:.2}   {:12.3}  {:12.3}  {:11.3}  {:13.3}  {:15.3}",
            f.hz() / 1e9,
            db(s.get(Port::Rx, Port::Ant).norm()),
            db(s.get(Port::Tx, Port::Ant).norm()),
            db(s.get(Port::Rx, Port::Tx).norm()),
            db(s.get(Port::Ant, Port::Ant).norm()),
            db(cascade.s21.norm()),
        );
    }
    Ok(())
}
