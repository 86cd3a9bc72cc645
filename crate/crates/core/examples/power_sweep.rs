//! Self-consistent operating points of the reference switch at 1.2 GHz as
//! the antenna power rises: the receive path closes and the transmit path
//! takes over.
//!
//! Run with `cargo run --release --example power_sweep`.

use nltr::network::{OperatingSettings, SurfaceSet, SwitchDesign};
use nltr::surface::{default_grid, SolverSettings};
use nltr::sweep::{crossovers, sweep_power};

fn main() -> nltr::Result<()> {
    let design = SwitchDesign::default();
    let surfaces = SurfaceSet::build(&design, &default_grid(), &SolverSettings::default(), None)?;
    let rows = sweep_power(&design, &surfaces, 1.2e9, -40.0, 30.0, 15, &OperatingSettings::default(), false)?;
    println!("p_dbm  mode        p_rx_dbm  p_tx_dbm  rx/tx_db  iters");
    for (r, op) in &rows {
        println!(
            "{:5.1}  {:<10}  {:8.2}  {:8.2}  {:8.2}  {:5}",
            r.p_dbm,
            r.mode.to_string(),
            r.p_out_rx_dbm,
            r.p_out_tx_dbm,
            r.rx_tx_ratio_db(),
            op.iterations
        );
    }
    let table: Vec<_> = rows.into_iter().map(|r| r.0).collect();
    println!("Rx/Tx crossover at {:?} dBm", crossovers(&table));
    Ok(())
}
