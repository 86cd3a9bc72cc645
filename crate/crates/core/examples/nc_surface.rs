//! Impedance of one NC block versus drive level: capacitive and nearly
//! open at low power, collapsing toward its series resistance when driven
//! hard.
//!
//! Run with `cargo run --release --example nc_surface`.

use nltr::surface::{build_surface, NonlinearCircuit, SolverSettings};
use nltr::units::make_grid;

fn main() -> nltr::Result<()> {
    let nc = NonlinearCircuit::default();
    let grid = make_grid(0.8e9, 1.3e9, 3, -40.0, 30.0, 15)?;
    let surface = build_surface(&nc, &grid, &SolverSettings::default())?;
    println!("{} diodes: {} branches of {} in series", nc.total_diodes(), nc.n_antiparallel_branches, nc.n_series_per_branch);
    println!("p_dbm   {}", grid.f_axis.iter().map(|f| format!("{:>24}", format!("{:.2} GHz", f / 1e9))).collect::<String>());
    for (pi, p) in grid.p_axis.iter().enumerate() {
        print!("{p:6.1} ");
        for fi in 0..grid.f_axis.len() {
            let z = surface.value(fi, pi);
            print!("  {:9.2} {:+9.2}j Ω", z.re, z.im);
        }
        println!();
    }
    let z = surface.interpolate_dbm(1.0e9, 17.5)?;
    println!("interpolated at 1.00 GHz, 17.5 dBm: {:.2} {:+.2}j Ω", z.re(), z.im());
    Ok(())
}
