//! Low-power frequency sweep exported as CSV and Touchstone, then read
//! back.
//!
//! Run with `cargo run --release --example touchstone_export [DIR]`.

use std::path::PathBuf;

use nltr::io::{parse_touchstone, read_sweep_csv, sweep_csv_string, write_atomic, write_touchstone, TwoPortPoint};
use nltr::network::{OperatingSettings, Port, SurfaceSet, SwitchDesign};
use nltr::surface::{default_grid, SolverSettings};
use nltr::sweep::sweep_frequency;

fn main() -> nltr::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let design = SwitchDesign::default();
    let surfaces = SurfaceSet::build(&design, &default_grid(), &SolverSettings::default(), None)?;
    let rows = sweep_frequency(&design, &surfaces, -30.0, 0.8e9, 1.3e9, 11, &OperatingSettings::default(), false)?;

    let table: Vec<_> = rows.iter().map(|r| r.0.clone()).collect();
    let csv_path = dir.join("nltr_sweep.csv");
    write_atomic(&csv_path, sweep_csv_string(&table)?.as_bytes())?;
    let back = read_sweep_csv(std::fs::read(&csv_path).map_err(|e| nltr::Error::io(&csv_path, e))?.as_slice(), &csv_path)?;
    println!("{}: {} rows, lossless: {}", csv_path.display(), back.len(), back == table);

    let points: Vec<TwoPortPoint> = rows
        .iter()
        .map(|(_, op)| {
            let s = |to, from| op.sparams.get(to, from);
            TwoPortPoint {
                f_hz: op.frequency.hz(),
                s: [[s(Port::Ant, Port::Ant), s(Port::Ant, Port::Rx)], [s(Port::Rx, Port::Ant), s(Port::Rx, Port::Rx)]],
            }
        })
        .collect();
    let s2p_path = dir.join("nltr_ant_rx.s2p");
    write_atomic(&s2p_path, write_touchstone(&points, design.z_p, &["antenna to receiver, -30 dBm".into()])?.as_bytes())?;
    let text = std::fs::read_to_string(&s2p_path).map_err(|e| nltr::Error::io(&s2p_path, e))?;
    let parsed = parse_touchstone(&text, &s2p_path)?;
    println!("{}: {} points, lossless: {}", s2p_path.display(), parsed.points.len(), parsed.points == points);
    print!("{}", text.lines().take(4).map(|l| format!("{l}\n")).collect::<String>());
    Ok(())
}
