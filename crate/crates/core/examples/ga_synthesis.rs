//! Re-synthesizes the three transformer lines with the genetic algorithm
//! and compares the result with the reference design.
//!
//! Run with `cargo run --release --example ga_synthesis`.

use nltr::network::{OperatingSettings, SurfaceSet, SwitchDesign};
use nltr::optimizer::{band_metrics, evaluate_objective, ga_optimize, DesignVector, GaConfig, Objective, Problem};
use nltr::surface::{default_grid, SolverSettings};

fn main() -> nltr::Result<()> {
    let base = SwitchDesign::default();
    let problem = Problem {
        base,
        surfaces: SurfaceSet::build(&base, &default_grid(), &SolverSettings::default(), None)?,
        operating: OperatingSettings::default(),
    };
    let obj = Objective::default();
    let report = ga_optimize(&GaConfig::default(), &obj, &problem)?;
    for g in report.trace.iter().step_by(5) {
        println!("gen {:3}  best {:8.4}  mean {:9.3}", g.generation, g.best_score, g.mean_score);
    }
    let reference = DesignVector::from_design(&base);
    for (name, v) in [("reference", reference), ("synthesized", report.best)] {
        let m = band_metrics(&v.apply(&base), &obj, &problem)?;
        println!(
            "{name:<12} score {:7.4}  θ = ({:.1}°, {:.1}°, {:.1}°)  Z = ({:.1}, {:.1}, {:.1}) Ω",
            evaluate_objective(&v, &obj, &problem),
            v.theta1, v.theta2, v.theta3, v.z1, v.z2, v.z3
        );
        println!(
            "             IL rx {:.2} dB, IL tx {:.2} dB, isolation {:.2} dB, RL {:.2} dB",
            m.il_rx_db, m.il_tx_db, m.isolation_db, m.return_loss_db
        );
    }
    println!("{} evaluations", report.evaluations);
    Ok(())
}
