//! Integrates the calibrated baseline flight and writes the trajectory as CSV
//! and SVG. Output goes to $FOUNTAIN_OUT_DIR or target/examples.

use std::path::PathBuf;

use ion_fountain::config::RunConfig;
use ion_fountain::plot::{line_plot, Series};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::var("FOUNTAIN_OUT_DIR").unwrap_or_else(|_| "target/examples".into()));
    std::fs::create_dir_all(&dir)?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/baseline.toml"))?;
    let scenario = cfg.scenario;

    let flight = scenario.flight()?;
    println!(
        "turn {:.3} mm at {:.3} us, back at z = {:.2} um after {:.4} us, peak {:.0} m/s",
        flight.z_turn * 1e3,
        flight.t_turn * 1e6,
        flight.z_return * 1e6,
        flight.tof * 1e6,
        flight.peak_speed
    );

    let traj = scenario.simulate()?;
    let outcome = scenario.outcome()?;
    println!(
        "pulse-off ({}): z = {:.3} um, v = {:.3} m/s, {:.1} motional quanta, {:?}",
        traj.termination.as_str(),
        outcome.terminal.z * 1e6,
        outcome.terminal.v,
        outcome.residual.quanta,
        outcome.verdict
    );
    traj.save_csv(dir.join("baseline_trajectory.csv"))?;

    let series = Series {
        label: "z".into(),
        points: traj.samples.iter().map(|s| (s.t * 1e6, s.z * 1e3)).collect(),
    };
    std::fs::write(
        dir.join("baseline_trajectory.svg"),
        line_plot(&[series], "Baseline flight", "t (us)", "z (mm)"),
    )?;
    println!("wrote {}", dir.join("baseline_trajectory.csv").display());
    Ok(())
}
