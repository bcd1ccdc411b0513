//! Fits the reflector transition so the flight turns at 55 mm and returns
//! after 6.3 µs, then checks the recapture state at pulse-off.

use ion_fountain::experiments::{calibrate_reflector, CalibrationTargets};
use ion_fountain::Scenario;

fn main() -> ion_fountain::Result<()> {
    let mut scenario = Scenario::baseline();
    let before = scenario.flight()?;
    println!(
        "template: turn {:.3} mm, tof {:.4} us",
        before.z_turn * 1e3,
        before.tof * 1e6
    );

    let cal = calibrate_reflector(&scenario, &CalibrationTargets::default())?;
    println!(
        "calibrated: center {:.4} mm, width {:.4} mm after {} iterations ({} flights)",
        cal.center * 1e3,
        cal.width * 1e3,
        cal.iterations,
        cal.evaluations
    );
    println!(
        "            turn {:.4} mm, tof {:.5} us",
        cal.z_turn * 1e3,
        cal.tof * 1e6
    );

    cal.apply(&mut scenario)?;
    let outcome = scenario.outcome()?;
    println!(
        "pulse-off state: z = {:.3} um, v = {:.3} m/s -> {:?}",
        outcome.terminal.z * 1e6,
        outcome.terminal.v,
        outcome.verdict
    );
    Ok(())
}
