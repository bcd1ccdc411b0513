//! Fits the axial RF force so the phase-averaged return time reaches 6.95 us,
//! then prints the return time against the RF phase offset.

use ion_fountain::config::RunConfig;
use ion_fountain::dynamics::RfAxialForceModel;
use ion_fountain::experiments::calibrate_rf_force;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/baseline.toml"))?;
    let base = cfg.scenario;
    let period = base.rf.period();

    for e0 in [1e6, 4e6] {
        let tofs = ion_fountain::experiments::tof_over_phases(&base, e0, 16)?;
        let lo = tofs.iter().copied().fold(f64::MAX, f64::min);
        let hi = tofs.iter().copied().fold(f64::MIN, f64::max);
        println!("E0 {e0:.0e} V/m: tof {:.4} .. {:.4} us", lo * 1e6, hi * 1e6);
    }

    let cal = calibrate_rf_force(&base, 6.95e-6, 16, 2e-9)?;
    println!(
        "fitted E0 {:.3e} V/m: mean tof {:.4} us, spread {:.0} ns",
        cal.e0,
        cal.mean_tof * 1e6,
        cal.tof_spread * 1e9
    );

    let mut s = base.clone();
    s.sim.rf_force = Some(RfAxialForceModel {
        e0: cal.e0,
        ..Default::default()
    });
    println!("RF period {:.2} ns", period * 1e9);
    for k in 0..=28 {
        s.rf.t_off = k as f64 * 4e-9;
        let tof = s.flight().map(|f| format!("{:.4} us", f.tof * 1e6));
        println!("t_off {:5.1} ns: {}", s.rf.t_off * 1e9, tof.unwrap_or_else(|e| e.to_string()));
    }
    Ok(())
}
