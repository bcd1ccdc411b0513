//! Recapture map over pulse duration and RF phase offset with the axial RF
//! force switched on; writes sweep CSV and a heatmap.

use std::path::PathBuf;

use ion_fountain::config::RunConfig;
use ion_fountain::experiments::{sweep, SweepOptions};
use ion_fountain::plot::heatmap;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::var("FOUNTAIN_OUT_DIR").unwrap_or_else(|_| "target/examples".into()));
    std::fs::create_dir_all(&dir)?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/rf_phase_sweep.toml"))?;
    let grid = cfg.sweep.expect("config has a [sweep] section").grid;

    let result = sweep(&cfg.scenario, &grid, &SweepOptions::default())?;
    let mut csv = Vec::new();
    result.write_csv(&mut csv)?;
    std::fs::write(dir.join("timing_sweep.csv"), csv)?;

    let xs = grid.axis1.values();
    let ys = grid.axis2.as_ref().map(|a| a.values()).unwrap_or_default();
    let values: Vec<Vec<f64>> = result
        .cells
        .chunks(ys.len())
        .map(|row| row.iter().map(|c| c.fraction()).collect())
        .collect();
    let xs_us: Vec<f64> = xs.iter().map(|x| x * 1e6).collect();
    let ys_ns: Vec<f64> = ys.iter().map(|y| y * 1e9).collect();
    std::fs::write(
        dir.join("timing_sweep.svg"),
        heatmap(&xs_us, &ys_ns, &values, "Recapture", "pulse duration (us)", "t_off (ns)"),
    )?;

    // earliest recapturing pulse for each phase offset
    for (j, t_off) in ys_ns.iter().enumerate().step_by(2) {
        let first = xs_us.iter().enumerate().find(|(i, _)| values[*i][j] > 0.0);
        match first {
            Some((_, t)) => println!("t_off {t_off:5.0} ns: recapture from {t:.2} us"),
            None => println!("t_off {t_off:5.0} ns: no recapture"),
        }
    }
    println!("wrote {}", dir.join("timing_sweep.csv").display());
    Ok(())
}
