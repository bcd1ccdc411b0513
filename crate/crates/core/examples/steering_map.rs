//! Transverse acceptance over the two steering offsets at the retroreflection
//! setting and with the reflector lens 3 % weaker.

use std::path::PathBuf;

use ion_fountain::config::RunConfig;
use ion_fountain::plot::heatmap;
use ion_fountain::transverse::{acceptance_map, OffsetGrid, OpticsConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::var("FOUNTAIN_OUT_DIR").unwrap_or_else(|_| "target/examples".into()));
    std::fs::create_dir_all(&dir)?;
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/baseline.toml"))?;
    let flight = cfg.scenario.flight()?;
    let optics = OpticsConfig::from_flight(&flight, &cfg.scenario.ion, 1.45e-3, 48e-3)?;
    println!(
        "K = {:.1} eV at the deflectors, reflector focal length {:.2} mm",
        optics.kinetic_energy_ev,
        optics.focal_length() * 1e3
    );

    let grid = OffsetGrid::square(1.2, 61);
    for (name, factor) in [("tuned", 1.0), ("detuned", 0.97)] {
        let map = acceptance_map(&grid, &optics.detuned(factor))?;
        println!(
            "{name:>8}: {} cells, area {:.3} V^2, {} region(s)",
            map.count(),
            map.area(),
            map.regions()
        );
        let values: Vec<Vec<f64>> = map
            .success
            .iter()
            .map(|row| row.iter().map(|&ok| if ok { 1.0 } else { 0.0 }).collect())
            .collect();
        let svg = heatmap(&grid.ux, &grid.uy, &values, name, "U+ - U_R, x (V)", "U+ - U_R, y (V)");
        std::fs::write(dir.join(format!("steering_{name}.svg")), svg)?;
    }
    Ok(())
}
