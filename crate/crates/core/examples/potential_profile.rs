//! On-axis potential of the fountain stack before and during the extraction
//! pulse, and the same stack with E1 replaced by a tabulated profile.

use std::path::PathBuf;

use ion_fountain::fields::{total_potential, ElectrodeModel, FountainGeometry};
use ion_fountain::plot::{line_plot, Series};
use ion_fountain::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::var("FOUNTAIN_OUT_DIR").unwrap_or_else(|_| "target/examples".into()));
    std::fs::create_dir_all(&dir)?;
    let scenario = Scenario::baseline();
    let stack = FountainGeometry::default().build()?;
    let static_v = scenario.voltages.clone();
    let mut pulsed = static_v.clone();
    for name in &scenario.pulse.electrodes {
        pulsed.insert(name.clone(), scenario.pulse.voltage);
    }

    let zs: Vec<f64> = (0..=400).map(|i| -2e-3 + i as f64 * 0.2e-3).collect();
    let mut series = Vec::new();
    for (label, volts) in [("trap", &static_v), ("pulse", &pulsed)] {
        let points = zs
            .iter()
            .map(|&z| Ok((z * 1e3, total_potential(&stack, volts, z)?)))
            .collect::<ion_fountain::Result<Vec<_>>>()?;
        series.push(Series { label: label.into(), points });
    }
    for z_mm in [0.0, 1.45, 5.5, 30.0, 55.0] {
        let z = z_mm * 1e-3;
        println!(
            "z {z_mm:5.2} mm: trap {:8.4} V, pulse {:9.3} V",
            total_potential(&stack, &static_v, z)?,
            total_potential(&stack, &pulsed, z)?
        );
    }

    // sample E1's unit potential and load it back as a table
    let e1 = stack.model("E1")?.clone();
    let mut csv = String::from("z,phi\n");
    for i in 0..=600 {
        let z = -2e-3 + i as f64 * 0.02e-3;
        csv.push_str(&format!("{z:e},{:e}\n", ion_fountain::fields::unit_potential(&e1, z)));
    }
    let mut tabulated = stack.clone();
    tabulated.upsert("E1", ElectrodeModel::tabulated_from_csv_str(&csv)?);
    let z = 1.0e-3;
    println!(
        "E1 at -200 V, z = 1 mm: analytic {:.4} V, tabulated {:.4} V",
        total_potential(&stack, &pulsed, z)?,
        total_potential(&tabulated, &pulsed, z)?
    );

    std::fs::write(
        dir.join("potential_profile.svg"),
        line_plot(&series, "On-axis potential", "z (mm)", "phi (V)"),
    )?;
    Ok(())
}
