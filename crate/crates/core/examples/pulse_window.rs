//! Range of pulse durations that recapture the ion, for the default and a
//! loosened recapture criterion.

use ion_fountain::config::RunConfig;
use ion_fountain::experiments::{find_pulse_window, WindowSearch};
use ion_fountain::recapture::RecaptureCriterion;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/baseline.toml"))?;
    let search = WindowSearch::default();

    for (label, criterion) in [
        ("100 um, 50 m/s", RecaptureCriterion::default()),
        (
            "200 um, 100 m/s",
            RecaptureCriterion {
                max_distance: 200e-6,
                max_speed: 100.0,
                ..Default::default()
            },
        ),
    ] {
        let mut s = cfg.scenario.clone();
        s.criterion = criterion;
        let w = find_pulse_window(&s, &search)?;
        println!(
            "{label:>16}: {:.3} .. {:.3} us (width {:.0} ns, centre {:.4} us)",
            w.t_lo * 1e6,
            w.t_hi * 1e6,
            w.width() * 1e9,
            w.center() * 1e6
        );
    }
    Ok(())
}
