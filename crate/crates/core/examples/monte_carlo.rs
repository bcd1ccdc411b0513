//! Repeats extraction and recapture 752 times from a 0.5 mK thermal state and
//! reports the success probability with its Wilson interval.

use ion_fountain::config::RunConfig;
use ion_fountain::experiments::{monte_carlo, wilson_interval, MonteCarloOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::load(concat!(env!("CARGO_MANIFEST_DIR"), "/configs/monte_carlo.toml"))?;
    let mc = &cfg.monte_carlo;

    let without = monte_carlo(&cfg.scenario, &cfg.distribution, mc.trials, mc.seed, &MonteCarloOptions::default())?;
    let options = MonteCarloOptions {
        background: mc.background,
        threads: None,
    };
    let with = monte_carlo(&cfg.scenario, &cfg.distribution, mc.trials, mc.seed, &options)?;
    println!("dynamics only:\n{}", without.summary());
    println!("with background-gas loss:\n{}", with.summary());

    let (lo, hi) = wilson_interval(715, 752, 0.95)?;
    println!("reference 715/752: {:.4} in [{lo:.3}, {hi:.3}]", 715.0 / 752.0);
    Ok(())
}
