//! Command-line front end used by the `fountain` binary.
//!
//! Exit status: 0 on success, 2 for usage or configuration errors (the message
//! names the offending field), 3 for failures during a run.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{ConfigError, RunConfig};
use crate::error::Error;
use crate::experiments::{
    calibrate_reflector, calibrate_rf_force, find_pulse_window, monte_carlo, sweep, with_threads,
    MonteCarloOptions, SweepOptions,
};
use crate::plot;
use crate::transverse::{acceptance_map, OpticsConfig};
use crate::units::{parse_quantity, Dimension};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FOUNTAIN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "fountain", version, about = "Single-ion fountain simulator")]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "fountain-out")]
    pub out: PathBuf,
    /// Overrides the random seed of `mc` and stochastic sweeps.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel commands.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Overrides the integrator step, e.g. "1 ns".
    #[arg(long, global = true)]
    pub dt: Option<String>,
    /// Adds the axial RF force near the endcap.
    #[arg(long, global = true)]
    pub enable_rf_force: bool,
    /// Also write an SVG next to each CSV.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrates one extraction and recapture; writes trajectory.csv and summary.txt.
    Simulate,
    /// Scans the `[sweep]` grid; writes sweep.csv.
    Sweep,
    /// Repeated extractions from the `[distribution]`; writes mc_summary.txt and mc_trials.csv.
    Mc {
        /// Overrides `monte_carlo.trials`.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Finds the range of recapturing pulse durations.
    Window,
    /// Fits the reflector to the `[calibration]` targets; writes calibrated.toml.
    Calibrate {
        /// Also fit the RF force amplitude to the mean-ToF target.
        #[arg(long)]
        rf: bool,
    },
    /// Steering acceptance map; writes acceptance.csv.
    Steer,
    /// Renders a CSV produced by another command as SVG.
    Plot {
        input: PathBuf,
        /// Output file; defaults to the input with an .svg extension.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(report) => {
            print!("{report}");
            0
        }
        Err(Failure::Config(m)) => {
            eprintln!("error[config]: {m}");
            2
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error[runtime]: {m}");
            3
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required for this command".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(dt) = &cli.dt {
        cfg.scenario.sim.dt = parse_quantity(dt, Dimension::Time)
            .map_err(|e| Failure::Config(format!("--dt: {e}")))?;
        if !(cfg.scenario.sim.dt > 0.0) {
            return Err(Failure::Config("--dt: must be positive".into()));
        }
    }
    if cli.enable_rf_force && cfg.scenario.sim.rf_force.is_none() {
        cfg.scenario.sim.rf_force = Some(cfg.rf_force);
    }
    if let Some(seed) = cli.seed {
        cfg.monte_carlo.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli) -> Result<&Path, Failure> {
    fs::create_dir_all(&cli.out).map_err(|e| Failure::Runtime(format!("{}: {e}", cli.out.display())))?;
    Ok(&cli.out)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_csv(
    cli: &Cli,
    name: &str,
    f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
) -> Result<PathBuf, Failure> {
    let path = out_dir(cli)?.join(name);
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| Failure::Runtime(e.to_string()))?;
    write(&path, &buf)?;
    if cli.svg {
        let text = String::from_utf8_lossy(&buf);
        let svg = plot::plot_csv_text(&text)?;
        write(&path.with_extension("svg"), svg)?;
    }
    Ok(path)
}

fn execute(cli: &Cli) -> Result<String, Failure> {
    if let Command::Plot { input, output } = &cli.command {
        let output = output.clone().unwrap_or_else(|| input.with_extension("svg"));
        plot::plot_csv(input, &output)?;
        return Ok(format!("wrote {}\n", output.display()));
    }
    let cfg = load(cli)?;
    with_threads(cli.threads, || dispatch(cli, &cfg))?
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<String, Failure> {
    let scenario = &cfg.scenario;
    let mut report = String::new();
    match &cli.command {
        Command::Simulate => {
            let traj = scenario.simulate()?;
            let outcome = scenario.outcome()?;
            let path = write_csv(cli, "trajectory.csv", |b| traj.write_csv(b))?;
            let _ = writeln!(report, "trajectory   {}", path.display());
            match scenario.flight() {
                Ok(f) => {
                    let _ = writeln!(report, "tof_us       {:.4}", f.tof * 1e6);
                    let _ = writeln!(report, "turn_mm      {:.3}", f.z_turn * 1e3);
                    let _ = writeln!(report, "peak_speed   {:.1} m/s", f.peak_speed);
                }
                Err(Error::NotReflected) => {
                    let _ = writeln!(report, "tof_us       none (not reflected)");
                }
                Err(e) => return Err(e.into()),
            }
            let _ = writeln!(report, "termination  {}", traj.termination.as_str());
            let _ = writeln!(report, "z_end_um     {:.3}", outcome.terminal.z * 1e6);
            let _ = writeln!(report, "v_end_mps    {:.3}", outcome.terminal.v);
            let _ = writeln!(report, "residual     {:.3e} J ({:.1} quanta)", outcome.residual.joules, outcome.residual.quanta);
            let _ = writeln!(
                report,
                "verdict      {}",
                if outcome.verdict.is_recaptured() { "recaptured" } else { "lost" }
            );
            write(&out_dir(cli)?.join("summary.txt"), &report)?;
        }
        Command::Sweep => {
            let sw = cfg
                .sweep
                .as_ref()
                .ok_or_else(|| Failure::Config("sweep: required section is missing".into()))?;
            let options = SweepOptions {
                distribution: sw.stochastic.then_some(cfg.distribution),
                repeats: sw.repeats,
                seed: cfg.monte_carlo.seed,
                threads: None,
            };
            let result = sweep(scenario, &sw.grid, &options)?;
            let path = write_csv(cli, "sweep.csv", |b| result.write_csv(b))?;
            let hits = result.successes();
            let _ = writeln!(report, "sweep        {}", path.display());
            let _ = writeln!(report, "cells        {}", result.cells.len());
            let _ = writeln!(report, "with_success {}", hits.len());
            let flagged = result.cells.iter().filter(|c| c.diagnostic.is_some()).count();
            if flagged > 0 {
                let _ = writeln!(report, "flagged      {flagged}");
            }
        }
        Command::Mc { trials } => {
            let n = trials.unwrap_or(cfg.monte_carlo.trials);
            let options = MonteCarloOptions {
                background: cfg.monte_carlo.background,
                threads: None,
            };
            let r = monte_carlo(scenario, &cfg.distribution, n, cfg.monte_carlo.seed, &options)?;
            write_csv(cli, "mc_trials.csv", |b| r.write_csv(b))?;
            report = r.summary();
            write(&out_dir(cli)?.join("mc_summary.txt"), &report)?;
        }
        Command::Window => {
            let w = find_pulse_window(scenario, &cfg.window)?;
            let _ = writeln!(report, "t_lo_us      {:.4}", w.t_lo * 1e6);
            let _ = writeln!(report, "t_hi_us      {:.4}", w.t_hi * 1e6);
            let _ = writeln!(report, "width_ns     {:.1}", w.width() * 1e9);
            write(&out_dir(cli)?.join("window.txt"), &report)?;
        }
        Command::Calibrate { rf } => {
            let cal = calibrate_reflector(scenario, &cfg.calibration)?;
            let _ = writeln!(report, "reflector_center_mm {:.6}", cal.center * 1e3);
            let _ = writeln!(report, "reflector_width_mm  {:.6}", cal.width * 1e3);
            let _ = writeln!(report, "turn_mm             {:.4}", cal.z_turn * 1e3);
            let _ = writeln!(report, "tof_us              {:.5}", cal.tof * 1e6);
            let _ = writeln!(report, "iterations          {}", cal.iterations);
            let path = out_dir(cli)?.join("calibrated.toml");
            write(&path, cfg.with_reflector(cal.center, cal.width))?;
            let _ = writeln!(report, "config              {}", path.display());
            if *rf {
                let mut s = scenario.clone();
                cal.apply(&mut s)?;
                let rc = &cfg.rf_calibration;
                let c = calibrate_rf_force(&s, rc.target_mean_tof, rc.phases, rc.tolerance)?;
                let _ = writeln!(report, "rf_e0_v_per_m       {:.4e}", c.e0);
                let _ = writeln!(report, "rf_mean_tof_us      {:.4}", c.mean_tof * 1e6);
                let _ = writeln!(report, "rf_tof_spread_ns    {:.1}", c.tof_spread * 1e9);
            }
        }
        Command::Steer => {
            let run = &cfg.optics;
            let mut optics: OpticsConfig = run.optics.clone();
            if run.from_flight {
                let flight = scenario.flight()?;
                let derived = OpticsConfig::from_flight(&flight, &scenario.ion, run.aperture_z, run.deflector_z)?;
                optics.turn_distance = derived.turn_distance;
                optics.deflector_distance = derived.deflector_distance;
                optics.kinetic_energy_ev = derived.kinetic_energy_ev;
                optics.calibrate_retroreflection();
            }
            let optics = optics.detuned(run.lens_factor);
            let map = acceptance_map(&run.grid, &optics)?;
            let path = write_csv(cli, "acceptance.csv", |b| map.write_csv(b))?;
            let _ = writeln!(report, "acceptance   {}", path.display());
            let _ = writeln!(report, "k_ev         {:.1}", optics.kinetic_energy_ev);
            let _ = writeln!(report, "cells        {}/{}", map.count(), run.grid.ux.len() * run.grid.uy.len());
            let _ = writeln!(report, "area_v2      {:.4}", map.area());
            let _ = writeln!(report, "regions      {}", map.regions());
        }
        Command::Plot { .. } => unreachable!("handled before loading a config"),
    }
    Ok(report)
}
