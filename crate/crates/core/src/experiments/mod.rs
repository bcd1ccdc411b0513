//! Drivers that turn single trajectories into scans, statistics and
//! calibrated settings.
//!
//! Randomness: every trial draws from its own ChaCha8 stream, seeded with the
//! run seed and selected by `set_stream(trial_index)` (sweeps use
//! `cell_index << 32 | trial_index`). Results are collected in index order, so
//! the worker count never changes an outcome.

pub mod calibrate;
pub mod distribution;
pub mod montecarlo;
pub mod stats;
pub mod sweep;
pub mod window;

pub use calibrate::{
    calibrate_reflector, calibrate_rf_force, CalibrationTargets, ReflectorCalibration,
    RfForceCalibration, tof_over_phases,
};
pub use distribution::{trial_rng, BackgroundLoss, InitialDistribution};
pub use montecarlo::{monte_carlo, MonteCarloOptions, MonteCarloReport, TrialRecord};
pub use stats::wilson_interval;
pub use sweep::{sweep, ParamPath, SweepAxis, SweepCell, SweepGrid, SweepOptions, SweepResult};
pub use window::{find_pulse_window, PulseWindow, WindowSearch};

use crate::error::{Error, Result};

/// Runs `f` on a dedicated pool of `threads` workers; `None` uses the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::InvalidInput(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
