use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSearch {
    pub start: f64,
    pub stop: f64,
    /// Final bisection resolution.
    pub resolution: f64,
    /// Grid spacing of the initial scan; must be finer than the expected window.
    pub coarse_step: f64,
}

impl Default for WindowSearch {
    fn default() -> Self {
        WindowSearch {
            start: 5.5e-6,
            stop: 7.5e-6,
            resolution: 10e-9,
            coarse_step: 20e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseWindow {
    /// Earliest recapturing pulse duration.
    pub t_lo: f64,
    /// Latest recapturing pulse duration.
    pub t_hi: f64,
}

impl PulseWindow {
    pub fn width(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.t_lo + self.t_hi)
    }
}

fn recaptured(base: &Scenario, duration: f64) -> Result<bool> {
    match base.with_pulse_duration(duration).outcome() {
        Ok(o) => Ok(o.verdict.is_recaptured()),
        Err(Error::NumericalBlowup { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Bisects between a failing and a succeeding duration until they are
/// `resolution` apart; returns the succeeding end.
fn refine(base: &Scenario, mut fail: f64, mut ok: f64, resolution: f64) -> Result<f64> {
    while (ok - fail).abs() > resolution {
        let mid = 0.5 * (ok + fail);
        if recaptured(base, mid)? {
            ok = mid;
        } else {
            fail = mid;
        }
    }
    Ok(ok)
}

/// Range of pulse durations that recapture the ion from the configured start
/// state, found by a coarse scan and refined by bisection at both edges.
pub fn find_pulse_window(base: &Scenario, search: &WindowSearch) -> Result<PulseWindow> {
    if !(search.resolution > 0.0 && search.coarse_step > 0.0 && search.start < search.stop) {
        return Err(Error::InvalidInput("window search needs start < stop and positive steps".into()));
    }
    let n = ((search.stop - search.start) / search.coarse_step).ceil() as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| (search.start + i as f64 * search.coarse_step).min(search.stop))
        .collect();
    let hits = grid
        .par_iter()
        .map(|&t| recaptured(base, t))
        .collect::<Result<Vec<bool>>>()?;
    let first = hits.iter().position(|&h| h).ok_or(Error::WindowNotFound)?;
    let last = hits.iter().rposition(|&h| h).expect("at least one hit");
    let t_lo = if first == 0 {
        grid[0]
    } else {
        refine(base, grid[first - 1], grid[first], search.resolution)?
    };
    let t_hi = if last + 1 == grid.len() {
        grid[last]
    } else {
        refine(base, grid[last + 1], grid[last], search.resolution)?
    };
    Ok(PulseWindow { t_lo, t_hi })
}
