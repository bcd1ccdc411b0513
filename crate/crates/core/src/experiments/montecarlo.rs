use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use super::distribution::{trial_rng, BackgroundLoss, InitialDistribution};
use super::stats::wilson_interval;
use super::with_threads;
use crate::error::{Error, Result};
use crate::recapture::Verdict;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonteCarloOptions {
    pub background: Option<BackgroundLoss>,
    /// Worker count; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub index: u64,
    pub z0: f64,
    pub v0: f64,
    pub z_end: f64,
    pub v_end: f64,
    pub recaptured: bool,
    pub background_loss: bool,
    /// Set when the integration failed; the trial counts as lost.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub n_trials: u64,
    pub n_success: u64,
    pub point: f64,
    pub interval: (f64, f64),
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
}

impl MonteCarloReport {
    pub fn from_trials(seed: u64, trials: Vec<TrialRecord>) -> Result<Self> {
        let n = trials.len() as u64;
        let k = trials.iter().filter(|t| t.recaptured).count() as u64;
        let interval = wilson_interval(k, n, 0.95)?;
        Ok(MonteCarloReport {
            n_trials: n,
            n_success: k,
            point: k as f64 / n as f64,
            interval,
            seed,
            trials,
        })
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "trials      {}", self.n_trials);
        let _ = writeln!(s, "recaptured  {}", self.n_success);
        let _ = writeln!(s, "probability {:.3}", self.point);
        let _ = writeln!(
            s,
            "wilson95    [{:.3}, {:.3}]",
            self.interval.0, self.interval.1
        );
        let _ = writeln!(s, "seed        {}", self.seed);
        let errors = self.trials.iter().filter(|t| t.error.is_some()).count();
        if errors > 0 {
            let _ = writeln!(s, "errors      {errors}");
        }
        s
    }

    /// Per-trial rows: `trial,z0_m,v0_mps,z_end_m,v_end_mps,recaptured,background_loss,error`.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "trial,z0_m,v0_mps,z_end_m,v_end_mps,recaptured,background_loss,error")?;
        for t in &self.trials {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{},{},{}",
                t.index,
                t.z0,
                t.v0,
                t.z_end,
                t.v_end,
                t.recaptured as u8,
                t.background_loss as u8,
                t.error.as_deref().unwrap_or("")
            )?;
        }
        Ok(())
    }
}

/// Runs one trial from substream `stream`.
pub(crate) fn run_trial(
    scenario: &Scenario,
    distribution: &InitialDistribution,
    background: Option<&BackgroundLoss>,
    omega_z: f64,
    seed: u64,
    stream: u64,
    index: u64,
) -> TrialRecord {
    let mut rng = trial_rng(seed, stream);
    let (dz, dv) = distribution.sample(&mut rng, &scenario.ion, omega_z);
    let z0 = scenario.sim.z_init + dz;
    let v0 = scenario.sim.v_init + dv;
    // drawn unconditionally so the stream layout does not depend on the option
    let u: f64 = rng.random();
    let background_loss = background.is_some_and(|b| u < b.probability());
    let mut rec = TrialRecord {
        index,
        z0,
        v0,
        z_end: f64::NAN,
        v_end: f64::NAN,
        recaptured: false,
        background_loss,
        error: None,
    };
    match scenario.outcome_from(z0, v0) {
        Ok(o) => {
            rec.z_end = o.terminal.z;
            rec.v_end = o.terminal.v;
            rec.recaptured = o.verdict == Verdict::Recaptured && !background_loss;
        }
        Err(e) => rec.error = Some(e.to_string().replace(',', ";")),
    }
    rec
}

/// `n` independent extractions with initial states drawn from `distribution`.
pub fn monte_carlo(
    scenario: &Scenario,
    distribution: &InitialDistribution,
    n: u64,
    seed: u64,
    options: &MonteCarloOptions,
) -> Result<MonteCarloReport> {
    if n == 0 {
        return Err(Error::InvalidInput("monte carlo needs at least one trial".into()));
    }
    distribution.validate()?;
    let omega_z = scenario.omega_z()?;
    let background = options.background.as_ref();
    let trials = with_threads(options.threads, || {
        (0..n)
            .into_par_iter()
            .map(|i| run_trial(scenario, distribution, background, omega_z, seed, i, i))
            .collect::<Vec<_>>()
    })?;
    MonteCarloReport::from_trials(seed, trials)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(i: u64, ok: bool) -> TrialRecord {
        TrialRecord {
            index: i,
            z0: 0.0,
            v0: 0.0,
            z_end: 0.0,
            v_end: 0.0,
            recaptured: ok,
            background_loss: false,
            error: None,
        }
    }

    #[test]
    fn report_from_fixed_outcomes() {
        let trials = (0..752).map(|i| record(i, i < 715)).collect();
        let r = MonteCarloReport::from_trials(1, trials).unwrap();
        assert_eq!((r.n_trials, r.n_success), (752, 715));
        assert!(r.summary().contains("probability 0.951"));
        assert!(r.interval.0 <= r.point && r.point <= r.interval.1);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 753);
    }

    #[test]
    fn zero_trials_rejected() {
        let s = Scenario::baseline();
        let r = monte_carlo(&s, &InitialDistribution::Delta, 0, 1, &Default::default());
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
