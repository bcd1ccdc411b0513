use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use super::distribution::InitialDistribution;
use super::montecarlo::run_trial;
use super::with_threads;
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::units::Dimension;

/// A scannable scenario parameter, named by a dotted path.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamPath {
    PulseDuration,
    PulseStart,
    ExtractionVoltage,
    RfPhaseOffset,
    RfRampUpStart,
    RfForceE0,
    ReflectorCenter,
    ReflectorWidth,
    Voltage(String),
}

impl ParamPath {
    pub fn dimension(&self) -> Dimension {
        match self {
            ParamPath::PulseDuration
            | ParamPath::PulseStart
            | ParamPath::RfPhaseOffset
            | ParamPath::RfRampUpStart => Dimension::Time,
            ParamPath::ExtractionVoltage | ParamPath::Voltage(_) => Dimension::Voltage,
            ParamPath::RfForceE0 => Dimension::ElectricField,
            ParamPath::ReflectorCenter | ParamPath::ReflectorWidth => Dimension::Length,
        }
    }

    pub fn apply(&self, s: &mut Scenario, value: f64) -> Result<()> {
        match self {
            ParamPath::PulseDuration => s.pulse.duration = value,
            ParamPath::PulseStart => s.pulse.start = value,
            ParamPath::ExtractionVoltage => s.pulse.voltage = value,
            ParamPath::RfPhaseOffset => s.rf.t_off = value,
            ParamPath::RfRampUpStart => {
                let ramp = s
                    .rf
                    .ramp_up
                    .as_mut()
                    .ok_or_else(|| Error::InvalidInput("RF program has no ramp-up".into()))?;
                ramp.start = value;
            }
            ParamPath::RfForceE0 => {
                s.sim.rf_force.get_or_insert_with(Default::default).e0 = value;
            }
            ParamPath::ReflectorCenter | ParamPath::ReflectorWidth => {
                let (c, w) = s
                    .stack
                    .reflector_transition()
                    .ok_or_else(|| Error::InvalidInput("stack has no reflector".into()))?;
                if *self == ParamPath::ReflectorCenter {
                    s.stack.set_reflector_transition(value, w)?;
                } else {
                    s.stack.set_reflector_transition(c, value)?;
                }
            }
            ParamPath::Voltage(name) => {
                if !s.stack.contains(name) {
                    return Err(Error::UnknownElectrode(name.clone()));
                }
                s.voltages.insert(name.clone(), value);
            }
        }
        Ok(())
    }
}

impl FromStr for ParamPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "schedule.pulse_duration" => ParamPath::PulseDuration,
            "schedule.pulse_start" => ParamPath::PulseStart,
            "schedule.extraction_voltage" => ParamPath::ExtractionVoltage,
            "rf.t_off" => ParamPath::RfPhaseOffset,
            "rf.ramp_up_start" => ParamPath::RfRampUpStart,
            "rf_force.e0" => ParamPath::RfForceE0,
            "stack.reflector_center" => ParamPath::ReflectorCenter,
            "stack.reflector_width" => ParamPath::ReflectorWidth,
            other => match other.strip_prefix("voltages.") {
                Some(name) if !name.is_empty() => ParamPath::Voltage(name.to_string()),
                _ => return Err(Error::InvalidInput(format!("unknown parameter path `{other}`"))),
            },
        })
    }
}

impl fmt::Display for ParamPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamPath::PulseDuration => f.write_str("schedule.pulse_duration"),
            ParamPath::PulseStart => f.write_str("schedule.pulse_start"),
            ParamPath::ExtractionVoltage => f.write_str("schedule.extraction_voltage"),
            ParamPath::RfPhaseOffset => f.write_str("rf.t_off"),
            ParamPath::RfRampUpStart => f.write_str("rf.ramp_up_start"),
            ParamPath::RfForceE0 => f.write_str("rf_force.e0"),
            ParamPath::ReflectorCenter => f.write_str("stack.reflector_center"),
            ParamPath::ReflectorWidth => f.write_str("stack.reflector_width"),
            ParamPath::Voltage(n) => write!(f, "voltages.{n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub param: ParamPath,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepAxis {
    pub fn new(param: ParamPath, start: f64, stop: f64, step: f64) -> Result<Self> {
        let axis = SweepAxis {
            param,
            start,
            stop,
            step,
        };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::InvalidInput(format!("{}: step must be > 0", self.param)));
        }
        if !(self.start <= self.stop) {
            return Err(Error::InvalidInput(format!("{}: start must not exceed stop", self.param)));
        }
        Ok(())
    }

    /// `start, start + step, …` up to and including `stop` (within 1e-9 step).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub axis1: SweepAxis,
    pub axis2: Option<SweepAxis>,
}

impl SweepGrid {
    pub fn one(axis: SweepAxis) -> Self {
        SweepGrid {
            axis1: axis,
            axis2: None,
        }
    }

    pub fn two(axis1: SweepAxis, axis2: SweepAxis) -> Self {
        SweepGrid {
            axis1,
            axis2: Some(axis2),
        }
    }

    /// Cells in row-major order: axis 1 outer, axis 2 inner.
    pub fn cells(&self) -> Vec<(f64, Option<f64>)> {
        let v1 = self.axis1.values();
        match &self.axis2 {
            None => v1.into_iter().map(|a| (a, None)).collect(),
            Some(ax2) => {
                let v2 = ax2.values();
                v1.iter()
                    .flat_map(|&a| v2.iter().map(move |&b| (a, Some(b))))
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    /// `None` runs a single deterministic trial per cell.
    pub distribution: Option<InitialDistribution>,
    pub repeats: u64,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            distribution: None,
            repeats: 100,
            seed: 0,
            threads: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub p1: f64,
    pub p2: Option<f64>,
    pub n: u64,
    pub k: u64,
    /// First integration error seen in this cell, if any; failed trials count as lost.
    pub diagnostic: Option<String>,
}

impl SweepCell {
    pub fn fraction(&self) -> f64 {
        self.k as f64 / self.n as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    /// `param1,param2,n,k,frac` rows in SI units; `param2` is empty for 1D sweeps.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "param1,param2,n,k,frac")?;
        for c in &self.cells {
            let p2 = c.p2.map(|v| format!("{v:e}")).unwrap_or_default();
            writeln!(w, "{:e},{},{},{},{}", c.p1, p2, c.n, c.k, c.fraction())?;
        }
        Ok(())
    }

    pub fn successes(&self) -> Vec<&SweepCell> {
        self.cells.iter().filter(|c| c.k > 0).collect()
    }
}

fn run_cell(
    base: &Scenario,
    grid: &SweepGrid,
    index: u64,
    p1: f64,
    p2: Option<f64>,
    options: &SweepOptions,
) -> Result<SweepCell> {
    let mut s = base.clone();
    grid.axis1.param.apply(&mut s, p1)?;
    if let (Some(ax), Some(v)) = (&grid.axis2, p2) {
        ax.param.apply(&mut s, v)?;
    }
    let mut cell = SweepCell {
        p1,
        p2,
        n: 0,
        k: 0,
        diagnostic: None,
    };
    match options.distribution {
        None => {
            cell.n = 1;
            match s.outcome() {
                Ok(o) => cell.k = o.verdict.is_recaptured() as u64,
                Err(e @ Error::NumericalBlowup { .. }) => cell.diagnostic = Some(e.to_string()),
                Err(e) => return Err(e),
            }
        }
        Some(dist) => {
            let omega_z = s.omega_z()?;
            for i in 0..options.repeats {
                let stream = (index << 32) | i;
                let rec = run_trial(&s, &dist, None, omega_z, options.seed, stream, i);
                cell.n += 1;
                cell.k += rec.recaptured as u64;
                if cell.diagnostic.is_none() {
                    cell.diagnostic = rec.error;
                }
            }
        }
    }
    Ok(cell)
}

/// Evaluates every grid cell in parallel; the result is in grid order.
pub fn sweep(base: &Scenario, grid: &SweepGrid, options: &SweepOptions) -> Result<SweepResult> {
    grid.axis1.validate()?;
    if let Some(ax) = &grid.axis2 {
        ax.validate()?;
    }
    if options.distribution.is_some() && options.repeats == 0 {
        return Err(Error::InvalidInput("repeats must be >= 1".into()));
    }
    if let Some(d) = &options.distribution {
        d.validate()?;
    }
    let cells = grid.cells();
    let out = with_threads(options.threads, || {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(p1, p2))| run_cell(base, grid, i as u64, p1, p2, options))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SweepResult {
        grid: grid.clone(),
        cells: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_round_trip() {
        for p in [
            "schedule.pulse_duration",
            "rf.t_off",
            "rf.ramp_up_start",
            "voltages.R",
            "stack.reflector_width",
        ] {
            assert_eq!(p.parse::<ParamPath>().unwrap().to_string(), p);
        }
        assert!("schedule.nope".parse::<ParamPath>().is_err());
        assert!("voltages.".parse::<ParamPath>().is_err());
    }

    #[test]
    fn axis_values_include_stop() {
        let ax = SweepAxis::new(ParamPath::PulseDuration, 6.0e-6, 6.5e-6, 50e-9).unwrap();
        let v = ax.values();
        assert_eq!(v.len(), 11);
        assert!((v[10] - 6.5e-6).abs() < 1e-15);
        assert!(SweepAxis::new(ParamPath::PulseDuration, 1.0, 0.0, 0.1).is_err());
        assert!(SweepAxis::new(ParamPath::PulseDuration, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn grid_order() {
        let a = SweepAxis::new(ParamPath::PulseDuration, 0.0, 1.0, 1.0).unwrap();
        let b = SweepAxis::new(ParamPath::RfPhaseOffset, 0.0, 2.0, 1.0).unwrap();
        let cells = SweepGrid::two(a, b).cells();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1], (0.0, Some(1.0)));
        assert_eq!(cells[3], (1.0, Some(0.0)));
    }

    #[test]
    fn unknown_voltage_path_fails() {
        let mut s = Scenario::baseline();
        assert!(matches!(
            ParamPath::Voltage("Q".into()).apply(&mut s, 1.0),
            Err(Error::UnknownElectrode(_))
        ));
        ParamPath::Voltage("R".into()).apply(&mut s, 7.7).unwrap();
        assert_eq!(s.voltages["R"], 7.7);
    }
}
