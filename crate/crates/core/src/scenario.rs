//! A complete single-ion run: stack, voltages, pulse plan, RF program,
//! integrator settings and recapture criterion.

use crate::dynamics::{self, Flight, IonSpecies, SimParams, Trajectory};
use crate::error::{Error, Result};
use crate::fields::{ElectrodeStack, FountainGeometry, VoltageMap};
use crate::recapture::{Outcome, RecaptureCriterion};
use crate::waveforms::{RfProgram, SwitchEvent, VoltageSchedule, DEFAULT_EDGE};

/// Simultaneous switch of a group of electrodes to `voltage` and back.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionPulse {
    /// The first electrode marks pulse-off for the recapture test.
    pub electrodes: Vec<String>,
    pub voltage: f64,
    pub start: f64,
    pub duration: f64,
    pub edge: f64,
}

impl Default for ExtractionPulse {
    fn default() -> Self {
        ExtractionPulse {
            electrodes: vec!["E1".into(), "F".into()],
            voltage: -200.0,
            start: 0.0,
            duration: 6.3e-6,
            edge: DEFAULT_EDGE,
        }
    }
}

impl ExtractionPulse {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub stack: ElectrodeStack,
    pub ion: IonSpecies,
    /// Static voltages before and after the pulse.
    pub voltages: VoltageMap,
    pub pulse: ExtractionPulse,
    /// Additional switch events merged into the schedule by time.
    pub extra_events: Vec<SwitchEvent>,
    pub rf: RfProgram,
    pub sim: SimParams,
    pub criterion: RecaptureCriterion,
}

impl Scenario {
    /// Default fountain geometry with the uncalibrated reflector template,
    /// seg6 = −0.6 V, U_R = 7.5 V and a −200 V, 6.3 µs pulse on E1 and F.
    pub fn baseline() -> Self {
        let stack = FountainGeometry::default()
            .build()
            .expect("default geometry is valid");
        let mut voltages = VoltageMap::new();
        voltages.insert("seg6".into(), -0.6);
        voltages.insert("R".into(), 7.5);
        Scenario {
            stack,
            ion: IonSpecies::calcium40(),
            voltages,
            pulse: ExtractionPulse::default(),
            extra_events: Vec::new(),
            rf: RfProgram::default(),
            sim: SimParams::default(),
            criterion: RecaptureCriterion::default(),
        }
    }

    pub fn schedule(&self) -> VoltageSchedule {
        let mut events = Vec::new();
        for name in &self.pulse.electrodes {
            events.push(
                SwitchEvent::new(self.pulse.start, name.clone(), self.pulse.voltage)
                    .with_edge(self.pulse.edge),
            );
        }
        for name in &self.pulse.electrodes {
            let rest = self.voltages.get(name).copied().unwrap_or(0.0);
            events.push(SwitchEvent::new(self.pulse.end(), name.clone(), rest).with_edge(self.pulse.edge));
        }
        events.extend(self.extra_events.iter().cloned());
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut s = VoltageSchedule::new(self.voltages.clone(), events, self.rf.clone());
        if let Some(first) = self.pulse.electrodes.first() {
            s.pulse_electrode = first.clone();
        }
        s
    }

    /// Axial secular angular frequency of the static trap at the origin.
    pub fn omega_z(&self) -> Result<f64> {
        let volts = self.stack.voltage_vector(&self.voltages)?;
        let k = self.ion.charge * self.stack.curvature_with(&volts, self.stack.trap_center_z);
        if !(k > 0.0) {
            return Err(Error::InvalidModel("static voltages do not form an axial well".into()));
        }
        Ok((k / self.ion.mass).sqrt())
    }

    pub fn simulate(&self) -> Result<Trajectory> {
        dynamics::simulate(&self.stack, &self.schedule(), &self.ion, &self.sim)
    }

    /// Out-and-back flight with the pulse held on.
    pub fn flight(&self) -> Result<Flight> {
        dynamics::measure_flight(&self.stack, &self.schedule(), &self.ion, &self.sim)
    }

    pub fn outcome(&self) -> Result<Outcome> {
        let traj = self.simulate()?;
        Outcome::assess(
            traj.terminal,
            traj.termination,
            &self.criterion,
            &self.ion,
            self.omega_z()?,
        )
    }

    /// Outcome starting from a perturbed initial state.
    pub fn outcome_from(&self, z0: f64, v0: f64) -> Result<Outcome> {
        let mut s = self.clone();
        s.sim.z_init = z0;
        s.sim.v_init = v0;
        s.outcome()
    }

    pub fn with_pulse_duration(&self, duration: f64) -> Self {
        let mut s = self.clone();
        s.pulse.duration = duration;
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    #[test]
    fn baseline_schedule_shape() {
        let s = Scenario::baseline();
        let sched = s.schedule();
        assert_eq!(sched.events.len(), 4);
        assert_eq!(sched.pulse_off_time(), Some(6.3e-6));
        assert_eq!(sched.voltage_at(1e-6)["F"], -200.0);
        assert_eq!(sched.voltage_at(7e-6)["F"], 0.0);
    }

    #[test]
    fn secular_frequency() {
        let s = Scenario::baseline();
        assert_relative_eq!(s.omega_z().unwrap() / TAU, 147e3, max_relative = 2e-3);
    }

    #[test]
    fn pulse_returns_to_static_voltage() {
        let mut s = Scenario::baseline();
        s.voltages.insert("E1".into(), 1.0);
        assert_eq!(s.schedule().voltage_at(7e-6)["E1"], 1.0);
    }
}
