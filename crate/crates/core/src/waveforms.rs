//! Time-dependent control program: DC switch events with linear edges and the
//! RF drive envelope.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};
use crate::fields::{ElectrodeStack, VoltageMap};

/// Default linear edge of a DC switch.
pub const DEFAULT_EDGE: f64 = 50e-9;
/// Hardware switching bound; edges must be faster than this.
pub const MAX_EDGE: f64 = 100e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub time: f64,
    pub electrode: String,
    pub target: f64,
    pub edge_duration: f64,
}

impl SwitchEvent {
    pub fn new(time: f64, electrode: impl Into<String>, target: f64) -> Self {
        SwitchEvent {
            time,
            electrode: electrode.into(),
            target,
            edge_duration: DEFAULT_EDGE,
        }
    }

    pub fn with_edge(mut self, edge: f64) -> Self {
        self.edge_duration = edge;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RampShape {
    #[default]
    Cosine,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ramp {
    pub start: f64,
    pub duration: f64,
}

impl Ramp {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfProgram {
    /// Drive angular frequency Ω_RF in rad/s.
    pub omega: f64,
    /// Peak-to-peak amplitude U_pp in volts.
    pub amplitude_pp: f64,
    /// Phase offset time; the drive phase is Ω_RF·(t + t_off).
    pub t_off: f64,
    pub ramp_down: Option<Ramp>,
    /// Ramp-up; its start is t_RF.
    pub ramp_up: Option<Ramp>,
    pub shape: RampShape,
}

impl Default for RfProgram {
    fn default() -> Self {
        RfProgram {
            omega: 2.0 * PI * 17.85e6,
            amplitude_pp: 150.0,
            t_off: 0.0,
            ramp_down: Some(Ramp {
                start: 0.0,
                duration: 500e-9,
            }),
            ramp_up: Some(Ramp {
                start: 6.35e-6,
                duration: 500e-9,
            }),
            shape: RampShape::Cosine,
        }
    }
}

impl RfProgram {
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    fn shape(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, 1.0);
        match self.shape {
            RampShape::Cosine => 0.5 * (1.0 - (PI * x).cos()),
            RampShape::Linear => x,
        }
    }

    /// Envelope level in [0, 1].
    pub fn level(&self, t: f64) -> f64 {
        let mut level = if self.ramp_down.is_none() && self.ramp_up.is_some() {
            0.0
        } else {
            1.0
        };
        if let Some(r) = self.ramp_down {
            if t >= r.start {
                level = if r.duration > 0.0 {
                    1.0 - self.shape((t - r.start) / r.duration)
                } else {
                    0.0
                };
            }
        }
        if let Some(r) = self.ramp_up {
            if t >= r.start {
                level = if r.duration > 0.0 {
                    self.shape((t - r.start) / r.duration)
                } else {
                    1.0
                };
            }
        }
        level
    }

    pub fn phase(&self, t: f64) -> f64 {
        self.omega * (t + self.t_off)
    }
}

/// `(amplitude in V, instantaneous phase in rad)` of the RF drive.
pub fn rf_envelope_at(program: &RfProgram, t: f64) -> (f64, f64) {
    (0.5 * program.amplitude_pp * program.level(t), program.phase(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSchedule {
    pub initial: VoltageMap,
    pub events: Vec<SwitchEvent>,
    pub rf: RfProgram,
    /// Electrode whose final switch marks the end of the extraction pulse.
    pub pulse_electrode: String,
}

impl VoltageSchedule {
    pub fn new(initial: VoltageMap, events: Vec<SwitchEvent>, rf: RfProgram) -> Self {
        VoltageSchedule {
            initial,
            events,
            rf,
            pulse_electrode: "E1".into(),
        }
    }

    /// Time of the last switch on the pulse electrode, if it is switched at
    /// least twice (on, then off).
    pub fn pulse_off_time(&self) -> Option<f64> {
        let times: Vec<f64> = self
            .events
            .iter()
            .filter(|e| e.electrode == self.pulse_electrode)
            .map(|e| e.time)
            .collect();
        (times.len() >= 2).then(|| times[times.len() - 1])
    }

    /// Same program with the pulse never switched off.
    pub fn with_pulse_held(&self) -> Self {
        let mut s = self.clone();
        if let Some(off) = self.pulse_off_time() {
            s.events.retain(|e| e.time < off);
        }
        s
    }

    /// Every event and RF window moved later by `dt`, with t_off compensating
    /// so the drive phase at a shifted instant is unchanged.
    pub fn shifted(&self, dt: f64) -> Self {
        let mut s = self.clone();
        for e in &mut s.events {
            e.time += dt;
        }
        for r in [&mut s.rf.ramp_down, &mut s.rf.ramp_up].into_iter().flatten() {
            r.start += dt;
        }
        s.rf.t_off -= dt;
        s
    }

    /// Voltage on every electrode mentioned by the schedule at time `t`.
    pub fn voltage_at(&self, t: f64) -> VoltageMap {
        let mut names: Vec<&str> = self.initial.keys().map(String::as_str).collect();
        for e in &self.events {
            if !names.contains(&e.electrode.as_str()) {
                names.push(&e.electrode);
            }
        }
        names
            .into_iter()
            .map(|n| (n.to_string(), self.channel(n).value(t)))
            .collect()
    }

    fn channel(&self, name: &str) -> Channel {
        let mut value = self.initial.get(name).copied().unwrap_or(0.0);
        let mut segments: Vec<Segment> = Vec::new();
        for e in self.events.iter().filter(|e| e.electrode == name) {
            if let Some(last) = segments.last() {
                value = last.value(e.time);
            }
            segments.push(Segment {
                start: e.time,
                duration: e.edge_duration.max(0.0),
                from: value,
                to: e.target,
            });
        }
        Channel {
            initial: self.initial.get(name).copied().unwrap_or(0.0),
            segments,
        }
    }

    /// Resolves names against `stack` for fast per-step evaluation.
    pub fn compile(&self, stack: &ElectrodeStack) -> Result<CompiledSchedule> {
        let violations = validate_schedule(self, stack);
        if !violations.is_empty() {
            return Err(Error::InvalidSchedule(violations));
        }
        let mut channels: Vec<(usize, Channel)> = Vec::new();
        let mut base = vec![0.0; stack.len()];
        for (name, &u) in &self.initial {
            base[stack.index_of(name)?] = u;
        }
        let mut seen: Vec<&str> = Vec::new();
        for e in &self.events {
            if !seen.contains(&e.electrode.as_str()) {
                seen.push(&e.electrode);
                channels.push((stack.index_of(&e.electrode)?, self.channel(&e.electrode)));
            }
        }
        Ok(CompiledSchedule {
            base,
            channels,
            rf: self.rf.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    start: f64,
    duration: f64,
    from: f64,
    to: f64,
}

impl Segment {
    fn value(&self, t: f64) -> f64 {
        if t >= self.start + self.duration {
            self.to
        } else {
            self.from + (self.to - self.from) * (t - self.start) / self.duration
        }
    }
}

#[derive(Debug, Clone)]
struct Channel {
    initial: f64,
    segments: Vec<Segment>,
}

impl Channel {
    fn value(&self, t: f64) -> f64 {
        let idx = self.segments.partition_point(|s| s.start <= t);
        if idx == 0 {
            self.initial
        } else {
            self.segments[idx - 1].value(t)
        }
    }
}

/// A schedule bound to a stack's electrode order.
#[derive(Debug, Clone)]
pub struct CompiledSchedule {
    base: Vec<f64>,
    channels: Vec<(usize, Channel)>,
    rf: RfProgram,
}

impl CompiledSchedule {
    /// Writes the voltage vector at `t` into `out`.
    pub fn fill(&self, t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.base);
        for (i, ch) in &self.channels {
            out[*i] = ch.value(t);
        }
    }

    pub fn rf(&self) -> &RfProgram {
        &self.rf
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    UnsortedEvents { index: usize },
    NegativeTime { index: usize },
    UnknownElectrode(String),
    NegativeEdge { index: usize },
    EdgeTooSlow { index: usize },
    NonPositiveRfFrequency,
    NegativeRampDuration,
    RfRampOverlap,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnsortedEvents { index } => {
                write!(f, "event {index} occurs before its predecessor")
            }
            Violation::NegativeTime { index } => write!(f, "event {index} has negative time"),
            Violation::UnknownElectrode(n) => write!(f, "unknown electrode `{n}`"),
            Violation::NegativeEdge { index } => {
                write!(f, "event {index} has a negative edge duration")
            }
            Violation::EdgeTooSlow { index } => {
                write!(f, "event {index} edge is not faster than 100 ns")
            }
            Violation::NonPositiveRfFrequency => f.write_str("RF frequency must be positive"),
            Violation::NegativeRampDuration => f.write_str("RF ramp duration must be >= 0"),
            Violation::RfRampOverlap => f.write_str("RF ramp-up starts before ramp-down ends"),
        }
    }
}

/// Lists every problem with `schedule` against `stack`; empty means valid.
pub fn validate_schedule(schedule: &VoltageSchedule, stack: &ElectrodeStack) -> Vec<Violation> {
    let mut out = Vec::new();
    for name in schedule.initial.keys() {
        if !stack.contains(name) {
            out.push(Violation::UnknownElectrode(name.clone()));
        }
    }
    for (i, e) in schedule.events.iter().enumerate() {
        if e.time < 0.0 {
            out.push(Violation::NegativeTime { index: i });
        }
        if i > 0 && e.time < schedule.events[i - 1].time {
            out.push(Violation::UnsortedEvents { index: i });
        }
        if !stack.contains(&e.electrode) {
            let v = Violation::UnknownElectrode(e.electrode.clone());
            if !out.contains(&v) {
                out.push(v);
            }
        }
        if e.edge_duration < 0.0 {
            out.push(Violation::NegativeEdge { index: i });
        } else if e.edge_duration >= MAX_EDGE {
            out.push(Violation::EdgeTooSlow { index: i });
        }
    }
    let rf = &schedule.rf;
    if !(rf.omega > 0.0) {
        out.push(Violation::NonPositiveRfFrequency);
    }
    let ramps = [rf.ramp_down, rf.ramp_up];
    if ramps.iter().flatten().any(|r| r.duration < 0.0) {
        out.push(Violation::NegativeRampDuration);
    }
    if let (Some(down), Some(up)) = (rf.ramp_down, rf.ramp_up) {
        if up.start < down.end() {
            out.push(Violation::RfRampOverlap);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::FountainGeometry;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn baseline() -> VoltageSchedule {
        let mut initial = VoltageMap::new();
        initial.insert("seg6".into(), -0.6);
        initial.insert("R".into(), 7.5);
        let events = vec![
            SwitchEvent::new(0.0, "E1", -200.0),
            SwitchEvent::new(0.0, "F", -200.0),
            SwitchEvent::new(6.3e-6, "E1", 0.0),
            SwitchEvent::new(6.3e-6, "F", 0.0),
        ];
        VoltageSchedule::new(initial, events, RfProgram::default())
    }

    #[test]
    fn baseline_voltages() {
        let s = baseline();
        assert_eq!(s.voltage_at(1e-6)["E1"], -200.0);
        assert_eq!(s.voltage_at(1e-6)["F"], -200.0);
        assert_eq!(s.voltage_at(0.0)["E1"], 0.0);
        let late = s.voltage_at(1.0);
        assert_eq!(late["E1"], 0.0);
        assert_eq!(late["seg6"], -0.6);
        assert_eq!(late["R"], 7.5);
        assert_relative_eq!(s.voltage_at(25e-9)["E1"], -100.0, epsilon = 1e-9);
        assert_relative_eq!(s.voltage_at(6.3e-6 + 25e-9)["E1"], -100.0, epsilon = 1e-9);
        assert_eq!(s.pulse_off_time(), Some(6.3e-6));
        assert_eq!(s.with_pulse_held().pulse_off_time(), None);
    }

    #[test]
    fn rf_envelope() {
        let rf = RfProgram::default();
        assert_eq!(rf_envelope_at(&rf, 1e-6).0, 0.0);
        assert_eq!(rf_envelope_at(&rf, 10e-6).0, 75.0);
        let mut late = rf.clone();
        late.ramp_down = Some(Ramp {
            start: 1e-6,
            duration: 500e-9,
        });
        assert_eq!(rf_envelope_at(&late, 0.5e-6).0, 75.0);
        let period = rf.period();
        assert_relative_eq!(period, 56.02e-9, max_relative = 1e-3);
        let (_, p0) = rf_envelope_at(&rf, 3e-6);
        let (_, p1) = rf_envelope_at(&rf, 3e-6 + period);
        assert_relative_eq!(p1 - p0, 2.0 * PI, max_relative = 1e-9);
    }

    #[test]
    fn validation() {
        let stack = FountainGeometry::default().build().unwrap();
        assert!(validate_schedule(&baseline(), &stack).is_empty());

        let mut bad = baseline();
        bad.events.push(SwitchEvent::new(7e-6, "E9", 1.0));
        assert_eq!(
            validate_schedule(&bad, &stack),
            vec![Violation::UnknownElectrode("E9".into())]
        );

        let mut overlap = baseline();
        overlap.rf.ramp_up = Some(Ramp {
            start: 0.2e-6,
            duration: 500e-9,
        });
        assert_eq!(validate_schedule(&overlap, &stack), vec![Violation::RfRampOverlap]);

        let mut unsorted = baseline();
        unsorted.events.swap(0, 2);
        assert!(validate_schedule(&unsorted, &stack).contains(&Violation::UnsortedEvents { index: 1 }));

        let mut slow = baseline();
        slow.events[0].edge_duration = 150e-9;
        assert_eq!(validate_schedule(&slow, &stack), vec![Violation::EdgeTooSlow { index: 0 }]);
        assert!(matches!(slow.compile(&stack), Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn compiled_matches_map() {
        let stack = FountainGeometry::default().build().unwrap();
        let s = baseline();
        let c = s.compile(&stack).unwrap();
        let mut v = vec![0.0; stack.len()];
        for t in [0.0, 10e-9, 60e-9, 6.31e-6, 8e-6] {
            c.fill(t, &mut v);
            for (name, u) in s.voltage_at(t) {
                assert_eq!(v[stack.index_of(&name).unwrap()], u);
            }
        }
    }

    #[test]
    fn back_to_back_edges_stay_continuous() {
        let s = VoltageSchedule::new(
            VoltageMap::new(),
            vec![
                SwitchEvent::new(0.0, "E1", -100.0),
                SwitchEvent::new(25e-9, "E1", 0.0),
            ],
            RfProgram::default(),
        );
        // second edge starts from the half-way value of the first
        let a = s.voltage_at(25e-9 - 1e-15)["E1"];
        let b = s.voltage_at(25e-9)["E1"];
        assert_relative_eq!(a, b, epsilon = 1e-5);
        assert_eq!(s.voltage_at(1e-6)["E1"], 0.0);
    }

    proptest! {
        #[test]
        fn voltage_is_continuous(t in 0.0f64..8e-6) {
            let s = baseline();
            let a = s.voltage_at(t)["E1"];
            let b = s.voltage_at(t + 1e-12)["E1"];
            // slope bound: 200 V over 50 ns
            prop_assert!((a - b).abs() <= 200.0 / 50e-9 * 1e-12 * (1.0 + 1e-9));
        }

        #[test]
        fn time_translation(t in 0.0f64..8e-6, dt in 0.0f64..3e-6) {
            let s = baseline();
            let sh = s.shifted(dt);
            let a = s.voltage_at(t);
            let b = sh.voltage_at(t + dt);
            for (k, v) in &a {
                prop_assert!((v - b[k]).abs() < 1e-6);
            }
            let (amp0, ph0) = rf_envelope_at(&s.rf, t);
            let (amp1, ph1) = rf_envelope_at(&sh.rf, t + dt);
            prop_assert!((amp0 - amp1).abs() < 1e-6);
            prop_assert!((ph0 - ph1).abs() < 1e-6);
        }

        #[test]
        fn rf_phase_increasing_and_amplitude_bounded(t in 0.0f64..10e-6, dt in 1e-12f64..1e-7) {
            let rf = RfProgram::default();
            let (a0, p0) = rf_envelope_at(&rf, t);
            let (_, p1) = rf_envelope_at(&rf, t + dt);
            prop_assert!(p1 > p0);
            prop_assert!((0.0..=75.0).contains(&a0));
        }
    }
}
