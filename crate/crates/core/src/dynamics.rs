//! Axial equation of motion integrated with velocity Verlet.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::ElectrodeStack;
use crate::units::{ATOMIC_MASS_UNIT, ELECTRON_MASS, ELEMENTARY_CHARGE};
use crate::waveforms::{CompiledSchedule, VoltageSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    /// kg
    pub mass: f64,
    /// C
    pub charge: f64,
    pub label: String,
}

impl IonSpecies {
    pub fn new(mass: f64, charge: f64, label: impl Into<String>) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Config("ion mass must be positive".into()));
        }
        if charge == 0.0 || !charge.is_finite() {
            return Err(Error::Config("ion charge must be non-zero".into()));
        }
        Ok(IonSpecies {
            mass,
            charge,
            label: label.into(),
        })
    }

    /// ⁴⁰Ca⁺: atomic mass minus one electron, charge +e.
    pub fn calcium40() -> Self {
        IonSpecies {
            mass: 39.9626 * ATOMIC_MASS_UNIT - ELECTRON_MASS,
            charge: ELEMENTARY_CHARGE,
            label: "40Ca+".into(),
        }
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }
}

/// Phase-space point on the trap axis.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IonState {
    pub t: f64,
    pub z: f64,
    pub v: f64,
}

impl IonState {
    pub fn at_rest(z: f64) -> Self {
        IonState { t: 0.0, z, v: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.z.is_finite() && self.v.is_finite()
    }
}

/// Axial component of the RF field near the endcap:
/// `E₀ · g(z) · sin(Ω_RF (t + t_off)) · level(t)` with a Gaussian profile `g`
/// centred on the endcap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfAxialForceModel {
    pub center: f64,
    pub sigma: f64,
    /// Peak axial field at full RF amplitude, V/m.
    pub e0: f64,
}

impl Default for RfAxialForceModel {
    fn default() -> Self {
        RfAxialForceModel {
            center: 1.45e-3,
            sigma: 0.4e-3,
            e0: 1.0e6,
        }
    }
}

impl RfAxialForceModel {
    pub fn profile(&self, z: f64) -> f64 {
        let x = (z - self.center) / self.sigma;
        (-0.5 * x * x).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub dt: f64,
    pub z_init: f64,
    pub v_init: f64,
    pub max_time: f64,
    /// Keep one sample every `decimation` steps.
    pub decimation: usize,
    pub rf_force: Option<RfAxialForceModel>,
    /// A maximum beyond this position counts as the outer turning point of a flight.
    pub flight_threshold: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            dt: 2e-9,
            z_init: 0.0,
            v_init: 0.0,
            max_time: 20e-6,
            decimation: 10,
            rf_force: None,
            flight_threshold: 5e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    PulseOff,
    Escaped,
    MaxTime,
    /// Flight measurement stopped at the return turning point.
    Returned,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::PulseOff => "pulse-off",
            Termination::Escaped => "escaped",
            Termination::MaxTime => "max-time",
            Termination::Returned => "returned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

/// Velocity sign change located within a single integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub t: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<IonState>,
    pub terminal: IonState,
    pub termination: Termination,
    pub extrema: Vec<Extremum>,
    pub dt: f64,
    pub decimation: usize,
}

impl Trajectory {
    /// Writes `t_s,z_m,v_mps` rows.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "t_s,z_m,v_mps")?;
        for s in &self.samples {
            writeln!(w, "{:e},{:e},{:e}", s.t, s.z, s.v)?;
        }
        if self.samples.last() != Some(&self.terminal) {
            let s = self.terminal;
            writeln!(w, "{:e},{:e},{:e}", s.t, s.z, s.v)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }
}

/// One velocity-Verlet step:
/// `z' = z + v dt + ½ a(z,t) dt²`, `v' = v + ½[a(z,t) + a(z',t+dt)] dt`.
pub fn step(state: IonState, accel: impl Fn(f64, f64) -> f64, dt: f64) -> Result<IonState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let a0 = accel(state.z, state.t);
    let (next, _) = verlet(state, a0, &accel, dt);
    if next.is_finite() && a0.is_finite() {
        Ok(next)
    } else {
        Err(Error::NumericalBlowup { last_good: state })
    }
}

#[inline]
fn verlet(s: IonState, a0: f64, accel: &impl Fn(f64, f64) -> f64, dt: f64) -> (IonState, f64) {
    let z = s.z + s.v * dt + 0.5 * a0 * dt * dt;
    let t = s.t + dt;
    let a1 = accel(z, t);
    let v = s.v + 0.5 * (a0 + a1) * dt;
    (IonState { t, z, v }, a1)
}

/// Locates the extremum between two states with a cubic Hermite interpolant.
fn hermite_extremum(a: &IonState, b: &IonState) -> (f64, f64) {
    let h = b.t - a.t;
    let (z0, z1, m0, m1) = (a.z, b.z, a.v * h, b.v * h);
    // dz/ds = c2 s² + c1 s + c0
    let c2 = 6.0 * z0 + 3.0 * m0 - 6.0 * z1 + 3.0 * m1;
    let c1 = -6.0 * z0 - 4.0 * m0 + 6.0 * z1 - 2.0 * m1;
    let c0 = m0;
    let s = if c2.abs() < 1e-300 {
        if c1 != 0.0 {
            -c0 / c1
        } else {
            0.5
        }
    } else {
        let disc = (c1 * c1 - 4.0 * c2 * c0).max(0.0).sqrt();
        let r1 = (-c1 + disc) / (2.0 * c2);
        let r2 = (-c1 - disc) / (2.0 * c2);
        let in_unit = |r: f64| (-1e-9..=1.0 + 1e-9).contains(&r);
        match (in_unit(r1), in_unit(r2)) {
            (true, false) => r1,
            (false, true) => r2,
            (true, true) => {
                if (r1 - 0.5).abs() < (r2 - 0.5).abs() {
                    r1
                } else {
                    r2
                }
            }
            (false, false) => -c0 / (c1 + c2),
        }
    }
    .clamp(0.0, 1.0);
    let s2 = s * s;
    let s3 = s2 * s;
    let z = (2.0 * s3 - 3.0 * s2 + 1.0) * z0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * z1
        + (s3 - s2) * m1;
    (a.t + s * h, z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StopRule {
    PulseOff,
    Return,
}

/// Acceleration model assembled from a stack, a compiled schedule and the
/// optional RF term.
pub struct AxialForce<'a> {
    stack: &'a ElectrodeStack,
    schedule: CompiledSchedule,
    q_over_m: f64,
    rf_force: Option<RfAxialForceModel>,
    volts: std::cell::RefCell<Vec<f64>>,
}

impl<'a> AxialForce<'a> {
    pub fn new(
        stack: &'a ElectrodeStack,
        schedule: &VoltageSchedule,
        ion: &IonSpecies,
        rf_force: Option<RfAxialForceModel>,
    ) -> Result<Self> {
        Ok(AxialForce {
            stack,
            schedule: schedule.compile(stack)?,
            q_over_m: ion.charge_to_mass(),
            rf_force,
            volts: std::cell::RefCell::new(vec![0.0; stack.len()]),
        })
    }

    pub fn acceleration(&self, z: f64, t: f64) -> f64 {
        let mut volts = self.volts.borrow_mut();
        self.schedule.fill(t, &mut volts);
        let mut e = self.stack.field_with(&volts, z);
        if let Some(rf) = &self.rf_force {
            let prog = self.schedule.rf();
            let level = prog.level(t);
            if level > 0.0 {
                e += rf.e0 * rf.profile(z) * prog.phase(t).sin() * level;
            }
        }
        self.q_over_m * e
    }

    /// Electrostatic potential at `(z, t)`, without the RF term.
    pub fn potential(&self, z: f64, t: f64) -> f64 {
        let mut volts = self.volts.borrow_mut();
        self.schedule.fill(t, &mut volts);
        self.stack.potential_with(&volts, z)
    }
}

/// Integrates from `(z_init, v_init)` at t = 0 until the pulse-off event, an
/// escape through either boundary, or `max_time`.
pub fn simulate(
    stack: &ElectrodeStack,
    schedule: &VoltageSchedule,
    ion: &IonSpecies,
    params: &SimParams,
) -> Result<Trajectory> {
    let stop = schedule.pulse_off_time();
    run(stack, schedule, ion, params, stop, StopRule::PulseOff)
}

fn run(
    stack: &ElectrodeStack,
    schedule: &VoltageSchedule,
    ion: &IonSpecies,
    params: &SimParams,
    stop_time: Option<f64>,
    rule: StopRule,
) -> Result<Trajectory> {
    if !(params.dt > 0.0) {
        return Err(Error::InvalidInput("time step must be positive".into()));
    }
    let decimation = params.decimation.max(1);
    let force = AxialForce::new(stack, schedule, ion, params.rf_force)?;
    let accel = |z: f64, t: f64| force.acceleration(z, t);

    let end = stop_time.map_or(params.max_time, |t| t.min(params.max_time));
    let mut state = IonState {
        t: 0.0,
        z: params.z_init,
        v: params.v_init,
    };
    let mut a = accel(state.z, state.t);
    let mut samples = vec![state];
    let mut extrema = Vec::new();
    let mut outer_turn_seen = false;
    let mut n = 0usize;
    let termination = loop {
        let remaining = end - state.t;
        if remaining <= params.dt * 1e-9 {
            break if stop_time.is_some_and(|s| s <= params.max_time) {
                Termination::PulseOff
            } else {
                Termination::MaxTime
            };
        }
        let h = params.dt.min(remaining);
        let (next, a_next) = verlet(state, a, &accel, h);
        if !next.is_finite() || !a_next.is_finite() {
            return Err(Error::NumericalBlowup { last_good: state });
        }
        n += 1;
        let kind = if state.v > 0.0 && next.v <= 0.0 {
            Some(ExtremumKind::Maximum)
        } else if state.v < 0.0 && next.v >= 0.0 {
            Some(ExtremumKind::Minimum)
        } else {
            None
        };
        let prev = state;
        state = next;
        a = a_next;
        if n.is_multiple_of(decimation) && h >= params.dt * (1.0 - 1e-6) {
            samples.push(state);
        }
        if let Some(kind) = kind {
            let (t, z) = hermite_extremum(&prev, &state);
            extrema.push(Extremum { kind, t, z });
            match kind {
                ExtremumKind::Maximum if z > params.flight_threshold => outer_turn_seen = true,
                ExtremumKind::Minimum if outer_turn_seen && rule == StopRule::Return => {
                    break Termination::Returned;
                }
                _ => {}
            }
        }
        if state.z > stack.max_z || state.z < stack.min_z {
            break Termination::Escaped;
        }
    };
    Ok(Trajectory {
        samples,
        terminal: state,
        termination,
        extrema,
        dt: params.dt,
        decimation,
    })
}

/// Position and time of the outermost turning point.
pub fn turning_point(traj: &Trajectory) -> Result<(f64, f64)> {
    traj.extrema
        .iter()
        .filter(|e| e.kind == ExtremumKind::Maximum)
        .max_by(|a, b| a.z.total_cmp(&b.z))
        .map(|e| (e.z, e.t))
        .ok_or(Error::NotReflected)
}

/// Time at which the ion comes back to rest after the outer turning point.
pub fn round_trip_time(traj: &Trajectory) -> Result<f64> {
    let (_, t_turn) = turning_point(traj)?;
    traj.extrema
        .iter()
        .find(|e| e.kind == ExtremumKind::Minimum && e.t > t_turn)
        .map(|e| e.t)
        .ok_or(Error::NotReflected)
}

/// Largest |v| over the recorded samples and terminal state.
pub fn peak_speed(traj: &Trajectory) -> f64 {
    traj.samples
        .iter()
        .chain(std::iter::once(&traj.terminal))
        .map(|s| s.v.abs())
        .fold(0.0, f64::max)
}

/// Summary of a flight with the extraction pulse held on.
#[derive(Debug, Clone, PartialEq)]
pub struct Flight {
    pub z_turn: f64,
    pub t_turn: f64,
    /// Round-trip time of flight: the return turning point.
    pub tof: f64,
    pub z_return: f64,
    pub peak_speed: f64,
    pub trajectory: Trajectory,
}

/// Flies the ion out and back with the pulse never switched off and reports
/// the turning point and round-trip time.
pub fn measure_flight(
    stack: &ElectrodeStack,
    schedule: &VoltageSchedule,
    ion: &IonSpecies,
    params: &SimParams,
) -> Result<Flight> {
    let held = schedule.with_pulse_held();
    let traj = run(stack, &held, ion, params, None, StopRule::Return)?;
    if traj.termination != Termination::Returned {
        return Err(Error::NotReflected);
    }
    let (z_turn, t_turn) = turning_point(&traj)?;
    let ret = traj
        .extrema
        .iter()
        .rev()
        .find(|e| e.kind == ExtremumKind::Minimum)
        .copied()
        .ok_or(Error::NotReflected)?;
    Ok(Flight {
        z_turn,
        t_turn,
        tof: ret.t,
        z_return: ret.z,
        peak_speed: peak_speed(&traj),
        trajectory: traj,
    })
}

/// Kinetic plus electrostatic energy in joules, using the voltages at `state.t`.
pub fn total_energy(force: &AxialForce<'_>, ion: &IonSpecies, state: &IonState) -> f64 {
    0.5 * ion.mass * state.v * state.v + ion.charge * force.potential(state.z, state.t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{FountainGeometry, VoltageMap};
    use crate::waveforms::{RfProgram, SwitchEvent};
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    #[test]
    fn free_drift() {
        let s = IonState {
            t: 0.0,
            z: 1e-3,
            v: 100.0,
        };
        let n = step(s, |_, _| 0.0, 2e-9).unwrap();
        assert_relative_eq!(n.z, 1e-3 + 200e-9, max_relative = 1e-14);
        assert_eq!(n.v, 100.0);
        assert_eq!(n.t, 2e-9);
    }

    #[test]
    fn uniform_field_is_exact() {
        let ca = IonSpecies::calcium40();
        let a = ca.charge_to_mass() * 1e4;
        assert_relative_eq!(a, 2.414e10, max_relative = 1e-3);
        let mut s = IonState::default();
        for _ in 0..500 {
            s = step(s, |_, _| a, 2e-9).unwrap();
        }
        let t = 1e-6;
        assert_relative_eq!(s.v, a * t, max_relative = 1e-12);
        assert_relative_eq!(s.z, 0.5 * a * t * t, max_relative = 1e-12);
        assert_relative_eq!(s.v, 2.414e4, max_relative = 1e-3);
        assert_relative_eq!(s.z, 1.207e-2, max_relative = 1e-3);
    }

    #[test]
    fn harmonic_period_energy() {
        let w = TAU * 147e3;
        let dt = 2e-9;
        let acc = |z: f64, _t: f64| -w * w * z;
        let energy = |s: &IonState| 0.5 * s.v * s.v + 0.5 * w * w * s.z * s.z;
        let s0 = IonState {
            t: 0.0,
            z: 0.0,
            v: 10.0,
        };
        let mut s = s0;
        let n = (TAU / w / dt).round() as usize;
        for _ in 0..n {
            s = step(s, acc, dt).unwrap();
        }
        assert!(((energy(&s) - energy(&s0)) / energy(&s0)).abs() < 1e-8);
        assert!((s.z - s0.z).abs() < 1e-3 * 10.0 / w);
    }

    #[test]
    fn blowup_reports_last_good_state() {
        let s = IonState {
            t: 0.0,
            z: 1.0,
            v: 0.0,
        };
        let err = step(s, |z, _| if z > 1.0 { f64::NAN } else { 1e20 }, 1e-6).unwrap_err();
        match err {
            Error::NumericalBlowup { last_good } => assert_eq!(last_good, s),
            e => panic!("unexpected {e:?}"),
        }
        assert!(step(s, |_, _| 0.0, 0.0).is_err());
    }

    fn trap_only() -> (crate::fields::ElectrodeStack, VoltageSchedule) {
        let stack = FountainGeometry::default().build().unwrap();
        let mut initial = VoltageMap::new();
        initial.insert("seg6".into(), -0.6);
        initial.insert("R".into(), 7.5);
        (stack, VoltageSchedule::new(initial, vec![], RfProgram::default()))
    }

    #[test]
    fn static_trap_keeps_ion_at_rest() {
        let (stack, sched) = trap_only();
        let ca = IonSpecies::calcium40();
        let params = SimParams {
            max_time: 5e-6,
            ..Default::default()
        };
        let traj = simulate(&stack, &sched, &ca, &params).unwrap();
        assert_eq!(traj.termination, Termination::MaxTime);
        // only the exponentially small tails of distant electrodes act here
        assert!(traj.samples.iter().all(|s| s.z.abs() < 1e-12 && s.v.abs() < 1e-9));
        assert_relative_eq!(traj.terminal.t, 5e-6, max_relative = 1e-12);
    }

    #[test]
    fn measured_trap_frequency() {
        let (stack, sched) = trap_only();
        let ca = IonSpecies::calcium40();
        let params = SimParams {
            z_init: 1e-6,
            max_time: 40e-6,
            ..Default::default()
        };
        let traj = simulate(&stack, &sched, &ca, &params).unwrap();
        let maxima: Vec<f64> = traj
            .extrema
            .iter()
            .filter(|e| e.kind == ExtremumKind::Maximum)
            .map(|e| e.t)
            .collect();
        assert!(maxima.len() >= 4);
        let period = (maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64;
        let f = 1.0 / period;
        assert!((f / 147e3 - 1.0).abs() < 5e-3, "f = {f}");
    }

    #[test]
    fn smooth_static_energy_conservation() {
        let (stack, sched) = trap_only();
        let ca = IonSpecies::calcium40();
        let force = AxialForce::new(&stack, &sched, &ca, None).unwrap();
        let mut s = IonState {
            t: 0.0,
            z: 0.0,
            v: 20.0,
        };
        let e0 = total_energy(&force, &ca, &s);
        let mut max_ke: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for _ in 0..5000 {
            s = step(s, |z, t| force.acceleration(z, t), 2e-9).unwrap();
            max_ke = max_ke.max(0.5 * ca.mass * s.v * s.v);
            worst = worst.max((total_energy(&force, &ca, &s) - e0).abs());
        }
        assert!(worst / max_ke < 1e-6, "relative drift {}", worst / max_ke);
    }

    #[test]
    fn turning_point_of_harmonic_launch() {
        let (stack, sched) = trap_only();
        let ca = IonSpecies::calcium40();
        let v0 = 2.0;
        let params = SimParams {
            v_init: v0,
            max_time: 3e-6,
            ..Default::default()
        };
        let traj = simulate(&stack, &sched, &ca, &params).unwrap();
        let (z_turn, t_turn) = turning_point(&traj).unwrap();
        let w = TAU * 147e3;
        assert_relative_eq!(z_turn, v0 / w, max_relative = 1e-3);
        assert_relative_eq!(t_turn, 0.25 * TAU / w, max_relative = 1e-3);
    }

    #[test]
    fn escaping_ion_is_not_reflected() {
        let stack = FountainGeometry::default().build().unwrap();
        let sched = VoltageSchedule::new(VoltageMap::new(), vec![], RfProgram::default());
        let ca = IonSpecies::calcium40();
        let params = SimParams {
            v_init: 3e4,
            ..Default::default()
        };
        let traj = simulate(&stack, &sched, &ca, &params).unwrap();
        assert_eq!(traj.termination, Termination::Escaped);
        assert!(matches!(turning_point(&traj), Err(Error::NotReflected)));
        assert_relative_eq!(peak_speed(&traj), 3e4, max_relative = 1e-12);
    }

    #[test]
    fn simulate_matches_repeated_steps() {
        let (stack, mut sched) = trap_only();
        sched.events.push(SwitchEvent::new(0.0, "E1", -20.0));
        let ca = IonSpecies::calcium40();
        let params = SimParams {
            max_time: 1e-6,
            decimation: 1,
            ..Default::default()
        };
        let traj = simulate(&stack, &sched, &ca, &params).unwrap();
        let force = AxialForce::new(&stack, &sched, &ca, None).unwrap();
        let mut s = IonState::default();
        for _ in 0..500 {
            s = step(s, |z, t| force.acceleration(z, t), 2e-9).unwrap();
        }
        assert_eq!(traj.samples.len(), 501);
        assert_relative_eq!(traj.terminal.z, s.z, max_relative = 1e-12);
        assert_relative_eq!(traj.terminal.v, s.v, max_relative = 1e-12);
    }

    #[test]
    fn trajectory_csv_header() {
        let (stack, sched) = trap_only();
        let ca = IonSpecies::calcium40();
        let params = SimParams {
            max_time: 100e-9,
            ..Default::default()
        };
        let traj = simulate(&stack, &sched, &ca, &params).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_s,z_m,v_mps\n"));
        assert_eq!(text.lines().count(), 1 + traj.samples.len());
    }
}
