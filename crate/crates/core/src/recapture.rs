//! Recapture test at pulse-off and residual motional energy.

use crate::dynamics::{IonSpecies, IonState, Termination};
use crate::error::{Error, Result};
use crate::units::HBAR;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CriterionMode {
    /// Closed position and speed bounds on the state at pulse-off.
    #[default]
    Bounds,
    /// Residual energy in the harmonic trap below a fixed depth (J).
    TrapDepth { depth: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecaptureCriterion {
    pub max_distance: f64,
    pub max_speed: f64,
    pub mode: CriterionMode,
}

impl Default for RecaptureCriterion {
    fn default() -> Self {
        RecaptureCriterion {
            max_distance: 100e-6,
            max_speed: 50.0,
            mode: CriterionMode::Bounds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Recaptured,
    Lost,
}

impl Verdict {
    pub fn is_recaptured(self) -> bool {
        self == Verdict::Recaptured
    }
}

/// Applies the position and speed bounds (both inclusive) relative to the
/// trap centre at z = 0.
pub fn classify(state: &IonState, criterion: &RecaptureCriterion) -> Verdict {
    if state.z.abs() <= criterion.max_distance && state.v.abs() <= criterion.max_speed {
        Verdict::Recaptured
    } else {
        Verdict::Lost
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualEnergy {
    pub joules: f64,
    /// Motional quanta, E / (ħ ω_z).
    pub quanta: f64,
}

/// Energy left in the harmonic trap: `½ m v² + ½ m ω_z² z²`.
pub fn residual_energy(state: &IonState, ion: &IonSpecies, omega_z: f64) -> Result<ResidualEnergy> {
    if !(omega_z > 0.0) {
        return Err(Error::InvalidInput(format!("trap frequency must be positive, got {omega_z}")));
    }
    let joules = 0.5 * ion.mass * (state.v * state.v + omega_z * omega_z * state.z * state.z);
    Ok(ResidualEnergy {
        joules,
        quanta: joules / (HBAR * omega_z),
    })
}

/// Verdict and residual energy of one trajectory end state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub verdict: Verdict,
    pub terminal: IonState,
    pub termination: Termination,
    pub residual: ResidualEnergy,
}

impl Outcome {
    /// Only an ion that was still inside the stack when the pulse ended can be
    /// recaptured.
    pub fn assess(
        terminal: IonState,
        termination: Termination,
        criterion: &RecaptureCriterion,
        ion: &IonSpecies,
        omega_z: f64,
    ) -> Result<Self> {
        let residual = residual_energy(&terminal, ion, omega_z)?;
        let inside = match criterion.mode {
            CriterionMode::Bounds => classify(&terminal, criterion).is_recaptured(),
            CriterionMode::TrapDepth { depth } => residual.joules < depth,
        };
        let verdict = if inside && termination == Termination::PulseOff {
            Verdict::Recaptured
        } else {
            Verdict::Lost
        };
        Ok(Outcome {
            verdict,
            terminal,
            termination,
            residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn state(z: f64, v: f64) -> IonState {
        IonState { t: 6.3e-6, z, v }
    }

    #[test]
    fn bounds_are_closed() {
        let c = RecaptureCriterion::default();
        assert_eq!(classify(&state(50e-6, 20.0), &c), Verdict::Recaptured);
        assert_eq!(classify(&state(150e-6, 0.0), &c), Verdict::Lost);
        assert_eq!(classify(&state(100e-6, 50.0), &c), Verdict::Recaptured);
        assert_eq!(classify(&state(-100e-6, -50.0), &c), Verdict::Recaptured);
        assert_eq!(classify(&state(0.0, 50.0000001), &c), Verdict::Lost);
    }

    #[test]
    fn residual_energy_oracle() {
        let ca = IonSpecies::calcium40();
        let w = TAU * 147e3;
        let r = residual_energy(&state(50e-6, 20.0), &ca, w).unwrap();
        let expected = 0.5 * ca.mass * (400.0 + w * w * 2.5e-9);
        assert_relative_eq!(r.joules, expected, max_relative = 1e-12);
        assert_relative_eq!(r.joules, 8.30e-23, max_relative = 5e-3);
        assert_relative_eq!(r.quanta, expected / (HBAR * w), max_relative = 1e-12);

        let edge = residual_energy(&state(100e-6, 50.0), &ca, w).unwrap();
        assert_relative_eq!(edge.joules, 2.83e-22, max_relative = 5e-3);
        assert!(residual_energy(&state(0.0, 0.0), &ca, 0.0).is_err());
    }

    #[test]
    fn escaped_ion_is_lost_even_inside_bounds() {
        let ca = IonSpecies::calcium40();
        let c = RecaptureCriterion::default();
        let o = Outcome::assess(state(0.0, 0.0), Termination::Escaped, &c, &ca, 1e6).unwrap();
        assert_eq!(o.verdict, Verdict::Lost);
        let o = Outcome::assess(state(0.0, 0.0), Termination::PulseOff, &c, &ca, 1e6).unwrap();
        assert_eq!(o.verdict, Verdict::Recaptured);
    }

    #[test]
    fn trap_depth_mode() {
        let ca = IonSpecies::calcium40();
        let w = TAU * 147e3;
        let c = RecaptureCriterion {
            mode: CriterionMode::TrapDepth { depth: 1e-22 },
            ..Default::default()
        };
        let ok = Outcome::assess(state(50e-6, 20.0), Termination::PulseOff, &c, &ca, w).unwrap();
        assert!(ok.verdict.is_recaptured());
        let far = Outcome::assess(state(100e-6, 50.0), Termination::PulseOff, &c, &ca, w).unwrap();
        assert!(!far.verdict.is_recaptured());
    }
}
