use rayon::prelude::*;

use crate::dynamics::RfAxialForceModel;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationTargets {
    pub z_turn: f64,
    pub tof: f64,
    pub tol_z: f64,
    pub tol_t: f64,
    pub max_iterations: usize,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        CalibrationTargets {
            z_turn: 55e-3,
            tof: 6.3e-6,
            tol_z: 10e-6,
            tol_t: 1e-9,
            max_iterations: 100,
        }
    }
}

/// Reflector transition parameters and the flight they produce.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectorCalibration {
    pub center: f64,
    pub width: f64,
    pub z_turn: f64,
    pub tof: f64,
    pub residual_z: f64,
    pub residual_t: f64,
    /// Flight evaluations used, including finite-difference probes.
    pub evaluations: usize,
    pub iterations: usize,
}

impl ReflectorCalibration {
    pub fn apply(&self, s: &mut Scenario) -> Result<()> {
        s.stack.set_reflector_transition(self.center, self.width)
    }

    pub fn within(&self, targets: &CalibrationTargets) -> bool {
        self.residual_z.abs() < targets.tol_z && self.residual_t.abs() < targets.tol_t
    }
}

const MIN_WIDTH: f64 = 0.2e-3;
// residuals are compared in these units so both components weigh alike
const Z_UNIT: f64 = 1e-3;
const T_UNIT: f64 = 0.1e-6;

struct Fit<'a> {
    base: &'a Scenario,
    targets: &'a CalibrationTargets,
    evaluations: usize,
    best: Option<ReflectorCalibration>,
}

impl Fit<'_> {
    fn eval(&mut self, x: [f64; 2]) -> Option<([f64; 2], ReflectorCalibration)> {
        let [center, width] = x;
        if width < MIN_WIDTH || center + 2.0 * width >= self.base.stack.max_z {
            return None;
        }
        let mut s = self.base.clone();
        s.stack.set_reflector_transition(center, width).ok()?;
        self.evaluations += 1;
        let flight = s.flight().ok()?;
        let cal = ReflectorCalibration {
            center,
            width,
            z_turn: flight.z_turn,
            tof: flight.tof,
            residual_z: flight.z_turn - self.targets.z_turn,
            residual_t: flight.tof - self.targets.tof,
            evaluations: self.evaluations,
            iterations: 0,
        };
        let r = [cal.residual_z / Z_UNIT, cal.residual_t / T_UNIT];
        if self.best.is_none_or(|b| norm(residual(&b)) > norm(r)) {
            self.best = Some(cal);
        }
        Some((r, cal))
    }

    fn jacobian(&mut self, x: [f64; 2], f: [f64; 2]) -> Option<[[f64; 2]; 2]> {
        let h = [0.05e-3, 0.02e-3];
        let mut j = [[0.0; 2]; 2];
        for (col, &hc) in h.iter().enumerate() {
            let mut xp = x;
            xp[col] += hc;
            let (fp, _) = self.eval(xp)?;
            for row in 0..2 {
                j[row][col] = (fp[row] - f[row]) / hc;
            }
        }
        Some(j)
    }
}

fn residual(c: &ReflectorCalibration) -> [f64; 2] {
    [c.residual_z / Z_UNIT, c.residual_t / T_UNIT]
}

fn norm(r: [f64; 2]) -> f64 {
    r[0].hypot(r[1])
}

fn solve(j: [[f64; 2]; 2], f: [f64; 2]) -> Option<[f64; 2]> {
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let scale = j.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if !(det.abs() > 1e-12 * scale * scale) {
        return None;
    }
    Some([
        -(j[1][1] * f[0] - j[0][1] * f[1]) / det,
        -(-j[1][0] * f[0] + j[0][0] * f[1]) / det,
    ])
}

/// Fits the reflector transition (center, width) so the held-pulse flight
/// turns at `targets.z_turn` and returns at `targets.tof`.
///
/// Newton steps with a finite-difference Jacobian, Broyden updates between
/// refreshes, and step halving whenever a step fails to reduce the residual.
pub fn calibrate_reflector(
    base: &Scenario,
    targets: &CalibrationTargets,
) -> Result<ReflectorCalibration> {
    let fail = |reason: String, best: Option<ReflectorCalibration>| Error::CalibrationFailed {
        reason,
        best: best.map(Box::new),
    };
    if targets.z_turn >= base.stack.max_z {
        return Err(fail(
            format!(
                "target turning point {:.1} mm lies beyond the stack end at {:.1} mm",
                targets.z_turn * 1e3,
                base.stack.max_z * 1e3
            ),
            None,
        ));
    }
    let (c0, w0) = base
        .stack
        .reflector_transition()
        .ok_or_else(|| Error::InvalidInput("stack has no reflector to calibrate".into()))?;
    let mut fit = Fit {
        base,
        targets,
        evaluations: 0,
        best: None,
    };
    let mut x = [c0, w0];
    let (mut f, mut cal) = fit
        .eval(x)
        .ok_or_else(|| fail("template flight is not reflected".into(), None))?;
    let mut jac: Option<[[f64; 2]; 2]> = None;
    for iteration in 0..=targets.max_iterations {
        cal.iterations = iteration;
        cal.evaluations = fit.evaluations;
        if cal.within(targets) {
            return Ok(cal);
        }
        if iteration == targets.max_iterations {
            break;
        }
        let fresh = jac.is_none();
        let j = match jac {
            Some(j) => j,
            None => fit
                .jacobian(x, f)
                .ok_or_else(|| fail("finite-difference probe failed".into(), fit.best))?,
        };
        let Some(mut dx) = solve(j, f) else {
            if fresh {
                return Err(Error::DegenerateCalibration(
                    "turning point and time of flight do not depend independently on the reflector".into(),
                ));
            }
            jac = None;
            continue;
        };
        // keep each step within a few millimetres
        let limit = [3e-3, 1e-3];
        let shrink = (dx[0].abs() / limit[0]).max(dx[1].abs() / limit[1]).max(1.0);
        dx = [dx[0] / shrink, dx[1] / shrink];
        let mut accepted = None;
        let mut lambda = 1.0;
        for _ in 0..8 {
            let xn = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Some((fnew, cnew)) = fit.eval(xn) {
                if norm(fnew) < norm(f) {
                    accepted = Some((xn, fnew, cnew));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xn, fnew, cnew)) => {
                let s = [xn[0] - x[0], xn[1] - x[1]];
                let y = [fnew[0] - f[0], fnew[1] - f[1]];
                let js = [j[0][0] * s[0] + j[0][1] * s[1], j[1][0] * s[0] + j[1][1] * s[1]];
                let ss = s[0] * s[0] + s[1] * s[1];
                let mut jn = j;
                for row in 0..2 {
                    for col in 0..2 {
                        jn[row][col] += (y[row] - js[row]) * s[col] / ss;
                    }
                }
                jac = Some(jn);
                x = xn;
                f = fnew;
                cal = cnew;
            }
            None if fresh => {
                return Err(fail("line search stalled".into(), fit.best));
            }
            None => jac = None,
        }
    }
    Err(fail(
        format!("no convergence after {} iterations", targets.max_iterations),
        fit.best,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfForceCalibration {
    pub e0: f64,
    /// ToF averaged over the sampled RF phases.
    pub mean_tof: f64,
    /// Peak-to-peak ToF over the sampled phases.
    pub tof_spread: f64,
}

/// ToF for each of `phases` equally spaced phase offsets t_off over one RF period.
pub fn tof_over_phases(base: &Scenario, e0: f64, phases: usize) -> Result<Vec<f64>> {
    let period = base.rf.period();
    (0..phases)
        .into_par_iter()
        .map(|k| {
            let mut s = base.clone();
            s.rf.t_off = k as f64 * period / phases as f64;
            s.sim.rf_force = Some(RfAxialForceModel {
                e0,
                ..s.sim.rf_force.unwrap_or_default()
            });
            s.flight().map(|f| f.tof)
        })
        .collect()
}

fn summarize(e0: f64, tofs: &[f64]) -> RfForceCalibration {
    let mean = tofs.iter().sum::<f64>() / tofs.len() as f64;
    let hi = tofs.iter().copied().fold(f64::MIN, f64::max);
    let lo = tofs.iter().copied().fold(f64::MAX, f64::min);
    RfForceCalibration {
        e0,
        mean_tof: mean,
        tof_spread: hi - lo,
    }
}

/// Bisects the axial RF field amplitude E₀ until the phase-averaged ToF
/// reaches `target_mean_tof` within `tol`.
pub fn calibrate_rf_force(
    base: &Scenario,
    target_mean_tof: f64,
    phases: usize,
    tol: f64,
) -> Result<RfForceCalibration> {
    if phases == 0 {
        return Err(Error::InvalidInput("need at least one RF phase".into()));
    }
    // a flight that is no longer reflected counts as overshooting
    let mean = |e0: f64| -> Result<Option<RfForceCalibration>> {
        match tof_over_phases(base, e0, phases) {
            Ok(t) => Ok(Some(summarize(e0, &t))),
            Err(Error::NotReflected) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let start = mean(0.0)?.ok_or(Error::NotReflected)?;
    if start.mean_tof >= target_mean_tof {
        return Err(Error::CalibrationFailed {
            reason: "ToF without RF force already exceeds the target".into(),
            best: None,
        });
    }
    let (mut lo, mut hi) = (0.0, 1e6);
    loop {
        match mean(hi)? {
            Some(c) if c.mean_tof < target_mean_tof => {
                lo = hi;
                hi *= 2.0;
                if hi > 1e10 {
                    return Err(Error::CalibrationFailed {
                        reason: "RF force cannot delay the return enough".into(),
                        best: None,
                    });
                }
            }
            _ => break,
        }
    }
    let mut best = start;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match mean(mid)? {
            Some(c) if c.mean_tof < target_mean_tof => {
                lo = mid;
                best = c;
            }
            Some(c) => {
                hi = mid;
                best = c;
            }
            None => hi = mid,
        }
        if (best.mean_tof - target_mean_tof).abs() < tol {
            return Ok(best);
        }
    }
    Err(Error::CalibrationFailed {
        reason: format!(
            "mean ToF stuck at {:.4} us (E0 = {:.3e} V/m)",
            best.mean_tof * 1e6,
            best.e0
        ),
        best: None,
    })
}
