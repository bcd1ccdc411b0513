//! Paraxial model of the radial motion: drifts, thin lenses and steering
//! deflectors, traced out to the reflector and back to the endcap aperture.
//!
//! The round trip is unfolded: the path length `s` keeps increasing after the
//! turning point and the reflector acts as a thin lens there.

use std::io::Write;

use rayon::prelude::*;

use crate::dynamics::{Flight, IonSpecies};
use crate::error::{Error, Result};
use crate::units::ELEMENTARY_CHARGE;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ray {
    pub x: f64,
    pub xp: f64,
    pub y: f64,
    pub yp: f64,
    pub s: f64,
}

impl Ray {
    pub fn new(x: f64, xp: f64, y: f64, yp: f64) -> Self {
        Ray { x, xp, y, yp, s: 0.0 }
    }
}

/// One pair of opposing steering plates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectorPair {
    /// Plate separation d in m.
    pub separation: f64,
    /// Plate length ℓ in m.
    pub length: f64,
    pub u_plus: f64,
    pub u_minus: f64,
}

/// Slope change `(U₊ − U₋)·ℓ / (2·d·K)` for an ion of kinetic energy `k_ev` (eV).
pub fn deflection(pair: &DeflectorPair, k_ev: f64) -> Result<f64> {
    if !(k_ev > 0.0) {
        return Err(Error::InvalidEnergy(k_ev));
    }
    Ok((pair.u_plus - pair.u_minus) * pair.length / (2.0 * pair.separation * k_ev))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransverseElement {
    Drift { length: f64 },
    ThinLens { focal_length: f64 },
    Deflector {
        x: DeflectorPair,
        y: DeflectorPair,
        kinetic_energy_ev: f64,
    },
}

/// Applies `elements` in order; x and y are independent.
pub fn trace(ray: Ray, elements: &[TransverseElement]) -> Result<Ray> {
    let mut r = ray;
    for e in elements {
        match *e {
            TransverseElement::Drift { length } => {
                r.x += length * r.xp;
                r.y += length * r.yp;
                r.s += length;
            }
            TransverseElement::ThinLens { focal_length } => {
                r.xp -= r.x / focal_length;
                r.yp -= r.y / focal_length;
            }
            TransverseElement::Deflector {
                x,
                y,
                kinetic_energy_ev,
            } => {
                r.xp += deflection(&x, kinetic_energy_ev)?;
                r.yp += deflection(&y, kinetic_energy_ev)?;
            }
        }
    }
    Ok(r)
}

/// Geometry and calibration of the steering/reflection optics.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsConfig {
    /// Endcap aperture radius.
    pub aperture_radius: f64,
    /// Aperture to steering-module centre.
    pub deflector_distance: f64,
    /// Aperture to the turning point.
    pub turn_distance: f64,
    pub plate_length: f64,
    pub plate_separation: f64,
    /// Ion axial kinetic energy at the steering module, eV.
    pub kinetic_energy_ev: f64,
    /// Common reflector voltage U_R on all steering electrodes.
    pub reflector_voltage: f64,
    /// Lens power per volt of U_R, 1/(m·V).
    pub kappa: f64,
    /// Launch offset from micromotion compensation.
    pub launch: Ray,
    /// Half-angle of the launch bundle around the launch slope.
    pub bundle_half_angle: f64,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        let mut c = OpticsConfig {
            aperture_radius: 200e-6,
            deflector_distance: 46.55e-3,
            turn_distance: 53.55e-3,
            plate_length: 7e-3,
            plate_separation: 12.2e-3,
            kinetic_energy_ev: 194.0,
            reflector_voltage: 7.5,
            kappa: 0.0,
            launch: Ray::new(30e-6, 0.5e-3, 0.0, 0.0),
            bundle_half_angle: 2e-3,
        };
        c.calibrate_retroreflection();
        c
    }
}

impl OpticsConfig {
    /// Takes the turning distance and the kinetic energy at the steering module
    /// from an axial flight; `aperture_z` is the endcap position.
    pub fn from_flight(flight: &Flight, ion: &IonSpecies, aperture_z: f64, deflector_z: f64) -> Result<Self> {
        let outbound = flight
            .trajectory
            .samples
            .windows(2)
            .find(|w| w[0].z <= deflector_z && w[1].z > deflector_z && w[1].v > 0.0)
            .ok_or_else(|| Error::InvalidInput("flight does not pass the steering module".into()))?;
        let (a, b) = (outbound[0], outbound[1]);
        let v = a.v + (b.v - a.v) * (deflector_z - a.z) / (b.z - a.z);
        let k_ev = 0.5 * ion.mass * v * v / ELEMENTARY_CHARGE;
        let mut c = OpticsConfig {
            deflector_distance: deflector_z - aperture_z,
            turn_distance: flight.z_turn - aperture_z,
            kinetic_energy_ev: k_ev,
            ..Default::default()
        };
        c.calibrate_retroreflection();
        Ok(c)
    }

    /// Sets κ so that the round trip images the aperture onto itself at the
    /// current U_R (reflector focal length L/2).
    pub fn calibrate_retroreflection(&mut self) {
        self.kappa = 2.0 / (self.turn_distance * self.reflector_voltage);
    }

    pub fn focal_length(&self) -> f64 {
        1.0 / (self.kappa * self.reflector_voltage)
    }

    /// Scales the reflector lens power by `factor`.
    pub fn detuned(&self, factor: f64) -> Self {
        let mut c = self.clone();
        c.kappa *= factor;
        c
    }

    fn pair(&self, offset: f64) -> DeflectorPair {
        DeflectorPair {
            separation: self.plate_separation,
            length: self.plate_length,
            u_plus: self.reflector_voltage + offset,
            u_minus: self.reflector_voltage - offset,
        }
    }

    /// Unfolded element list for steering offsets (U₊ − U_R) in x and y.
    pub fn round_trip(&self, ux: f64, uy: f64) -> Vec<TransverseElement> {
        let defl = TransverseElement::Deflector {
            x: self.pair(ux),
            y: self.pair(uy),
            kinetic_energy_ev: self.kinetic_energy_ev,
        };
        let d1 = self.deflector_distance;
        let d2 = self.turn_distance - d1;
        vec![
            TransverseElement::Drift { length: d1 },
            defl,
            TransverseElement::Drift { length: d2 },
            TransverseElement::ThinLens {
                focal_length: self.focal_length(),
            },
            TransverseElement::Drift { length: d2 },
            defl,
            TransverseElement::Drift { length: d1 },
        ]
    }

    /// Returned rays for the launch bundle (3 × 3 slopes).
    pub fn return_rays(&self, ux: f64, uy: f64) -> Result<Vec<Ray>> {
        let elements = self.round_trip(ux, uy);
        let th = self.bundle_half_angle;
        let mut out = Vec::with_capacity(9);
        for dx in [-th, 0.0, th] {
            for dy in [-th, 0.0, th] {
                let mut r = self.launch;
                r.xp += dx;
                r.yp += dy;
                out.push(trace(r, &elements)?);
            }
        }
        Ok(out)
    }

    pub fn accepts(&self, ux: f64, uy: f64) -> Result<bool> {
        let r = self.aperture_radius;
        Ok(self
            .return_rays(ux, uy)?
            .iter()
            .all(|ray| ray.x.abs() <= r && ray.y.abs() <= r))
    }
}

/// Regular grid of steering offsets in volts.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetGrid {
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl OffsetGrid {
    /// Symmetric grid `−half..=half` with `n` points per axis.
    pub fn square(half: f64, n: usize) -> Self {
        let values: Vec<f64> = if n <= 1 {
            vec![0.0]
        } else {
            (0..n)
                .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
                .collect()
        };
        OffsetGrid {
            ux: values.clone(),
            uy: values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceMap {
    pub grid: OffsetGrid,
    /// `success[i][j]` for `ux[i]`, `uy[j]`.
    pub success: Vec<Vec<bool>>,
}

impl AcceptanceMap {
    pub fn count(&self) -> usize {
        self.success.iter().flatten().filter(|&&s| s).count()
    }

    /// Successful area in V² (cell count times cell area).
    pub fn area(&self) -> f64 {
        let step = |v: &[f64]| if v.len() > 1 { v[1] - v[0] } else { 1.0 };
        self.count() as f64 * step(&self.grid.ux) * step(&self.grid.uy)
    }

    /// Number of 4-connected success regions.
    pub fn regions(&self) -> usize {
        let (nx, ny) = (self.grid.ux.len(), self.grid.uy.len());
        let mut seen = vec![vec![false; ny]; nx];
        let mut regions = 0;
        for i in 0..nx {
            for j in 0..ny {
                if !self.success[i][j] || seen[i][j] {
                    continue;
                }
                regions += 1;
                let mut stack = vec![(i, j)];
                seen[i][j] = true;
                while let Some((a, b)) = stack.pop() {
                    let mut visit = |p: usize, q: usize| {
                        if self.success[p][q] && !seen[p][q] {
                            seen[p][q] = true;
                            stack.push((p, q));
                        }
                    };
                    if a > 0 {
                        visit(a - 1, b);
                    }
                    if a + 1 < nx {
                        visit(a + 1, b);
                    }
                    if b > 0 {
                        visit(a, b - 1);
                    }
                    if b + 1 < ny {
                        visit(a, b + 1);
                    }
                }
            }
        }
        regions
    }

    /// `ux_v,uy_v,success` rows.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "ux_v,uy_v,success")?;
        for (i, ux) in self.grid.ux.iter().enumerate() {
            for (j, uy) in self.grid.uy.iter().enumerate() {
                writeln!(w, "{ux},{uy},{}", self.success[i][j] as u8)?;
            }
        }
        Ok(())
    }
}

pub fn acceptance_map(grid: &OffsetGrid, optics: &OpticsConfig) -> Result<AcceptanceMap> {
    if grid.ux.is_empty() || grid.uy.is_empty() {
        return Err(Error::InvalidInput("acceptance grid is empty".into()));
    }
    let success = grid
        .ux
        .par_iter()
        .map(|&ux| {
            grid.uy
                .iter()
                .map(|&uy| optics.accepts(ux, uy))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AcceptanceMap {
        grid: grid.clone(),
        success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair(du: f64) -> DeflectorPair {
        DeflectorPair {
            separation: 12.2e-3,
            length: 7e-3,
            u_plus: 7.5 + du / 2.0,
            u_minus: 7.5 - du / 2.0,
        }
    }

    #[test]
    fn deflection_examples() {
        assert_eq!(deflection(&pair(0.0), 190.0).unwrap(), 0.0);
        let d = deflection(&pair(0.2), 190.0).unwrap();
        assert_relative_eq!(d, 0.2 * 0.007 / (2.0 * 0.0122 * 190.0), max_relative = 1e-12);
        assert_relative_eq!(d, 3.02e-4, max_relative = 1e-3);
        assert_relative_eq!(deflection(&pair(0.4), 190.0).unwrap(), 2.0 * d, max_relative = 1e-12);
        assert!(matches!(deflection(&pair(0.2), 0.0), Err(Error::InvalidEnergy(_))));
    }

    #[test]
    fn drift_and_focus() {
        let r = trace(Ray::new(1e-3, 2e-3, 0.0, 0.0), &[TransverseElement::Drift { length: 0.5 }]).unwrap();
        assert_relative_eq!(r.x, 2e-3, max_relative = 1e-12);
        assert_eq!(r.xp, 2e-3);
        let f = 0.1;
        let r = trace(
            Ray::new(1e-3, 0.0, -2e-3, 0.0),
            &[
                TransverseElement::ThinLens { focal_length: f },
                TransverseElement::Drift { length: f },
            ],
        )
        .unwrap();
        assert!(r.x.abs() < 1e-15 && r.y.abs() < 1e-15);
        assert_relative_eq!(r.xp, -1e-3 / f, max_relative = 1e-12);
    }

    #[test]
    fn calibrated_round_trip_is_retroreflecting() {
        let c = OpticsConfig {
            bundle_half_angle: 0.0,
            ..Default::default()
        };
        let elements = c.round_trip(0.0, 0.0);
        let l = c.turn_distance;
        for (x0, xp0) in [(30e-6, 0.0), (30e-6, 1e-3), (-50e-6, -2e-3)] {
            let r = trace(Ray::new(x0, xp0, 0.0, 0.0), &elements).unwrap();
            assert_relative_eq!(r.x, -x0, epsilon = 1e-12);
            assert_relative_eq!(r.xp, -2.0 * x0 / l - xp0, epsilon = 1e-12);
            assert_relative_eq!(r.s, 2.0 * l, max_relative = 1e-12);
        }
    }

    #[test]
    fn aligned_map_is_centred_and_symmetric() {
        let c = OpticsConfig {
            launch: Ray::default(),
            ..Default::default()
        };
        let grid = OffsetGrid::square(1.2, 41);
        let m = acceptance_map(&grid, &c).unwrap();
        assert!(m.success[20][20]);
        assert!(!m.success[0][0]);
        let n = grid.ux.len();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(m.success[i][j], m.success[n - 1 - i][n - 1 - j]);
            }
        }
        assert_eq!(m.regions(), 1);
    }

    #[test]
    fn detuned_lens_shrinks_acceptance() {
        let c = OpticsConfig::default();
        let grid = OffsetGrid::square(1.2, 97);
        let tuned = acceptance_map(&grid, &c).unwrap();
        let detuned = acceptance_map(&grid, &c.detuned(0.97)).unwrap();
        assert_eq!(tuned.regions(), 1);
        assert!(tuned.area() > detuned.area());
        let scan: Vec<f64> = [0.94, 0.97, 1.0, 1.03, 1.06]
            .iter()
            .map(|&k| acceptance_map(&grid, &c.detuned(k)).unwrap().area())
            .collect();
        assert!(scan[2] > scan[1] && scan[2] > scan[3] && scan[1] > scan[0] && scan[3] > scan[4]);
    }

    proptest! {
        #[test]
        fn deflection_is_odd(du in -5.0f64..5.0, k in 1.0f64..1000.0) {
            let a = deflection(&pair(du), k).unwrap();
            let b = deflection(&pair(-du), k).unwrap();
            prop_assert!((a + b).abs() < 1e-15);
        }

        #[test]
        fn planes_decouple(x in -1e-3f64..1e-3, xp in -1e-2f64..1e-2, y in -1e-3f64..1e-3, yp in -1e-2f64..1e-2) {
            let c = OpticsConfig::default();
            let e = c.round_trip(0.1, -0.2);
            let full = trace(Ray::new(x, xp, y, yp), &e).unwrap();
            let only_x = trace(Ray::new(x, xp, 0.0, 0.0), &e).unwrap();
            let only_y = trace(Ray::new(0.0, 0.0, y, yp), &e).unwrap();
            prop_assert!((full.x - only_x.x).abs() < 1e-15);
            prop_assert!((full.y - only_y.y).abs() < 1e-15);
        }
    }
}
