//! Axial electrostatic potential as a linear superposition of unit potentials.
//!
//! Each electrode contributes `U_k · φ_k(z)` where `φ_k` is its potential on axis
//! per volt applied, with every other electrode grounded. The analytic families
//! stand in for field-solver output; [`ElectrodeModel::tabulated`] imports one.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dynamics::IonSpecies;
use crate::error::{Error, Result};

/// Electrode voltages keyed by electrode name.
pub type VoltageMap = BTreeMap<String, f64>;

/// Logistic step `½[1 + tanh(x)]` with its first two derivatives in `x`.
#[inline]
fn step(x: f64) -> (f64, f64, f64) {
    let t = x.tanh();
    let s = 0.5 * (1.0 + t);
    let d1 = 0.5 * (1.0 - t * t);
    let d2 = -t * (1.0 - t * t);
    (s, d1, d2)
}

/// Orientation of a step-like electrode: which side the plateau lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Facing {
    /// Plateau towards +z.
    Positive,
    /// Plateau towards −z.
    Negative,
}

impl Facing {
    fn sign(self) -> f64 {
        match self {
            Facing::Positive => 1.0,
            Facing::Negative => -1.0,
        }
    }
}

/// A tanh edge located at `position` with length scale `width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub position: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElectrodeModel {
    /// `A · exp(−(z−c)²/2w²)`: a trap segment. Curvature at the centre is `−A/w²`.
    GaussianSegment {
        center: f64,
        amplitude: f64,
        width: f64,
    },
    /// Pierced plate: `½[1 + tanh(s(z−c)/w)]` with `s` the facing sign. The plateau
    /// behind the plate optionally ends `plateau_end.position` further along with
    /// its own edge width.
    AperturePlate {
        center: f64,
        width: f64,
        facing: Facing,
        plateau_end: Option<Edge>,
    },
    /// Tube with an entrance and an exit edge, unit potential 1 inside.
    FlatTube { entrance: Edge, exit: Edge },
    /// Rising ramp `A · ½[1 + tanh((z−c)/w)]`, the merged steering electrodes.
    ReflectorRamp {
        center: f64,
        width: f64,
        amplitude: f64,
    },
    /// Field-solver export sampled on a grid, natural cubic spline in between,
    /// zero outside the table.
    Tabulated(Table),
}

impl ElectrodeModel {
    pub fn gaussian(center: f64, amplitude: f64, width: f64) -> Result<Self> {
        check_width("gaussian-segment width", width)?;
        check_amplitude(amplitude)?;
        Ok(ElectrodeModel::GaussianSegment {
            center,
            amplitude,
            width,
        })
    }

    pub fn aperture(
        center: f64,
        width: f64,
        facing: Facing,
        plateau_end: Option<Edge>,
    ) -> Result<Self> {
        check_width("aperture-plate width", width)?;
        if let Some(e) = plateau_end {
            check_width("aperture-plate plateau end width", e.width)?;
            if e.position <= 0.0 {
                return Err(Error::InvalidModel(
                    "aperture-plate plateau length must be positive".into(),
                ));
            }
        }
        Ok(ElectrodeModel::AperturePlate {
            center,
            width,
            facing,
            plateau_end,
        })
    }

    pub fn tube(entrance: Edge, exit: Edge) -> Result<Self> {
        check_width("flat-tube entrance width", entrance.width)?;
        check_width("flat-tube exit width", exit.width)?;
        if exit.position <= entrance.position {
            return Err(Error::InvalidModel(
                "flat-tube exit must lie beyond its entrance".into(),
            ));
        }
        Ok(ElectrodeModel::FlatTube { entrance, exit })
    }

    pub fn reflector(center: f64, width: f64, amplitude: f64) -> Result<Self> {
        check_width("reflector-ramp width", width)?;
        check_amplitude(amplitude)?;
        Ok(ElectrodeModel::ReflectorRamp {
            center,
            width,
            amplitude,
        })
    }

    pub fn tabulated(z: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        Table::new(z, phi).map(ElectrodeModel::Tabulated)
    }

    /// Reads a two-column CSV with header `z,phi` (z in metres).
    pub fn tabulated_from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::tabulated_from_csv_str(&text)
    }

    pub fn tabulated_from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().unwrap_or_default();
        if header.replace(' ', "") != "z,phi" {
            return Err(Error::InvalidModel(format!(
                "tabulated potential header must be `z,phi`, found `{header}`"
            )));
        }
        let mut z = Vec::new();
        let mut phi = Vec::new();
        for (i, line) in lines.enumerate() {
            let mut cols = line.split(',').map(str::trim);
            let parse = |c: Option<&str>| -> Result<f64> {
                c.and_then(|s| s.parse().ok()).ok_or_else(|| {
                    Error::InvalidModel(format!("bad tabulated row {}: `{line}`", i + 2))
                })
            };
            z.push(parse(cols.next())?);
            phi.push(parse(cols.next())?);
        }
        Self::tabulated(z, phi)
    }

    pub fn center_z(&self) -> f64 {
        match self {
            ElectrodeModel::GaussianSegment { center, .. }
            | ElectrodeModel::AperturePlate { center, .. }
            | ElectrodeModel::ReflectorRamp { center, .. } => *center,
            ElectrodeModel::FlatTube { entrance, exit } => 0.5 * (entrance.position + exit.position),
            ElectrodeModel::Tabulated(t) => 0.5 * (t.z[0] + t.z[t.z.len() - 1]),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ElectrodeModel::GaussianSegment { .. } => "gaussian-segment",
            ElectrodeModel::AperturePlate { .. } => "aperture-plate",
            ElectrodeModel::FlatTube { .. } => "flat-tube",
            ElectrodeModel::ReflectorRamp { .. } => "reflector-ramp",
            ElectrodeModel::Tabulated(_) => "tabulated",
        }
    }

    /// Unit potential and its first two derivatives at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        match *self {
            ElectrodeModel::GaussianSegment {
                center,
                amplitude,
                width,
            } => {
                let x = (z - center) / width;
                let g = amplitude * (-0.5 * x * x).exp();
                (g, -g * x / width, g * (x * x - 1.0) / (width * width))
            }
            ElectrodeModel::AperturePlate {
                center,
                width,
                facing,
                plateau_end,
            } => {
                let sgn = facing.sign();
                let u = sgn * (z - center);
                let (a, a1, a2) = step(u / width);
                let (a1, a2) = (a1 / width, a2 / (width * width));
                let (p, p1, p2) = match plateau_end {
                    None => (a, a1, a2),
                    Some(end) => {
                        let (b, b1, b2) = step((u - end.position) / end.width);
                        let (c, c1, c2) = (1.0 - b, -b1 / end.width, -b2 / (end.width * end.width));
                        (a * c, a1 * c + a * c1, a2 * c + 2.0 * a1 * c1 + a * c2)
                    }
                };
                (p, sgn * p1, p2)
            }
            ElectrodeModel::FlatTube { entrance, exit } => {
                let (a, a1, a2) = step((z - entrance.position) / entrance.width);
                let (a1, a2) = (a1 / entrance.width, a2 / (entrance.width * entrance.width));
                let (b, b1, b2) = step((z - exit.position) / exit.width);
                let (c, c1, c2) = (1.0 - b, -b1 / exit.width, -b2 / (exit.width * exit.width));
                (a * c, a1 * c + a * c1, a2 * c + 2.0 * a1 * c1 + a * c2)
            }
            ElectrodeModel::ReflectorRamp {
                center,
                width,
                amplitude,
            } => {
                let (s, s1, s2) = step((z - center) / width);
                (
                    amplitude * s,
                    amplitude * s1 / width,
                    amplitude * s2 / (width * width),
                )
            }
            ElectrodeModel::Tabulated(ref t) => t.eval(z),
        }
    }
}

fn check_width(what: &str, w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{what} must be > 0, got {w}")))
    }
}

fn check_amplitude(a: f64) -> Result<()> {
    if a.is_finite() && a.abs() <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "unit-potential amplitude must satisfy |A| <= 1, got {a}"
        )))
    }
}

/// Sampled unit potential with natural cubic spline coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    z: Vec<f64>,
    phi: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl Table {
    pub fn new(z: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if z.len() != phi.len() {
            return Err(Error::InvalidModel("z and phi lengths differ".into()));
        }
        if z.len() < 4 {
            return Err(Error::InvalidModel(format!(
                "tabulated model needs at least 4 samples, got {}",
                z.len()
            )));
        }
        if z.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidModel(
                "tabulated samples must be strictly increasing in z".into(),
            ));
        }
        if phi.iter().any(|p| !p.is_finite() || p.abs() > 1.0) {
            return Err(Error::InvalidModel(
                "tabulated unit potential must satisfy |phi| <= 1".into(),
            ));
        }
        let m = natural_spline_second_derivatives(&z, &phi);
        Ok(Table { z, phi, m })
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z.iter().copied().zip(self.phi.iter().copied())
    }

    fn eval(&self, z: f64) -> (f64, f64, f64) {
        let n = self.z.len();
        if z < self.z[0] || z > self.z[n - 1] {
            return (0.0, 0.0, 0.0);
        }
        let i = self.z.partition_point(|&zi| zi <= z).clamp(1, n - 1) - 1;
        let h = self.z[i + 1] - self.z[i];
        let a = (self.z[i + 1] - z) / h;
        let b = (z - self.z[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (y0, y1) = (self.phi[i], self.phi[i + 1]);
        let v = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let dd = a * m0 + b * m1;
        (v, d, dd)
    }
}

fn natural_spline_second_derivatives(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut m = vec![0.0; n];
    // Thomas algorithm on the interior equations.
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    for i in 1..n - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        let a = h0 / 6.0;
        let b = (h0 + h1) / 3.0;
        let c = h1 / 6.0;
        let d = (y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0;
        let denom = b - a * c_prime[i - 1];
        c_prime[i] = c / denom;
        d_prime[i] = (d - a * d_prime[i - 1]) / denom;
    }
    for i in (1..n - 1).rev() {
        m[i] = d_prime[i] - c_prime[i] * m[i + 1];
    }
    m
}

/// `φ(z)` for a single electrode model.
pub fn unit_potential(model: &ElectrodeModel, z: f64) -> f64 {
    model.eval(z).0
}

#[derive(Debug, Clone, PartialEq)]
pub struct Electrode {
    pub name: String,
    pub model: ElectrodeModel,
}

/// Names of the reflector ramp and the tube whose exit edge tracks it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectorLink {
    pub ramp: String,
    pub shield: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeStack {
    electrodes: Vec<Electrode>,
    pub trap_center_z: f64,
    /// Escape boundary behind the reflector.
    pub max_z: f64,
    /// Escape boundary behind the far endcap.
    pub min_z: f64,
    pub reflector: Option<ReflectorLink>,
    /// Endcaps bracketing the trap centre, used for validation.
    pub endcaps: Option<(String, String)>,
}

impl ElectrodeStack {
    pub fn new(electrodes: Vec<Electrode>, max_z: f64, min_z: f64) -> Result<Self> {
        let stack = ElectrodeStack {
            electrodes,
            trap_center_z: 0.0,
            max_z,
            min_z,
            reflector: None,
            endcaps: None,
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, e) in self.electrodes.iter().enumerate() {
            if self.electrodes[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::Config(format!("duplicate electrode name `{}`", e.name)));
            }
        }
        if !(self.min_z < self.trap_center_z && self.trap_center_z < self.max_z) {
            return Err(Error::Config(
                "escape boundaries must bracket the trap centre".into(),
            ));
        }
        if let Some((a, b)) = &self.endcaps {
            let za = self.model(a)?.center_z();
            let zb = self.model(b)?.center_z();
            let (lo, hi) = if za < zb { (za, zb) } else { (zb, za) };
            if !(lo < self.trap_center_z && self.trap_center_z < hi) {
                return Err(Error::Config(format!(
                    "trap centre must lie strictly between endcaps `{a}` and `{b}`"
                )));
            }
        }
        if let Some(link) = &self.reflector {
            match &self.model(&link.ramp)? {
                ElectrodeModel::ReflectorRamp { .. } => {}
                other => {
                    return Err(Error::Config(format!(
                        "reflector `{}` must be a reflector-ramp, found {}",
                        link.ramp,
                        other.kind_name()
                    )))
                }
            }
            if let Some(s) = &link.shield {
                if !matches!(self.model(s)?, ElectrodeModel::FlatTube { .. }) {
                    return Err(Error::Config(format!(
                        "reflector shield `{s}` must be a flat-tube"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.electrodes
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| Error::UnknownElectrode(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.electrodes.iter().any(|e| e.name == name)
    }

    pub fn model(&self, name: &str) -> Result<&ElectrodeModel> {
        Ok(&self.electrodes[self.index_of(name)?].model)
    }

    /// Replaces (or appends) an electrode.
    pub fn upsert(&mut self, name: &str, model: ElectrodeModel) {
        match self.electrodes.iter_mut().find(|e| e.name == name) {
            Some(e) => e.model = model,
            None => self.electrodes.push(Electrode {
                name: name.to_string(),
                model,
            }),
        }
    }

    /// Current reflector transition `(center, width)`.
    pub fn reflector_transition(&self) -> Option<(f64, f64)> {
        let link = self.reflector.as_ref()?;
        match self.model(&link.ramp).ok()? {
            ElectrodeModel::ReflectorRamp { center, width, .. } => Some((*center, *width)),
            _ => None,
        }
    }

    /// Moves the reflector ramp and, when linked, the shield tube's exit edge.
    pub fn set_reflector_transition(&mut self, center: f64, width: f64) -> Result<()> {
        let link = self
            .reflector
            .clone()
            .ok_or_else(|| Error::Config("stack has no reflector ramp".into()))?;
        let amplitude = match self.model(&link.ramp)? {
            ElectrodeModel::ReflectorRamp { amplitude, .. } => *amplitude,
            _ => unreachable!("validated"),
        };
        self.upsert(&link.ramp, ElectrodeModel::reflector(center, width, amplitude)?);
        if let Some(shield) = &link.shield {
            if let ElectrodeModel::FlatTube { entrance, .. } = self.model(shield)?.clone() {
                let exit = Edge {
                    position: center,
                    width,
                };
                self.upsert(shield, ElectrodeModel::tube(entrance, exit)?);
            }
        }
        Ok(())
    }

    /// Dense voltage vector in electrode order.
    pub fn voltage_vector(&self, voltages: &VoltageMap) -> Result<Vec<f64>> {
        let mut v = vec![0.0; self.electrodes.len()];
        for (name, &u) in voltages {
            v[self.index_of(name)?] = u;
        }
        Ok(v)
    }

    /// `Φ(z)` from a dense voltage vector.
    pub fn potential_with(&self, volts: &[f64], z: f64) -> f64 {
        self.electrodes
            .iter()
            .zip(volts)
            .filter(|(_, &u)| u != 0.0)
            .map(|(e, &u)| u * e.model.eval(z).0)
            .sum()
    }

    /// `E_z(z) = −dΦ/dz` from a dense voltage vector.
    pub fn field_with(&self, volts: &[f64], z: f64) -> f64 {
        -self
            .electrodes
            .iter()
            .zip(volts)
            .filter(|(_, &u)| u != 0.0)
            .map(|(e, &u)| u * e.model.eval(z).1)
            .sum::<f64>()
    }

    /// `d²Φ/dz²` from a dense voltage vector.
    pub fn curvature_with(&self, volts: &[f64], z: f64) -> f64 {
        self.electrodes
            .iter()
            .zip(volts)
            .filter(|(_, &u)| u != 0.0)
            .map(|(e, &u)| u * e.model.eval(z).2)
            .sum()
    }
}

/// `Φ(z) = Σ_k U_k φ_k(z)` in volts.
pub fn total_potential(stack: &ElectrodeStack, voltages: &VoltageMap, z: f64) -> Result<f64> {
    Ok(stack.potential_with(&stack.voltage_vector(voltages)?, z))
}

/// `E_z = −dΦ/dz` in V/m.
pub fn axial_field(stack: &ElectrodeStack, voltages: &VoltageMap, z: f64) -> Result<f64> {
    Ok(stack.field_with(&stack.voltage_vector(voltages)?, z))
}

/// `d²Φ/dz²` in V/m².
pub fn potential_curvature(stack: &ElectrodeStack, voltages: &VoltageMap, z: f64) -> Result<f64> {
    Ok(stack.curvature_with(&stack.voltage_vector(voltages)?, z))
}

/// Unit-potential curvature `κ₂ = m ω_z² / (q |U_seg|)` that a single segment
/// must provide for the requested axial frequency.
pub fn calibrate_segment_curvature(ion: &IonSpecies, omega_z: f64, u_seg: f64) -> Result<f64> {
    if u_seg == 0.0 || !u_seg.is_finite() {
        return Err(Error::DegenerateCalibration(
            "segment voltage must be non-zero".into(),
        ));
    }
    if !(omega_z > 0.0) {
        return Err(Error::DegenerateCalibration(
            "target frequency must be positive".into(),
        ));
    }
    Ok(ion.mass * omega_z * omega_z / (ion.charge.abs() * u_seg.abs()))
}

/// Default geometry of the fountain stack: 11 trap segments, endcaps E1/E2,
/// the extraction/drift tube F, and the merged steering electrodes R acting as
/// the reflector.
#[derive(Debug, Clone, PartialEq)]
pub struct FountainGeometry {
    pub segment_pitch: f64,
    pub segment_width: f64,
    /// Curvature `A/w²` of each segment's unit potential.
    pub segment_curvature: f64,
    pub endcap_distance: f64,
    pub endcap_width: f64,
    /// Where E1's plateau hands over to F.
    pub handover_z: f64,
    pub handover_width: f64,
    pub reflector_center: f64,
    pub reflector_width: f64,
    pub max_z: f64,
    pub min_z: f64,
}

impl Default for FountainGeometry {
    fn default() -> Self {
        let ion = IonSpecies::calcium40();
        let kappa = calibrate_segment_curvature(&ion, std::f64::consts::TAU * 147e3, -0.6)
            .expect("non-degenerate");
        FountainGeometry {
            segment_pitch: 0.25e-3,
            segment_width: 0.583e-3,
            segment_curvature: kappa,
            endcap_distance: 1.45e-3,
            endcap_width: 0.35e-3,
            handover_z: 5.5e-3,
            handover_width: 1.0e-3,
            reflector_center: 56e-3,
            reflector_width: 3e-3,
            max_z: 80e-3,
            min_z: -2e-3,
        }
    }
}

impl FountainGeometry {
    pub fn build(&self) -> Result<ElectrodeStack> {
        let mut electrodes = Vec::new();
        let amplitude = self.segment_curvature * self.segment_width.powi(2);
        for n in 1..=11 {
            electrodes.push(Electrode {
                name: format!("seg{n}"),
                model: ElectrodeModel::gaussian(
                    (n as f64 - 6.0) * self.segment_pitch,
                    amplitude,
                    self.segment_width,
                )?,
            });
        }
        electrodes.push(Electrode {
            name: "E1".into(),
            model: ElectrodeModel::aperture(
                self.endcap_distance,
                self.endcap_width,
                Facing::Positive,
                Some(Edge {
                    position: self.handover_z - self.endcap_distance,
                    width: self.handover_width,
                }),
            )?,
        });
        electrodes.push(Electrode {
            name: "E2".into(),
            model: ElectrodeModel::aperture(
                -self.endcap_distance,
                self.endcap_width,
                Facing::Negative,
                None,
            )?,
        });
        electrodes.push(Electrode {
            name: "F".into(),
            model: ElectrodeModel::tube(
                Edge {
                    position: self.handover_z,
                    width: self.handover_width,
                },
                Edge {
                    position: self.reflector_center,
                    width: self.reflector_width,
                },
            )?,
        });
        electrodes.push(Electrode {
            name: "R".into(),
            model: ElectrodeModel::reflector(self.reflector_center, self.reflector_width, 1.0)?,
        });
        let mut stack = ElectrodeStack::new(electrodes, self.max_z, self.min_z)?;
        stack.reflector = Some(ReflectorLink {
            ramp: "R".into(),
            shield: Some("F".into()),
        });
        stack.endcaps = Some(("E1".into(), "E2".into()));
        stack.validate()?;
        Ok(stack)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn seg() -> ElectrodeModel {
        ElectrodeModel::gaussian(0.0, 0.2, 0.583e-3).unwrap()
    }

    #[test]
    fn gaussian_far_field_and_centre() {
        let w = 0.583e-3;
        assert!(unit_potential(&seg(), 10.0 * w) < 4e-22);
        let (p, _, c) = seg().eval(0.0);
        assert_eq!(p, 0.2);
        assert_relative_eq!(c, -0.2 / (w * w), max_relative = 1e-12);
        assert_relative_eq!(c, -5.884e5, max_relative = 1e-3);
    }

    #[test]
    fn tabulated_reproduces_gaussian() {
        let w = 0.583e-3;
        let z: Vec<f64> = (-600..=600).map(|i| i as f64 * 10e-6).collect();
        let phi: Vec<f64> = z.iter().map(|&z| unit_potential(&seg(), z)).collect();
        let tab = ElectrodeModel::tabulated(z, phi).unwrap();
        for k in 0..997 {
            let z = -5.9e-3 + k as f64 * 11.83e-6;
            assert!((unit_potential(&tab, z) - unit_potential(&seg(), z)).abs() < 1e-6);
        }
        assert_eq!(unit_potential(&tab, 6.01e-3), 0.0);
        assert_eq!(unit_potential(&tab, -6.01e-3), 0.0);
        // Spline derivative follows the analytic one in the bulk.
        let (_, d, _) = tab.eval(0.3 * w);
        let (_, da, _) = seg().eval(0.3 * w);
        assert_relative_eq!(d, da, max_relative = 1e-5);
    }

    #[test]
    fn tabulated_errors() {
        assert!(matches!(
            ElectrodeModel::tabulated(vec![0.0, 1.0, 2.0], vec![0.0; 3]),
            Err(Error::InvalidModel(_))
        ));
        assert!(ElectrodeModel::tabulated(vec![0.0, 2.0, 1.0, 3.0], vec![0.0; 4]).is_err());
        assert!(ElectrodeModel::tabulated(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.5, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_import() {
        let m = ElectrodeModel::tabulated_from_csv_str("z,phi\n0,0\n1e-3,0.5\n2e-3,1\n3e-3,0.5\n").unwrap();
        assert_relative_eq!(unit_potential(&m, 1e-3), 0.5, epsilon = 1e-15);
        assert!(ElectrodeModel::tabulated_from_csv_str("x,y\n0,0\n").is_err());
    }

    #[test]
    fn invalid_widths_rejected() {
        assert!(ElectrodeModel::gaussian(0.0, 0.2, 0.0).is_err());
        assert!(ElectrodeModel::reflector(0.0, -1.0, 1.0).is_err());
        assert!(ElectrodeModel::gaussian(0.0, 1.5, 1e-3).is_err());
    }

    #[test]
    fn unknown_electrode_is_an_error() {
        let stack = FountainGeometry::default().build().unwrap();
        let mut v = VoltageMap::new();
        v.insert("E9".into(), 1.0);
        assert!(matches!(
            total_potential(&stack, &v, 0.0),
            Err(Error::UnknownElectrode(n)) if n == "E9"
        ));
    }

    #[test]
    fn zero_voltages_give_zero_potential() {
        let stack = FountainGeometry::default().build().unwrap();
        for i in 0..50 {
            let z = -2e-3 + i as f64 * 1.6e-3;
            assert_eq!(total_potential(&stack, &VoltageMap::new(), z).unwrap(), 0.0);
        }
    }

    #[test]
    fn calibration_values() {
        let ca = IonSpecies::calcium40();
        let k = calibrate_segment_curvature(&ca, TAU * 147e3, -0.6).unwrap();
        // m ω² / (q |U|) with CODATA constants
        let oracle = ca.mass * (TAU * 147e3_f64).powi(2) / (crate::units::ELEMENTARY_CHARGE * 0.6);
        assert_relative_eq!(k, oracle, max_relative = 1e-14);
        assert_relative_eq!(k, 5.89e5, max_relative = 2e-3);
        let k4 = calibrate_segment_curvature(&ca, TAU * 147e3, -0.15).unwrap();
        assert_relative_eq!(k4, 4.0 * k, max_relative = 1e-14);
        let k150 = calibrate_segment_curvature(&ca, TAU * 150e3, -0.6).unwrap();
        assert_relative_eq!(k150, 6.13e5, max_relative = 2e-3);
        assert!(matches!(
            calibrate_segment_curvature(&ca, TAU * 147e3, 0.0),
            Err(Error::DegenerateCalibration(_))
        ));
    }

    #[test]
    fn default_stack_trap_frequency_from_curvature() {
        let stack = FountainGeometry::default().build().unwrap();
        let mut v = VoltageMap::new();
        v.insert("seg6".into(), -0.6);
        v.insert("R".into(), 7.5);
        let ca = IonSpecies::calcium40();
        // minimum at the centre
        assert!(axial_field(&stack, &v, 0.0).unwrap().abs() < 1e-9);
        let c = potential_curvature(&stack, &v, 0.0).unwrap();
        let omega = (ca.charge * c / ca.mass).sqrt();
        assert_relative_eq!(omega, TAU * 147e3, max_relative = 1e-6);
        // restoring field q E = −m ω² z near the centre; oracle: central difference of Φ
        let z = 10e-6;
        let h = 1e-9;
        let fd = -(total_potential(&stack, &v, z + h).unwrap()
            - total_potential(&stack, &v, z - h).unwrap())
            / (2.0 * h);
        let harmonic = -ca.mass * omega * omega * z / ca.charge;
        assert_relative_eq!(fd, harmonic, max_relative = 1e-3);
        assert_relative_eq!(harmonic, -3.54, max_relative = 2e-3);
    }

    #[test]
    fn reflector_link_moves_shield_exit() {
        let mut stack = FountainGeometry::default().build().unwrap();
        stack.set_reflector_transition(51e-3, 2e-3).unwrap();
        assert_eq!(stack.reflector_transition(), Some((51e-3, 2e-3)));
        // F + R = 1 across the transition
        for i in 0..40 {
            let z = 40e-3 + i as f64 * 0.5e-3;
            let f = unit_potential(stack.model("F").unwrap(), z);
            let r = unit_potential(stack.model("R").unwrap(), z);
            assert_relative_eq!(f + r, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn endcaps_must_bracket_centre() {
        let mut stack = FountainGeometry::default().build().unwrap();
        stack.trap_center_z = 1.6e-3;
        assert!(stack.validate().is_err());
    }
}
