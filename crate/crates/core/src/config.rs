//! TOML run configuration with unit-suffixed quantities.
//!
//! Every physical value is a string such as `"2 ns"` or `"-200 V"`; bare
//! numbers are rejected. Unknown keys are errors. Errors carry the dotted
//! path of the offending field, e.g. `ion.mass`.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::dynamics::{IonSpecies, RfAxialForceModel};
use crate::experiments::{
    BackgroundLoss, CalibrationTargets, InitialDistribution, ParamPath, SweepAxis, SweepGrid,
    WindowSearch,
};
use crate::fields::{Edge, ElectrodeModel, ElectrodeStack, Facing, FountainGeometry};
use crate::recapture::CriterionMode;
use crate::scenario::Scenario;
use crate::transverse::{OffsetGrid, OpticsConfig, Ray};
use crate::units::{format_quantity, parse_quantity, Dimension};
use crate::waveforms::{validate_schedule, Ramp, RampShape, SwitchEvent, DEFAULT_EDGE};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<ConfigError> for crate::Error {
    fn from(e: ConfigError) -> Self {
        crate::Error::Config(e.to_string())
    }
}

type CResult<T> = Result<T, ConfigError>;

struct Section<'a> {
    path: String,
    table: &'a Table,
    used: RefCell<BTreeSet<&'a str>>,
}

impl<'a> Section<'a> {
    fn new(path: impl Into<String>, table: &'a Table) -> Self {
        Section {
            path: path.into(),
            table,
            used: RefCell::new(BTreeSet::new()),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        let (k, v) = self.table.get_key_value(key)?;
        self.used.borrow_mut().insert(k.as_str());
        Some(v)
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::new(self.key_path(key), "required field is missing")
    }

    fn quantity(&self, key: &str, dim: Dimension) -> CResult<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => parse_quantity(s, dim)
                .map(Some)
                .map_err(|e| ConfigError::new(self.key_path(key), e.to_string())),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!(
                    "expected a quoted {dim} with unit (e.g. \"{}\"), found {}",
                    example(dim),
                    other.type_str()
                ),
            )),
        }
    }

    fn req_quantity(&self, key: &str, dim: Dimension) -> CResult<f64> {
        self.quantity(key, dim)?.ok_or_else(|| self.missing(key))
    }

    fn string(&self, key: &str) -> CResult<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected a string, found {}", other.type_str()),
            )),
        }
    }

    fn req_string(&self, key: &str) -> CResult<&'a str> {
        self.string(key)?.ok_or_else(|| self.missing(key))
    }

    fn boolean(&self, key: &str) -> CResult<Option<bool>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected true or false, found {}", other.type_str()),
            )),
        }
    }

    fn count(&self, key: &str) -> CResult<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected a non-negative integer, found {other}"),
            )),
        }
    }

    fn number(&self, key: &str) -> CResult<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected a number, found {}", other.type_str()),
            )),
        }
    }

    fn strings(&self, key: &str) -> CResult<Option<Vec<String>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::String(s) => Ok(s.clone()),
                    other => Err(ConfigError::new(
                        format!("{}[{i}]", self.key_path(key)),
                        format!("expected a string, found {}", other.type_str()),
                    )),
                })
                .collect::<CResult<Vec<_>>>()
                .map(Some),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected an array of strings, found {}", other.type_str()),
            )),
        }
    }

    fn sub(&self, key: &str) -> CResult<Option<Section<'a>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Section::new(self.key_path(key), t))),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected a table, found {}", other.type_str()),
            )),
        }
    }

    fn tables(&self, key: &str) -> CResult<Vec<Section<'a>>> {
        match self.get(key) {
            None => Ok(Vec::new()),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Table(t) => Ok(Section::new(format!("{}[{i}]", self.key_path(key)), t)),
                    other => Err(ConfigError::new(
                        format!("{}[{i}]", self.key_path(key)),
                        format!("expected a table, found {}", other.type_str()),
                    )),
                })
                .collect(),
            Some(other) => Err(ConfigError::new(
                self.key_path(key),
                format!("expected an array of tables, found {}", other.type_str()),
            )),
        }
    }

    /// Rejects keys that were never read.
    fn finish(&self) -> CResult<()> {
        let used = self.used.borrow();
        match self.table.keys().find(|k| !used.contains(k.as_str())) {
            Some(k) => Err(ConfigError::new(self.key_path(k), "unknown field")),
            None => Ok(()),
        }
    }
}

fn example(dim: Dimension) -> &'static str {
    match dim {
        Dimension::Time => "2 ns",
        Dimension::Length => "55 mm",
        Dimension::Voltage => "-200 V",
        Dimension::Frequency => "147 kHz",
        Dimension::Mass => "39.962 u",
        Dimension::Charge => "1 e",
        Dimension::Temperature => "0.5 mK",
        Dimension::Speed => "50 m/s",
        Dimension::ElectricField => "1e6 V/m",
        Dimension::Rate => "1 /min",
        Dimension::Energy => "1 meV",
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    pub repeats: u64,
    /// Draw per-cell initial states from `[distribution]`.
    pub stochastic: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloConfig {
    pub trials: u64,
    pub seed: u64,
    pub background: Option<BackgroundLoss>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            trials: 100,
            seed: 1,
            background: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfCalibrationConfig {
    pub target_mean_tof: f64,
    pub phases: usize,
    pub tolerance: f64,
}

impl Default for RfCalibrationConfig {
    fn default() -> Self {
        RfCalibrationConfig {
            target_mean_tof: 6.95e-6,
            phases: 16,
            tolerance: 2e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticsRun {
    pub optics: OpticsConfig,
    /// Derive turning distance and kinetic energy from the axial flight.
    pub from_flight: bool,
    pub aperture_z: f64,
    pub deflector_z: f64,
    /// Reflector lens power relative to the retroreflection calibration.
    pub lens_factor: f64,
    pub grid: OffsetGrid,
}

impl Default for OpticsRun {
    fn default() -> Self {
        OpticsRun {
            optics: OpticsConfig::default(),
            from_flight: true,
            aperture_z: 1.45e-3,
            deflector_z: 48e-3,
            lens_factor: 1.0,
            grid: OffsetGrid::square(1.2, 61),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub sweep: Option<SweepConfig>,
    pub distribution: InitialDistribution,
    pub monte_carlo: MonteCarloConfig,
    pub calibration: CalibrationTargets,
    pub rf_calibration: RfCalibrationConfig,
    pub window: WindowSearch,
    pub optics: OpticsRun,
    /// RF force model from `[rf_force]`, used when the force is switched on
    /// from the command line.
    pub rf_force: RfAxialForceModel,
    /// Parsed document, kept so calibrated values can be written back.
    pub document: Table,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> CResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("", format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &dir)
    }

    /// Parses `text`; relative table files resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> CResult<Self> {
        let document: Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new("", format!("TOML syntax: {}", e.message())))?;
        let root = Section::new("", &document);
        let cfg = build(&root, base_dir)?;
        root.finish()?;
        Ok(RunConfig { document: document.clone(), ..cfg })
    }

    /// The document with the reflector transition replaced, as TOML text.
    pub fn with_reflector(&self, center: f64, width: f64) -> String {
        let mut doc = self.document.clone();
        let stack = doc
            .entry("stack")
            .or_insert_with(|| Value::Table(Table::new()));
        if let Value::Table(t) = stack {
            t.insert(
                "reflector_center".into(),
                Value::String(format_quantity(center, "mm", Dimension::Length)),
            );
            t.insert(
                "reflector_width".into(),
                Value::String(format_quantity(width, "mm", Dimension::Length)),
            );
        }
        toml::to_string(&doc).expect("tables serialize")
    }
}

fn build(root: &Section<'_>, base_dir: &Path) -> CResult<RunConfig> {
    let ion_sec = root.sub("ion")?.ok_or_else(|| root.missing("ion"))?;
    let mass = ion_sec.req_quantity("mass", Dimension::Mass)?;
    let charge = ion_sec.req_quantity("charge", Dimension::Charge)?;
    let label = ion_sec.string("label")?.unwrap_or("ion").to_string();
    if !(mass > 0.0) {
        return Err(ConfigError::new("ion.mass", "must be positive"));
    }
    if charge == 0.0 {
        return Err(ConfigError::new("ion.charge", "must be non-zero"));
    }
    ion_sec.finish()?;
    let ion = IonSpecies { mass, charge, label };

    let mut scenario = Scenario::baseline();
    scenario.ion = ion;
    scenario.stack = match root.sub("stack")? {
        Some(s) => {
            let stack = build_stack(&s, base_dir)?;
            s.finish()?;
            stack
        }
        None => FountainGeometry::default()
            .build()
            .map_err(|e| ConfigError::new("stack", e.to_string()))?,
    };

    if let Some(v) = root.sub("voltages")? {
        scenario.voltages.clear();
        for key in v.table.keys() {
            let u = v.req_quantity(key, Dimension::Voltage)?;
            if !scenario.stack.contains(key) {
                return Err(ConfigError::new(v.key_path(key), "no electrode with this name"));
            }
            scenario.voltages.insert(key.clone(), u);
        }
        v.finish()?;
    }

    if let Some(s) = root.sub("schedule")? {
        let p = &mut scenario.pulse;
        if let Some(names) = s.strings("extraction_electrodes")? {
            if names.is_empty() {
                return Err(ConfigError::new(
                    s.key_path("extraction_electrodes"),
                    "needs at least one electrode",
                ));
            }
            for n in &names {
                if !scenario.stack.contains(n) {
                    return Err(ConfigError::new(
                        s.key_path("extraction_electrodes"),
                        format!("no electrode named `{n}`"),
                    ));
                }
            }
            p.electrodes = names;
        }
        set(&mut p.voltage, s.quantity("extraction_voltage", Dimension::Voltage)?);
        set(&mut p.start, s.quantity("pulse_start", Dimension::Time)?);
        set(&mut p.duration, s.quantity("pulse_duration", Dimension::Time)?);
        set(&mut p.edge, s.quantity("edge", Dimension::Time)?);
        if p.duration <= 0.0 {
            return Err(ConfigError::new(s.key_path("pulse_duration"), "must be positive"));
        }
        for ev in s.tables("event")? {
            let electrode = ev.req_string("electrode")?.to_string();
            if !scenario.stack.contains(&electrode) {
                return Err(ConfigError::new(ev.key_path("electrode"), format!("no electrode named `{electrode}`")));
            }
            let e = SwitchEvent {
                time: ev.req_quantity("time", Dimension::Time)?,
                electrode,
                target: ev.req_quantity("target", Dimension::Voltage)?,
                edge_duration: ev.quantity("edge", Dimension::Time)?.unwrap_or(DEFAULT_EDGE),
            };
            ev.finish()?;
            scenario.extra_events.push(e);
        }
        s.finish()?;
    }

    if let Some(s) = root.sub("rf")? {
        let rf = &mut scenario.rf;
        if let Some(f) = s.quantity("frequency", Dimension::Frequency)? {
            if !(f > 0.0) {
                return Err(ConfigError::new(s.key_path("frequency"), "must be positive"));
            }
            rf.omega = std::f64::consts::TAU * f;
        }
        set(&mut rf.amplitude_pp, s.quantity("amplitude_pp", Dimension::Voltage)?);
        set(&mut rf.t_off, s.quantity("t_off", Dimension::Time)?);
        ramp(&s, "ramp_down", &mut rf.ramp_down)?;
        ramp(&s, "ramp_up", &mut rf.ramp_up)?;
        if let Some(shape) = s.string("shape")? {
            rf.shape = match shape {
                "cosine" => RampShape::Cosine,
                "linear" => RampShape::Linear,
                _ => return Err(ConfigError::new(s.key_path("shape"), "expected \"cosine\" or \"linear\"")),
            };
        }
        s.finish()?;
    }

    let mut rf_force = RfAxialForceModel::default();
    if let Some(s) = root.sub("rf_force")? {
        let m = &mut rf_force;
        set(&mut m.e0, s.quantity("e0", Dimension::ElectricField)?);
        set(&mut m.sigma, s.quantity("sigma", Dimension::Length)?);
        set(&mut m.center, s.quantity("center", Dimension::Length)?);
        if !(m.sigma > 0.0) {
            return Err(ConfigError::new(s.key_path("sigma"), "must be positive"));
        }
        if s.boolean("enabled")?.unwrap_or(false) {
            scenario.sim.rf_force = Some(*m);
        }
        s.finish()?;
    }

    if let Some(s) = root.sub("sim")? {
        let sim = &mut scenario.sim;
        set(&mut sim.dt, s.quantity("dt", Dimension::Time)?);
        set(&mut sim.max_time, s.quantity("max_time", Dimension::Time)?);
        set(&mut sim.z_init, s.quantity("z_init", Dimension::Length)?);
        set(&mut sim.v_init, s.quantity("v_init", Dimension::Speed)?);
        set(&mut sim.flight_threshold, s.quantity("flight_threshold", Dimension::Length)?);
        if let Some(d) = s.count("decimation")? {
            if d == 0 {
                return Err(ConfigError::new(s.key_path("decimation"), "must be >= 1"));
            }
            sim.decimation = d as usize;
        }
        if !(sim.dt > 0.0) {
            return Err(ConfigError::new(s.key_path("dt"), "must be positive"));
        }
        s.finish()?;
    }

    if let Some(s) = root.sub("criterion")? {
        let c = &mut scenario.criterion;
        set(&mut c.max_distance, s.quantity("max_distance", Dimension::Length)?);
        set(&mut c.max_speed, s.quantity("max_speed", Dimension::Speed)?);
        match s.string("mode")? {
            None | Some("bounds") => {}
            Some("trap-depth") => {
                c.mode = CriterionMode::TrapDepth {
                    depth: s.req_quantity("depth", Dimension::Energy)?,
                }
            }
            Some(_) => {
                return Err(ConfigError::new(s.key_path("mode"), "expected \"bounds\" or \"trap-depth\""))
            }
        }
        s.finish()?;
    }

    let distribution = match root.sub("distribution")? {
        None => InitialDistribution::default(),
        Some(s) => {
            let d = match s.string("kind")?.unwrap_or("thermal") {
                "delta" => InitialDistribution::Delta,
                "thermal" => {
                    let t = s.quantity("temperature", Dimension::Temperature)?.unwrap_or(0.5e-3);
                    if t < 0.0 {
                        return Err(ConfigError::new(s.key_path("temperature"), "must be >= 0"));
                    }
                    InitialDistribution::Thermal { temperature: t }
                }
                _ => return Err(ConfigError::new(s.key_path("kind"), "expected \"delta\" or \"thermal\"")),
            };
            s.finish()?;
            d
        }
    };

    let mut monte_carlo = MonteCarloConfig::default();
    if let Some(s) = root.sub("monte_carlo")? {
        set(&mut monte_carlo.trials, s.count("trials")?);
        set(&mut monte_carlo.seed, s.count("seed")?);
        if monte_carlo.trials == 0 {
            return Err(ConfigError::new(s.key_path("trials"), "must be >= 1"));
        }
        if s.boolean("background_loss")?.unwrap_or(false) {
            let mut b = BackgroundLoss::default();
            set(&mut b.rate, s.quantity("loss_rate", Dimension::Rate)?);
            set(&mut b.wait, s.quantity("wait", Dimension::Time)?);
            monte_carlo.background = Some(b);
        } else {
            // accepted but unused without background_loss
            s.quantity("loss_rate", Dimension::Rate)?;
            s.quantity("wait", Dimension::Time)?;
        }
        s.finish()?;
    }

    let sweep = match root.sub("sweep")? {
        None => None,
        Some(s) => {
            let a1 = s.sub("axis1")?.ok_or_else(|| s.missing("axis1"))?;
            let axis1 = axis(&a1, &scenario)?;
            let axis2 = match s.sub("axis2")? {
                Some(a2) => Some(axis(&a2, &scenario)?),
                None => None,
            };
            let repeats = s.count("repeats")?.unwrap_or(100);
            let stochastic = s.boolean("stochastic")?.unwrap_or(false);
            if stochastic && repeats == 0 {
                return Err(ConfigError::new(s.key_path("repeats"), "must be >= 1"));
            }
            s.finish()?;
            Some(SweepConfig {
                grid: SweepGrid { axis1, axis2 },
                repeats,
                stochastic,
            })
        }
    };

    let mut calibration = CalibrationTargets::default();
    let mut rf_calibration = RfCalibrationConfig::default();
    if let Some(s) = root.sub("calibration")? {
        set(&mut calibration.z_turn, s.quantity("target_turn", Dimension::Length)?);
        set(&mut calibration.tof, s.quantity("target_tof", Dimension::Time)?);
        set(&mut calibration.tol_z, s.quantity("tolerance_turn", Dimension::Length)?);
        set(&mut calibration.tol_t, s.quantity("tolerance_tof", Dimension::Time)?);
        if let Some(n) = s.count("max_iterations")? {
            calibration.max_iterations = n as usize;
        }
        set(&mut rf_calibration.target_mean_tof, s.quantity("rf_target_tof", Dimension::Time)?);
        if let Some(n) = s.count("rf_phases")? {
            if n == 0 {
                return Err(ConfigError::new(s.key_path("rf_phases"), "must be >= 1"));
            }
            rf_calibration.phases = n as usize;
        }
        s.finish()?;
    }

    let mut window = WindowSearch::default();
    if let Some(s) = root.sub("window")? {
        set(&mut window.start, s.quantity("start", Dimension::Time)?);
        set(&mut window.stop, s.quantity("stop", Dimension::Time)?);
        set(&mut window.resolution, s.quantity("resolution", Dimension::Time)?);
        set(&mut window.coarse_step, s.quantity("coarse_step", Dimension::Time)?);
        if !(window.start < window.stop) {
            return Err(ConfigError::new(s.key_path("stop"), "must exceed start"));
        }
        if !(window.resolution > 0.0 && window.coarse_step > 0.0) {
            return Err(ConfigError::new(s.key_path("resolution"), "steps must be positive"));
        }
        s.finish()?;
    }

    let mut optics = OpticsRun::default();
    if let Some(s) = root.sub("optics")? {
        let o = &mut optics.optics;
        set(&mut o.aperture_radius, s.quantity("aperture_radius", Dimension::Length)?);
        set(&mut o.plate_length, s.quantity("plate_length", Dimension::Length)?);
        set(&mut o.plate_separation, s.quantity("plate_separation", Dimension::Length)?);
        set(&mut o.kinetic_energy_ev, s.quantity("kinetic_energy", Dimension::Energy)?.map(|j| j / crate::units::ELEMENTARY_CHARGE));
        set(&mut o.turn_distance, s.quantity("turn_distance", Dimension::Length)?);
        set(&mut o.reflector_voltage, s.quantity("reflector_voltage", Dimension::Voltage)?);
        let mut launch = o.launch;
        set(&mut launch.x, s.quantity("launch_x", Dimension::Length)?);
        set(&mut launch.y, s.quantity("launch_y", Dimension::Length)?);
        set(&mut launch.xp, s.number("launch_xp")?);
        set(&mut launch.yp, s.number("launch_yp")?);
        o.launch = Ray { s: 0.0, ..launch };
        set(&mut o.bundle_half_angle, s.number("bundle_half_angle")?);
        set(&mut optics.aperture_z, s.quantity("aperture_z", Dimension::Length)?);
        set(&mut optics.deflector_z, s.quantity("deflector_z", Dimension::Length)?);
        set(&mut optics.lens_factor, s.number("lens_factor")?);
        set(&mut optics.from_flight, s.boolean("from_flight")?);
        let half = s.quantity("grid_half", Dimension::Voltage)?.unwrap_or(1.2);
        let n = s.count("grid_points")?.unwrap_or(61);
        if n == 0 {
            return Err(ConfigError::new(s.key_path("grid_points"), "must be >= 1"));
        }
        optics.grid = OffsetGrid::square(half, n as usize);
        o.deflector_distance = optics.deflector_z - optics.aperture_z;
        if !(o.deflector_distance > 0.0 && o.turn_distance > o.deflector_distance) {
            return Err(ConfigError::new(s.key_path("deflector_z"), "steering module must lie between the aperture and the turning point"));
        }
        if !(o.kinetic_energy_ev > 0.0) {
            return Err(ConfigError::new(s.key_path("kinetic_energy"), "must be positive"));
        }
        o.calibrate_retroreflection();
        s.finish()?;
    }

    let violations = validate_schedule(&scenario.schedule(), &scenario.stack);
    if let Some(v) = violations.first() {
        return Err(ConfigError::new("schedule", v.to_string()));
    }
    if let Err(e) = scenario.omega_z() {
        return Err(ConfigError::new("voltages", e.to_string()));
    }

    Ok(RunConfig {
        scenario,
        sweep,
        distribution,
        monte_carlo,
        calibration,
        rf_calibration,
        window,
        optics,
        rf_force,
        document: Table::new(),
    })
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn ramp(s: &Section<'_>, prefix: &str, slot: &mut Option<Ramp>) -> CResult<()> {
    let start = s.quantity(&format!("{prefix}_start"), Dimension::Time)?;
    let duration = s.quantity(&format!("{prefix}_duration"), Dimension::Time)?;
    let enabled = s.boolean(prefix)?;
    if enabled == Some(false) {
        *slot = None;
        return Ok(());
    }
    if start.is_some() || duration.is_some() {
        let base = slot.unwrap_or(Ramp {
            start: 0.0,
            duration: 500e-9,
        });
        let r = Ramp {
            start: start.unwrap_or(base.start),
            duration: duration.unwrap_or(base.duration),
        };
        if r.duration < 0.0 {
            return Err(ConfigError::new(s.key_path(&format!("{prefix}_duration")), "must be >= 0"));
        }
        *slot = Some(r);
    }
    Ok(())
}

fn axis(s: &Section<'_>, scenario: &Scenario) -> CResult<SweepAxis> {
    let param: ParamPath = s
        .req_string("param")?
        .parse()
        .map_err(|e: crate::Error| ConfigError::new(s.key_path("param"), e.to_string()))?;
    if let ParamPath::Voltage(name) = &param {
        if !scenario.stack.contains(name) {
            return Err(ConfigError::new(s.key_path("param"), format!("no electrode named `{name}`")));
        }
    }
    let dim = param.dimension();
    let a = SweepAxis {
        param,
        start: s.req_quantity("start", dim)?,
        stop: s.req_quantity("stop", dim)?,
        step: s.req_quantity("step", dim)?,
    };
    a.validate()
        .map_err(|e| ConfigError::new(s.path.clone(), e.to_string()))?;
    s.finish()?;
    Ok(a)
}

fn build_stack(s: &Section<'_>, base_dir: &Path) -> CResult<ElectrodeStack> {
    let preset = s.string("preset")?.unwrap_or("fountain");
    let mut geometry = FountainGeometry::default();
    set(&mut geometry.reflector_center, s.quantity("reflector_center", Dimension::Length)?);
    set(&mut geometry.reflector_width, s.quantity("reflector_width", Dimension::Length)?);
    set(&mut geometry.endcap_width, s.quantity("endcap_width", Dimension::Length)?);
    set(&mut geometry.endcap_distance, s.quantity("endcap_distance", Dimension::Length)?);
    set(&mut geometry.max_z, s.quantity("max_z", Dimension::Length)?);
    set(&mut geometry.min_z, s.quantity("min_z", Dimension::Length)?);
    let mut stack = match preset {
        "fountain" => geometry
            .build()
            .map_err(|e| ConfigError::new(s.path.clone(), e.to_string()))?,
        "empty" => ElectrodeStack::new(Vec::new(), geometry.max_z, geometry.min_z)
            .map_err(|e| ConfigError::new(s.path.clone(), e.to_string()))?,
        _ => {
            return Err(ConfigError::new(
                s.key_path("preset"),
                "expected \"fountain\" or \"empty\"",
            ))
        }
    };
    for e in s.tables("electrode")? {
        let name = e.req_string("name")?.to_string();
        let model = electrode_model(&e, base_dir)?;
        e.finish()?;
        stack.upsert(&name, model);
    }
    stack
        .validate()
        .map_err(|err| ConfigError::new(s.path.clone(), err.to_string()))?;
    Ok(stack)
}

fn electrode_model(e: &Section<'_>, base_dir: &Path) -> CResult<ElectrodeModel> {
    let len = |k: &str| e.req_quantity(k, Dimension::Length);
    let kind = e.req_string("kind")?;
    let model = match kind {
        "gaussian" => ElectrodeModel::gaussian(len("center")?, e.number("amplitude")?.unwrap_or(1.0), len("width")?),
        "aperture" => {
            let facing = match e.string("facing")?.unwrap_or("+") {
                "+" | "positive" => Facing::Positive,
                "-" | "negative" => Facing::Negative,
                _ => return Err(ConfigError::new(e.key_path("facing"), "expected \"+\" or \"-\"")),
            };
            let plateau = match e.quantity("plateau_length", Dimension::Length)? {
                Some(position) => Some(Edge {
                    position,
                    width: e.req_quantity("plateau_edge", Dimension::Length)?,
                }),
                None => None,
            };
            ElectrodeModel::aperture(len("center")?, len("width")?, facing, plateau)
        }
        "tube" => ElectrodeModel::tube(
            Edge {
                position: len("entrance")?,
                width: len("entrance_width")?,
            },
            Edge {
                position: len("exit")?,
                width: len("exit_width")?,
            },
        ),
        "reflector" => ElectrodeModel::reflector(len("center")?, len("width")?, e.number("amplitude")?.unwrap_or(1.0)),
        "tabulated" => {
            let file = PathBuf::from(e.req_string("file")?);
            let file = if file.is_relative() { base_dir.join(file) } else { file };
            ElectrodeModel::tabulated_from_csv(&file)
        }
        _ => {
            return Err(ConfigError::new(
                e.key_path("kind"),
                "expected gaussian, aperture, tube, reflector or tabulated",
            ))
        }
    };
    model.map_err(|err| ConfigError::new(e.path.clone(), err.to_string()))
}
