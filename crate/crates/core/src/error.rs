use thiserror::Error;

use crate::dynamics::IonState;
use crate::experiments::calibrate::ReflectorCalibration;
use crate::waveforms::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid electrode model: {0}")]
    InvalidModel(String),

    #[error("unknown electrode `{0}`")]
    UnknownElectrode(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid schedule: {}", display_violations(.0))]
    InvalidSchedule(Vec<Violation>),

    #[error("degenerate calibration: {0}")]
    DegenerateCalibration(String),

    #[error("numerical blow-up after t = {:.3e} s (last good z = {:.3e} m)", .last_good.t, .last_good.z)]
    NumericalBlowup { last_good: IonState },

    #[error("trajectory has no turning point (ion was not reflected)")]
    NotReflected,

    #[error("ion kinetic energy must be positive, got {0} eV")]
    InvalidEnergy(f64),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no recapture found in the scanned pulse range")]
    WindowNotFound,

    #[error("calibration failed: {reason}")]
    CalibrationFailed {
        reason: String,
        best: Option<Box<ReflectorCalibration>>,
    },

    #[error("{path}: {message}")]
    Io {
        path: String,
        message: String,
    },
}

fn display_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }
}
