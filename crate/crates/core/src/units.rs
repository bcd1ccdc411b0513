//! Physical constants and unit-suffixed quantity parsing.
//!
//! Every quantity in a run configuration is written as `"<number> <unit>"`,
//! e.g. `"2 ns"`, `"-200 V"` or `"147 kHz"`. Parsing normalizes to SI.

use std::fmt;

/// CODATA 2018 values.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
pub const HBAR: f64 = 1.054_571_817e-34;
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Physical dimension of a configuration quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Length,
    Voltage,
    /// Cyclic frequency in Hz; also accepts `rad/s`.
    Frequency,
    Mass,
    Charge,
    Temperature,
    Speed,
    ElectricField,
    /// Event rate in 1/s.
    Rate,
    Energy,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Time => "time",
            Dimension::Length => "length",
            Dimension::Voltage => "voltage",
            Dimension::Frequency => "frequency",
            Dimension::Mass => "mass",
            Dimension::Charge => "charge",
            Dimension::Temperature => "temperature",
            Dimension::Speed => "speed",
            Dimension::ElectricField => "electric field",
            Dimension::Rate => "rate",
            Dimension::Energy => "energy",
        };
        f.write_str(s)
    }
}

fn scale(dim: Dimension, unit: &str) -> Option<f64> {
    use std::f64::consts::TAU;
    let unit = unit.replace(['µ', 'μ'], "u");
    let s = match (dim, unit.as_str()) {
        (Dimension::Time, "s") => 1.0,
        (Dimension::Time, "ms") => 1e-3,
        (Dimension::Time, "us") => 1e-6,
        (Dimension::Time, "ns") => 1e-9,
        (Dimension::Time, "ps") => 1e-12,
        (Dimension::Time, "min") => 60.0,

        (Dimension::Length, "m") => 1.0,
        (Dimension::Length, "cm") => 1e-2,
        (Dimension::Length, "mm") => 1e-3,
        (Dimension::Length, "um") => 1e-6,
        (Dimension::Length, "nm") => 1e-9,

        (Dimension::Voltage, "V") => 1.0,
        (Dimension::Voltage, "mV") => 1e-3,
        (Dimension::Voltage, "kV") => 1e3,

        (Dimension::Frequency, "Hz") => 1.0,
        (Dimension::Frequency, "kHz") => 1e3,
        (Dimension::Frequency, "MHz") => 1e6,
        (Dimension::Frequency, "GHz") => 1e9,
        (Dimension::Frequency, "rad/s") => 1.0 / TAU,

        (Dimension::Mass, "kg") => 1.0,
        (Dimension::Mass, "u") | (Dimension::Mass, "Da") => ATOMIC_MASS_UNIT,

        (Dimension::Charge, "C") => 1.0,
        (Dimension::Charge, "e") => ELEMENTARY_CHARGE,

        (Dimension::Temperature, "K") => 1.0,
        (Dimension::Temperature, "mK") => 1e-3,
        (Dimension::Temperature, "uK") => 1e-6,

        (Dimension::Speed, "m/s") => 1.0,
        (Dimension::Speed, "km/s") => 1e3,
        (Dimension::Speed, "mm/us") => 1e3,

        (Dimension::ElectricField, "V/m") => 1.0,
        (Dimension::ElectricField, "V/mm") => 1e3,
        (Dimension::ElectricField, "kV/m") => 1e3,
        (Dimension::ElectricField, "MV/m") => 1e6,

        (Dimension::Rate, "Hz") | (Dimension::Rate, "1/s") | (Dimension::Rate, "/s") => 1.0,
        (Dimension::Rate, "1/min") | (Dimension::Rate, "/min") => 1.0 / 60.0,

        (Dimension::Energy, "J") => 1.0,
        (Dimension::Energy, "eV") => ELEMENTARY_CHARGE,
        (Dimension::Energy, "meV") => 1e-3 * ELEMENTARY_CHARGE,
        (Dimension::Energy, "ueV") => 1e-6 * ELEMENTARY_CHARGE,
        _ => return None,
    };
    Some(s)
}

#[derive(Debug, Clone, PartialEq)]
pub enum UnitError {
    MissingUnit(String),
    BadNumber(String),
    WrongUnit { unit: String, expected: Dimension },
}

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UnitError::MissingUnit(s) => write!(f, "`{s}` has no unit suffix"),
            UnitError::BadNumber(s) => write!(f, "`{s}` is not a number"),
            UnitError::WrongUnit { unit, expected } => {
                write!(f, "unit `{unit}` is not a {expected} unit")
            }
        }
    }
}

impl std::error::Error for UnitError {}

/// Parses `"<number> <unit>"` into SI units of `dim`.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let text = text.trim();
    let split = text
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E') && i > 0 && is_exponent(text, i)))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| UnitError::MissingUnit(text.to_string()))?;
    let (num, unit) = text.split_at(split);
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(UnitError::MissingUnit(text.to_string()));
    }
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| UnitError::BadNumber(num.trim().to_string()))?;
    let s = scale(dim, unit).ok_or_else(|| UnitError::WrongUnit {
        unit: unit.to_string(),
        expected: dim,
    })?;
    Ok(decimal_scale(num.trim(), s).unwrap_or(value * s))
}

// For power-of-ten units the exponent is shifted in the decimal text, so
// "6.35 us" parses to exactly the same double as the literal 6.35e-6.
fn decimal_scale(num: &str, s: f64) -> Option<f64> {
    let k = s.log10().round();
    if (10f64.powi(k as i32) / s - 1.0).abs() > 1e-12 {
        return None;
    }
    let (mantissa, exp) = match num.find(['e', 'E']) {
        Some(i) => (&num[..i], num[i + 1..].parse::<i32>().ok()?),
        None => (num, 0),
    };
    format!("{mantissa}e{}", exp + k as i32).parse().ok()
}

// `e` is an exponent marker only when followed by a digit or sign and preceded by a digit.
fn is_exponent(text: &str, i: usize) -> bool {
    let bytes = text.as_bytes();
    let prev_digit = bytes[i - 1].is_ascii_digit() || bytes[i - 1] == b'.';
    let next_ok = bytes
        .get(i + 1)
        .is_some_and(|b| b.is_ascii_digit() || *b == b'-' || *b == b'+');
    prev_digit && next_ok
}

/// Formats an SI value with the given unit for writing back into configs.
pub fn format_quantity(value_si: f64, unit: &str, dim: Dimension) -> String {
    let s = scale(dim, unit).expect("known unit");
    format!("{} {}", value_si / s, unit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_units() {
        assert_eq!(parse_quantity("2 ns", Dimension::Time).unwrap(), 2e-9);
        assert_eq!(parse_quantity("6.35 us", Dimension::Time).unwrap(), 6.35e-6);
        assert_eq!(parse_quantity("0.7 mm", Dimension::Length).unwrap(), 0.7e-3);
        assert_eq!(parse_quantity("6.3 µs", Dimension::Time).unwrap(), 6.3e-6);
        assert_eq!(parse_quantity("6.3us", Dimension::Time).unwrap(), 6.3e-6);
        assert_eq!(parse_quantity("-200 V", Dimension::Voltage).unwrap(), -200.0);
        assert_eq!(parse_quantity("147 kHz", Dimension::Frequency).unwrap(), 147e3);
        assert_eq!(parse_quantity("1e4 V/m", Dimension::ElectricField).unwrap(), 1e4);
        assert_eq!(parse_quantity("1.5e-3 m", Dimension::Length).unwrap(), 1.5e-3);
        assert_eq!(parse_quantity("1 e", Dimension::Charge).unwrap(), ELEMENTARY_CHARGE);
        let m = parse_quantity("39.9626 u", Dimension::Mass).unwrap();
        assert!((m - 39.9626 * ATOMIC_MASS_UNIT).abs() < 1e-40);
    }

    #[test]
    fn rejects_bare_numbers_and_wrong_units() {
        assert_eq!(
            parse_quantity("2", Dimension::Time),
            Err(UnitError::MissingUnit("2".into()))
        );
        assert!(matches!(
            parse_quantity("2 V", Dimension::Time),
            Err(UnitError::WrongUnit { .. })
        ));
        assert!(matches!(
            parse_quantity("x ns", Dimension::Time),
            Err(UnitError::MissingUnit(_)) | Err(UnitError::BadNumber(_))
        ));
    }

    #[test]
    fn format_round_trips() {
        let s = format_quantity(51.25e-3, "mm", Dimension::Length);
        let v = parse_quantity(&s, Dimension::Length).unwrap();
        assert!((v - 51.25e-3).abs() < 1e-15);
    }
}
