//! Unit-suffixed quantity parsing.
//!
//! Everything inside the crate is SI with angular frequencies in rad/s.
//! Text inputs (configuration files, CLI) may use prefixed units and
//! Hz-based frequencies; conversion happens here and nowhere else.

use std::f64::consts::{PI, TAU};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Time,
    Length,
    MagneticField,
    /// rad/s. Hz-based inputs are multiplied by 2π.
    AngularFrequency,
    /// rad/s/T. Hz/T-based inputs are multiplied by 2π.
    GyromagneticRatio,
    Angle,
    /// m⁻³
    NumberDensity,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Time => "time (s, ms, us, ns, ps)",
            Dimension::Length => "length (m, mm, um, nm)",
            Dimension::MagneticField => "magnetic field (T, mT, uT, nT)",
            Dimension::AngularFrequency => "frequency (rad/s, Hz, kHz, MHz, GHz)",
            Dimension::GyromagneticRatio => "gyromagnetic ratio (rad/s/T, Hz/T, kHz/T, MHz/T, GHz/T)",
            Dimension::Angle => "angle (rad, deg, or multiples of pi)",
            Dimension::NumberDensity => "number density (m^-3)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitError(pub String);

impl fmt::Display for UnitError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UnitError {}

/// A recognised unit: SI conversion is `value * scale / divisor`.
///
/// Decimal sub-unit prefixes divide by a power of ten instead of
/// multiplying by its (inexact) reciprocal, so "31.2 mT" is the correctly
/// rounded 0.0312.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unit {
    pub symbol: &'static str,
    pub dimension: Dimension,
    scale: f64,
    divisor: f64,
}

impl Unit {
    const fn new(symbol: &'static str, dimension: Dimension, scale: f64, divisor: f64) -> Self {
        Unit {
            symbol,
            dimension,
            scale,
            divisor,
        }
    }

    pub fn to_si(&self, value: f64) -> f64 {
        value * self.scale / self.divisor
    }

    pub fn from_si(&self, si: f64) -> f64 {
        si * self.divisor / self.scale
    }
}

use Dimension as D;

const UNITS: &[Unit] = &[
    Unit::new("s", D::Time, 1.0, 1.0),
    Unit::new("ms", D::Time, 1.0, 1e3),
    Unit::new("us", D::Time, 1.0, 1e6),
    Unit::new("µs", D::Time, 1.0, 1e6),
    Unit::new("ns", D::Time, 1.0, 1e9),
    Unit::new("ps", D::Time, 1.0, 1e12),
    Unit::new("m", D::Length, 1.0, 1.0),
    Unit::new("mm", D::Length, 1.0, 1e3),
    Unit::new("um", D::Length, 1.0, 1e6),
    Unit::new("µm", D::Length, 1.0, 1e6),
    Unit::new("nm", D::Length, 1.0, 1e9),
    Unit::new("T", D::MagneticField, 1.0, 1.0),
    Unit::new("mT", D::MagneticField, 1.0, 1e3),
    Unit::new("uT", D::MagneticField, 1.0, 1e6),
    Unit::new("µT", D::MagneticField, 1.0, 1e6),
    Unit::new("nT", D::MagneticField, 1.0, 1e9),
    Unit::new("rad/s", D::AngularFrequency, 1.0, 1.0),
    Unit::new("Hz", D::AngularFrequency, TAU, 1.0),
    Unit::new("kHz", D::AngularFrequency, TAU * 1e3, 1.0),
    Unit::new("MHz", D::AngularFrequency, TAU * 1e6, 1.0),
    Unit::new("GHz", D::AngularFrequency, TAU * 1e9, 1.0),
    Unit::new("rad/s/T", D::GyromagneticRatio, 1.0, 1.0),
    Unit::new("Hz/T", D::GyromagneticRatio, TAU, 1.0),
    Unit::new("kHz/T", D::GyromagneticRatio, TAU * 1e3, 1.0),
    Unit::new("MHz/T", D::GyromagneticRatio, TAU * 1e6, 1.0),
    Unit::new("GHz/T", D::GyromagneticRatio, TAU * 1e9, 1.0),
    Unit::new("rad", D::Angle, 1.0, 1.0),
    Unit::new("deg", D::Angle, PI, 180.0),
    Unit::new("m^-3", D::NumberDensity, 1.0, 1.0),
    Unit::new("1/m^3", D::NumberDensity, 1.0, 1.0),
];

pub fn lookup_unit(symbol: &str) -> Option<&'static Unit> {
    UNITS.iter().find(|u| u.symbol == symbol)
}

/// Splits "31.2 mT" / "31.2mT" into the numeric part and the unit suffix.
fn split_number(text: &str) -> (&str, &str) {
    let text = text.trim();
    let mut end = 0;
    let bytes = text.as_bytes();
    while end < bytes.len() {
        let c = bytes[end] as char;
        let exponent_sign = (c == '+' || c == '-') && end > 0 && matches!(bytes[end - 1], b'e' | b'E');
        let exponent_mark = (c == 'e' || c == 'E')
            && end > 0
            && bytes
                .get(end + 1)
                .is_some_and(|n| n.is_ascii_digit() || *n == b'-' || *n == b'+');
        if c.is_ascii_digit() || c == '.' || (end == 0 && (c == '-' || c == '+')) || exponent_sign || exponent_mark {
            end += 1;
        } else {
            break;
        }
    }
    (&text[..end], text[end..].trim())
}

/// Parses a quantity with an explicit unit of the requested dimension and
/// returns its SI value. Angles and number densities may omit the unit
/// (radians and m⁻³ respectively).
pub fn parse_quantity(text: &str, dimension: Dimension) -> Result<f64, UnitError> {
    if dimension == Dimension::Angle {
        return parse_angle(text);
    }
    let (number, suffix) = split_number(text);
    let value: f64 = number
        .parse()
        .map_err(|_| UnitError(format!("'{text}' does not start with a number")))?;
    if suffix.is_empty() {
        if dimension == Dimension::NumberDensity {
            return Ok(value);
        }
        return Err(UnitError(format!("'{text}' is missing a unit; expected {dimension}")));
    }
    let unit = lookup_unit(suffix).ok_or_else(|| UnitError(format!("unknown unit '{suffix}' in '{text}'")))?;
    if unit.dimension != dimension {
        return Err(UnitError(format!(
            "unit '{suffix}' in '{text}' has the wrong dimension; expected {dimension}"
        )));
    }
    Ok(unit.to_si(value))
}

/// Angles: "1.2", "1.2 rad", "45 deg", "pi", "pi/2", "3pi/2", "0.25 pi".
pub fn parse_angle(text: &str) -> Result<f64, UnitError> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.contains("pi") || compact.contains('π') {
        let compact = compact.replace('π', "pi");
        let (head, tail) = compact
            .split_once("pi")
            .ok_or_else(|| UnitError(format!("cannot parse angle '{text}'")))?;
        let head = head.trim_end_matches('*');
        let multiplier = match head {
            "" | "+" => 1.0,
            "-" => -1.0,
            h => h
                .parse::<f64>()
                .map_err(|_| UnitError(format!("cannot parse angle multiplier in '{text}'")))?,
        };
        let divisor = match tail {
            "" => 1.0,
            t => t
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .filter(|d| *d != 0.0)
                .ok_or_else(|| UnitError(format!("cannot parse angle divisor in '{text}'")))?,
        };
        return Ok(multiplier * PI / divisor);
    }
    let (number, suffix) = split_number(text);
    let value: f64 = number
        .parse()
        .map_err(|_| UnitError(format!("cannot parse angle '{text}'")))?;
    match suffix {
        "" | "rad" => Ok(value),
        "deg" => Ok(value * PI / 180.0),
        other => Err(UnitError(format!("unknown angle unit '{other}' in '{text}'"))),
    }
}

/// Evenly spaced sweep, written `start:stop:count` (e.g. `60us:63us:51`).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SweepSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepSpec {
    pub fn parse(text: &str, dimension: Dimension) -> Result<Self, UnitError> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(UnitError(format!("sweep '{text}' must have the form start:stop:count")));
        }
        let start = parse_quantity(parts[0], dimension)?;
        let stop = parse_quantity(parts[1], dimension)?;
        let count: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| UnitError(format!("sweep count '{}' is not a positive integer", parts[2])))?;
        let spec = SweepSpec { start, stop, count };
        spec.validate().map_err(UnitError)?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.count == 0 {
            return Err("sweep count must be at least 1".into());
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err("sweep bounds must be finite".into());
        }
        if self.count > 1 && self.start >= self.stop {
            return Err(format!("sweep start {} must be below stop {}", self.start, self.stop));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                let frac = i as f64 / last;
                self.start + (self.stop - self.start) * frac
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefixed_units() {
        assert_eq!(parse_quantity("31.2 mT", Dimension::MagneticField).unwrap(), 0.0312);
        assert_eq!(parse_quantity("188.1ns", Dimension::Time).unwrap(), 188.1e-9);
        assert_eq!(parse_quantity("5 nm", Dimension::Length).unwrap(), 5e-9);
        let w = parse_quantity("1.33 MHz", Dimension::AngularFrequency).unwrap();
        assert!((w - TAU * 1.33e6).abs() < 1e-6);
        let g = parse_quantity("-28.8 GHz/T", Dimension::GyromagneticRatio).unwrap();
        assert!((g + TAU * 28.8e9).abs() < 1.0);
        assert_eq!(parse_quantity("1e-7 T", Dimension::MagneticField).unwrap(), 1e-7);
        assert_eq!(parse_quantity("6e28", Dimension::NumberDensity).unwrap(), 6e28);
    }

    #[test]
    fn dimension_mismatch_and_missing_unit() {
        assert!(parse_quantity("30 mT", Dimension::Time).is_err());
        assert!(parse_quantity("30", Dimension::Time).is_err());
        assert!(parse_quantity("30 furlongs", Dimension::Time).is_err());
        assert!(parse_quantity("abc", Dimension::Time).is_err());
    }

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_angle("3pi/2").unwrap(), 3.0 * PI / 2.0);
        assert_eq!(parse_angle("0.25 pi").unwrap(), 0.25 * PI);
        assert_eq!(parse_angle("-pi/4").unwrap(), -PI / 4.0);
        assert_eq!(parse_angle("90 deg").unwrap(), PI / 2.0);
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert!(parse_angle("pi/0").is_err());
    }

    #[test]
    fn sweep_of_fifty_one_points() {
        let s = SweepSpec::parse("60us:63us:51", Dimension::Time).unwrap();
        let p = s.points();
        assert_eq!(p.len(), 51);
        assert_eq!(p[0], 60e-6);
        assert_eq!(p[50], 63e-6);
        assert!((p[1] - p[0] - 60e-9).abs() < 1e-18);
        assert!(SweepSpec::parse("63us:60us:5", Dimension::Time).is_err());
        assert!(SweepSpec::parse("60us:63us:0", Dimension::Time).is_err());
    }

    proptest::proptest! {
        #[test]
        fn si_text_round_trip_is_exact(v in -1e3f64..1e3) {
            for (sym, dim) in [("s", Dimension::Time), ("T", Dimension::MagneticField), ("m", Dimension::Length), ("rad/s", Dimension::AngularFrequency)] {
                let text = format!("{v} {sym}");
                proptest::prop_assert_eq!(parse_quantity(&text, dim).unwrap().to_bits(), v.to_bits());
            }
        }

        #[test]
        fn prefixed_round_trip(v in 1e-3f64..1e3) {
            for sym in ["ms", "us", "ns", "mT", "nT", "MHz", "kHz/T"] {
                let unit = lookup_unit(sym).unwrap();
                let back = unit.from_si(unit.to_si(v));
                proptest::prop_assert!((back - v).abs() <= 2.0 * f64::EPSILON * v);
            }
        }
    }
}
