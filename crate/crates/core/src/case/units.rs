//! Quantities written as `"<number> <unit>"`, converted to SI.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Time,
    Velocity,
    AngularVelocity,
    Angle,
    Density,
    Viscosity,
    /// Power-law consistency, Pa·sⁿ.
    Consistency,
    Temperature,
    /// Arrhenius activation temperature; kelvin only, no offset units.
    ActivationTemperature,
    SpecificHeat,
    Conductivity,
    ForceDensity,
    SpecificPower,
    ShearRate,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Length => "length",
            Dimension::Time => "time",
            Dimension::Velocity => "velocity",
            Dimension::AngularVelocity => "angular velocity",
            Dimension::Angle => "angle",
            Dimension::Density => "density",
            Dimension::Viscosity => "viscosity",
            Dimension::Consistency => "consistency",
            Dimension::Temperature => "temperature",
            Dimension::ActivationTemperature => "activation temperature",
            Dimension::SpecificHeat => "specific heat",
            Dimension::Conductivity => "conductivity",
            Dimension::ForceDensity => "force density",
            Dimension::SpecificPower => "specific power",
            Dimension::ShearRate => "shear rate",
        };
        f.write_str(s)
    }
}

/// `(unit, dimension, scale, offset)`: SI value = scale · x + offset.
const UNITS: &[(&str, Dimension, f64, f64)] = &[
    ("m", Dimension::Length, 1.0, 0.0),
    ("cm", Dimension::Length, 1e-2, 0.0),
    ("mm", Dimension::Length, 1e-3, 0.0),
    ("s", Dimension::Time, 1.0, 0.0),
    ("ms", Dimension::Time, 1e-3, 0.0),
    ("min", Dimension::Time, 60.0, 0.0),
    ("m/s", Dimension::Velocity, 1.0, 0.0),
    ("mm/s", Dimension::Velocity, 1e-3, 0.0),
    ("rad/s", Dimension::AngularVelocity, 1.0, 0.0),
    ("rpm", Dimension::AngularVelocity, std::f64::consts::PI / 30.0, 0.0),
    ("rad", Dimension::Angle, 1.0, 0.0),
    ("deg", Dimension::Angle, std::f64::consts::PI / 180.0, 0.0),
    ("kg/m^3", Dimension::Density, 1.0, 0.0),
    ("g/cm^3", Dimension::Density, 1e3, 0.0),
    ("Pa*s", Dimension::Viscosity, 1.0, 0.0),
    ("mPa*s", Dimension::Viscosity, 1e-3, 0.0),
    ("Pa*s^n", Dimension::Consistency, 1.0, 0.0),
    ("Pa*s", Dimension::Consistency, 1.0, 0.0),
    ("K", Dimension::Temperature, 1.0, 0.0),
    ("K", Dimension::ActivationTemperature, 1.0, 0.0),
    ("degC", Dimension::Temperature, 1.0, 273.15),
    ("J/(kg*K)", Dimension::SpecificHeat, 1.0, 0.0),
    ("kJ/(kg*K)", Dimension::SpecificHeat, 1e3, 0.0),
    ("W/(m*K)", Dimension::Conductivity, 1.0, 0.0),
    ("N/m^3", Dimension::ForceDensity, 1.0, 0.0),
    ("W/kg", Dimension::SpecificPower, 1.0, 0.0),
    ("1/s", Dimension::ShearRate, 1.0, 0.0),
];

/// Parses `text` as a quantity of dimension `dim` and returns its SI value.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64, String> {
    let t = text.trim();
    let (num, unit) = match t.find(char::is_whitespace) {
        Some(i) => (&t[..i], t[i..].trim()),
        None => return Err(format!("'{text}' has no unit; expected a {dim} such as '1 {}'", si_unit(dim))),
    };
    let x: f64 = num.parse().map_err(|_| format!("'{num}' is not a number"))?;
    if !x.is_finite() {
        return Err(format!("'{num}' is not finite"));
    }
    let hit = UNITS.iter().find(|u| u.0 == unit && u.1 == dim).or_else(|| UNITS.iter().find(|u| u.0 == unit));
    match hit {
        Some(&(_, d, scale, offset)) if d == dim => Ok(x * scale + offset),
        Some(&(_, d, _, _)) => Err(format!("unit '{unit}' is a {d}, expected a {dim}")),
        None => {
            let known: Vec<&str> = UNITS.iter().filter(|u| u.1 == dim).map(|u| u.0).collect();
            Err(format!("unknown unit '{unit}' for a {dim} (known: {})", known.join(", ")))
        }
    }
}

/// The SI unit string of a dimension.
pub fn si_unit(dim: Dimension) -> &'static str {
    UNITS.iter().find(|u| u.1 == dim && u.2 == 1.0 && u.3 == 0.0).map(|u| u.0).unwrap_or("")
}

/// Formats an SI value with its SI unit, lossless under [`parse_quantity`].
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:?} {}", si_unit(dim))
}
