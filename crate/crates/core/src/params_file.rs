//! Flat `name = value` text files used for plant parameters and
//! calibration targets. `#` starts a comment; blank lines are ignored.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::thermal::{PlantError, PlantParams};

#[derive(Debug, Error)]
pub enum ParamsFileError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `name = value`")]
    Syntax { line: usize },
    #[error("line {line}: `{name}` is not a number: {value}")]
    NotANumber {
        line: usize,
        name: String,
        value: String,
    },
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing key `{0}`")]
    Missing(&'static str),
    #[error(transparent)]
    Invalid(#[from] PlantError),
}

/// Parse into an ordered map of numeric values.
pub fn parse_numbers(text: &str) -> Result<BTreeMap<String, f64>, ParamsFileError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (name, value) = line
            .split_once('=')
            .ok_or(ParamsFileError::Syntax { line: idx + 1 })?;
        let name = name.trim();
        let value = value.trim();
        if name.is_empty() {
            return Err(ParamsFileError::Syntax { line: idx + 1 });
        }
        let number: f64 = value.parse().map_err(|_| ParamsFileError::NotANumber {
            line: idx + 1,
            name: name.to_string(),
            value: value.to_string(),
        })?;
        if out.insert(name.to_string(), number).is_some() {
            return Err(ParamsFileError::Duplicate(name.to_string()));
        }
    }
    Ok(out)
}

fn fields(p: &mut PlantParams) -> [(&'static str, &mut f64); 12] {
    [
        ("ambient", &mut p.ambient),
        ("coil_heat_capacity", &mut p.coil_heat_capacity),
        ("coil_to_pad_conductance", &mut p.coil_to_pad_conductance),
        ("coil_loss_conductance", &mut p.coil_loss_conductance),
        ("pad_heat_capacity", &mut p.pad_heat_capacity),
        ("pad_to_skin_conductance", &mut p.pad_to_skin_conductance),
        ("loss_to_ambient_conductance", &mut p.loss_to_ambient_conductance),
        ("skin_heat_capacity", &mut p.skin_heat_capacity),
        ("skin_to_ambient_conductance", &mut p.skin_to_ambient_conductance),
        ("inter_zone_conductance", &mut p.inter_zone_conductance),
        ("coil_resistance", &mut p.coil_resistance),
        ("sensor_noise_sd", &mut p.sensor_noise_sd),
    ]
}

const UNITS: [&str; 12] = [
    "°C", "J/°C", "W/°C", "W/°C", "J/°C", "W/°C", "W/°C", "J/°C", "W/°C", "W/°C", "ohm", "°C",
];

/// Every key must be present exactly once.
pub fn parse_plant_params(text: &str) -> Result<PlantParams, ParamsFileError> {
    let mut values = parse_numbers(text)?;
    let mut params = PlantParams::default();
    for (name, slot) in fields(&mut params) {
        *slot = values.remove(name).ok_or(ParamsFileError::Missing(name))?;
    }
    if let Some(extra) = values.into_keys().next() {
        return Err(ParamsFileError::UnknownKey(extra));
    }
    params.validate()?;
    Ok(params)
}

pub fn load_plant_params(path: impl AsRef<Path>) -> Result<PlantParams, ParamsFileError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ParamsFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_plant_params(&text)
}

/// `{:?}` on f64 is the shortest representation that parses back exactly.
pub fn format_plant_params(params: &PlantParams, header: &str) -> String {
    let mut copy = *params;
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    for ((name, value), unit) in fields(&mut copy).into_iter().zip(UNITS) {
        let _ = writeln!(out, "{name} = {:?}  # {unit}", *value);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let p = PlantParams {
            coil_heat_capacity: 18.123456789012345,
            ..PlantParams::default()
        };
        let text = format_plant_params(&p, "test\nsecond line");
        assert_eq!(parse_plant_params(&text).unwrap(), p);
    }

    #[test]
    fn rejects_malformed() {
        let good = format_plant_params(&PlantParams::default(), "");
        assert!(matches!(
            parse_plant_params(&format!("{good}bogus\n")),
            Err(ParamsFileError::Syntax { line: 13 })
        ));
        assert!(matches!(
            parse_plant_params(&format!("{good}extra = 1\n")),
            Err(ParamsFileError::UnknownKey(_))
        ));
        assert!(matches!(
            parse_plant_params(&format!("{good}ambient = 1\n")),
            Err(ParamsFileError::Duplicate(_))
        ));
        let missing: String = good.lines().filter(|l| !l.starts_with("ambient")).map(|l| format!("{l}\n")).collect();
        assert!(matches!(parse_plant_params(&missing), Err(ParamsFileError::Missing("ambient"))));
        let nan = good.replace("sensor_noise_sd = 0.1", "sensor_noise_sd = abc");
        assert!(matches!(parse_plant_params(&nan), Err(ParamsFileError::NotANumber { .. })));
        let invalid = good.replace("pad_heat_capacity = 5.0", "pad_heat_capacity = 0");
        assert!(matches!(parse_plant_params(&invalid), Err(ParamsFileError::Invalid(_))));
    }
}
