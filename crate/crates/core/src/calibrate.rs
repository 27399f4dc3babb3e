//! Fits the free plant parameters to the measured heating behaviour:
//! full-power battery runtime (coil resistance), coil-to-skin offset
//! (coil-to-pad conductance) and warm-up time (coil heat capacity).

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::battery::{self, BatteryParams, BatteryState};
use crate::params_file::{parse_numbers, ParamsFileError};
use crate::thermal::{self, PlantError, PlantParams, PlantState, MAX_HEATER_CURRENT, MAX_SUPPLY_VOLTAGE, ZONES};

pub const RISE_TOLERANCE: f64 = 0.05;
pub const OFFSET_TOLERANCE: f64 = 1.0;
pub const RUNTIME_TOLERANCE: f64 = 0.01;
const SIM_DT: f64 = 0.1;
const MAX_ROUNDS: usize = 8;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("inconsistent targets: {0}")]
    InconsistentTargets(String),
    #[error(
        "no parameters found: rise residual {rise_residual_s:.2} s, offset residual {offset_residual_c:.2} °C, runtime residual {runtime_residual_s:.1} s"
    )]
    NotConverged {
        rise_residual_s: f64,
        offset_residual_c: f64,
        runtime_residual_s: f64,
        best: Box<PlantParams>,
    },
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    File(#[from] ParamsFileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationTargets {
    pub rise_s: f64,
    pub rise_from: f64,
    pub rise_to: f64,
    pub coil_skin_offset: f64,
    pub ambient: f64,
    /// Seconds from full to empty with every zone at full duty. When absent
    /// the coil resistance comes from the wire spec.
    pub full_power_runtime_s: Option<f64>,
}

impl Default for CalibrationTargets {
    fn default() -> Self {
        Self {
            rise_s: 90.0,
            rise_from: 30.0,
            rise_to: 55.0,
            coil_skin_offset: 10.0,
            ambient: 30.0,
            full_power_runtime_s: Some(1800.0),
        }
    }
}

impl CalibrationTargets {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::InconsistentTargets(m));
        if !(self.rise_to > self.rise_from) {
            return bad(format!(
                "rise_to ({}) must exceed rise_from ({})",
                self.rise_to, self.rise_from
            ));
        }
        if !(self.rise_s > 0.0) {
            return bad(format!("rise_s must be positive, got {}", self.rise_s));
        }
        if !(self.coil_skin_offset > 0.0 && self.coil_skin_offset < self.rise_to - self.ambient) {
            return bad(format!(
                "coil_skin_offset {} must lie between 0 and the coil rise above ambient",
                self.coil_skin_offset
            ));
        }
        if let Some(rt) = self.full_power_runtime_s {
            if !(rt > 0.0) {
                return bad(format!("full_power_runtime_s must be positive, got {rt}"));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, CalibrationError> {
        let mut values = parse_numbers(text)?;
        let mut t = CalibrationTargets {
            full_power_runtime_s: None,
            ..Default::default()
        };
        for (name, slot) in [
            ("rise_s", &mut t.rise_s),
            ("rise_from", &mut t.rise_from),
            ("rise_to", &mut t.rise_to),
            ("coil_skin_offset", &mut t.coil_skin_offset),
            ("ambient", &mut t.ambient),
        ] {
            *slot = values.remove(name).ok_or(ParamsFileError::Missing(name))?;
        }
        t.full_power_runtime_s = values.remove("full_power_runtime_s");
        if let Some(extra) = values.into_keys().next() {
            return Err(ParamsFileError::UnknownKey(extra).into());
        }
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ParamsFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Calibration {
    pub params: PlantParams,
    pub rise_s: f64,
    pub offset_c: f64,
    pub full_power_runtime_s: f64,
}

/// Warm-up time from a full cell under load: every zone at full duty, the
/// supply sagging with the cell's internal resistance and state of charge.
pub fn rise_time_on_battery(
    params: &PlantParams,
    cell: &BatteryParams,
    rise_from: f64,
    rise_to: f64,
    horizon: f64,
) -> Result<Option<f64>, PlantError> {
    let mut plant = PlantState::uniform(rise_from, params.ambient);
    let mut bat = BatteryState::full(cell);
    let conductance = ZONES as f64 / params.coil_resistance;
    while plant.time < horizon {
        let (current, voltage) = battery::resistive_load(&bat, cell, conductance);
        let zone_power = voltage * voltage / params.coil_resistance;
        plant = thermal::step_with_power(&plant, params, [zone_power; ZONES], SIM_DT)?;
        bat = battery::draw(&bat, cell, current.min(cell.max_current), SIM_DT)
            .expect("current clamped to limit");
        if plant.max_coil_temp() >= rise_to {
            return Ok(Some(plant.time));
        }
    }
    Ok(None)
}

/// Seconds until a full cell is empty with all zones at full duty.
pub fn full_power_runtime(coil_resistance: f64, cell: &BatteryParams) -> f64 {
    let dt = 0.5;
    let conductance = ZONES as f64 / coil_resistance;
    let mut bat = BatteryState::full(cell);
    let mut t = 0.0;
    while !bat.depleted && t < 1.0e6 {
        let (current, _) = battery::resistive_load(&bat, cell, conductance);
        bat = battery::draw(&bat, cell, current.min(cell.max_current), dt).expect("clamped");
        t += dt;
    }
    t
}

fn bisect(mut lo: f64, mut hi: f64, iters: usize, mut too_high: impl FnMut(f64) -> bool) -> f64 {
    for _ in 0..iters {
        let mid = (lo * hi).sqrt();
        if too_high(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo * hi).sqrt()
}

/// Coordinate search over (coil resistance, coil-to-pad conductance, coil
/// heat capacity). All other fields of `base` are kept.
pub fn calibrate(
    targets: &CalibrationTargets,
    base: &PlantParams,
    cell: &BatteryParams,
) -> Result<Calibration, CalibrationError> {
    targets.validate()?;
    let mut p = PlantParams {
        ambient: targets.ambient,
        ..*base
    };
    let min_resistance = ZONES as f64 * MAX_SUPPLY_VOLTAGE / MAX_HEATER_CURRENT;

    if let Some(runtime) = targets.full_power_runtime_s {
        // runtime grows with resistance
        p.coil_resistance = bisect(min_resistance, 1000.0, 60, |r| full_power_runtime(r, cell) > runtime);
    } else {
        p.coil_resistance = thermal::zone_resistance_from_wire();
    }

    let horizon = targets.rise_s * 20.0;
    let mut rise = f64::NAN;
    let mut offset = f64::NAN;
    for _ in 0..MAX_ROUNDS {
        // offset shrinks as the coil couples more tightly to the pad
        let rise_above = targets.rise_to - targets.ambient;
        p.coil_to_pad_conductance = bisect(1e-4, 1e3, 80, |g| {
            let trial = PlantParams {
                coil_to_pad_conductance: g,
                ..p
            };
            rise_above * (1.0 - trial.skin_coupling()) < targets.coil_skin_offset
        });
        offset = targets.rise_to - p.steady_skin_temp(targets.rise_to);

        // rise time grows with coil heat capacity
        let mut err = None;
        p.coil_heat_capacity = bisect(1e-2, 1e4, 60, |c| {
            let trial = PlantParams {
                coil_heat_capacity: c,
                ..p
            };
            match rise_time_on_battery(&trial, cell, targets.rise_from, targets.rise_to, horizon) {
                Ok(Some(t)) => t > targets.rise_s,
                Ok(None) => true,
                Err(e) => {
                    err = Some(e);
                    true
                }
            }
        });
        if let Some(e) = err {
            return Err(e.into());
        }
        rise = rise_time_on_battery(&p, cell, targets.rise_from, targets.rise_to, horizon)?
            .unwrap_or(f64::INFINITY);
        if within(rise, offset, targets) {
            break;
        }
    }

    let runtime = full_power_runtime(p.coil_resistance, cell);
    let runtime_ok = targets
        .full_power_runtime_s
        .is_none_or(|t| ((runtime - t) / t).abs() <= RUNTIME_TOLERANCE);
    if !within(rise, offset, targets) || !runtime_ok || p.validate().is_err() {
        return Err(CalibrationError::NotConverged {
            rise_residual_s: rise - targets.rise_s,
            offset_residual_c: offset - targets.coil_skin_offset,
            runtime_residual_s: targets.full_power_runtime_s.map_or(0.0, |t| runtime - t),
            best: Box::new(p),
        });
    }
    Ok(Calibration {
        params: p,
        rise_s: rise,
        offset_c: offset,
        full_power_runtime_s: runtime,
    })
}

fn within(rise: f64, offset: f64, t: &CalibrationTargets) -> bool {
    ((rise - t.rise_s) / t.rise_s).abs() <= RISE_TOLERANCE
        && (offset - t.coil_skin_offset).abs() <= OFFSET_TOLERANCE
}
