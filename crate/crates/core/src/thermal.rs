//! Lumped-parameter thermal model of the three-zone heating pad.
//!
//! Each zone has two nodes: the coil (nichrome element plus the polyimide
//! around it) and the pad layer between the coil and the wearer. The three
//! pad nodes share a single skin node. Adjacent coil nodes exchange heat
//! through `inter_zone_conductance`; zone 1 is the middle zone.
//!
//! ```text
//!   P_i -> [coil_i] --G_cp--> [pad_i] --G_ps--> [skin] --G_sa--> ambient
//!             |                  |
//!          G_cl v             G_pa v
//!          ambient            ambient
//! ```

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of independently sensed heating zones.
pub const ZONES: usize = 3;

/// Reading reported by a thermistor whose circuit is open.
pub const OPEN_CIRCUIT_SENTINEL: f64 = -273.0;

/// Highest supply voltage the pad ever sees (fully charged cell).
pub const MAX_SUPPLY_VOLTAGE: f64 = 4.2;

/// Protection limit on total heater current.
pub const MAX_HEATER_CURRENT: f64 = 5.0;

/// Largest integration step the plant accepts.
pub const MAX_DT: f64 = 0.5;

/// Resistivity of NiCr 80/20 heating wire at room temperature.
pub const NICHROME_RESISTIVITY: f64 = 1.10e-6;

/// Diameter of 36 AWG wire.
pub const AWG36_DIAMETER: f64 = 1.27e-4;

/// Length of one heating coil.
pub const COIL_LENGTH: f64 = 0.16;

/// Coils wired in parallel inside one zone.
pub const COILS_PER_ZONE: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum PlantError {
    #[error("plant state is not finite at t = {time}s ({what})")]
    NonFinite { time: f64, what: &'static str },
    #[error("invalid {what}: {value}")]
    InvalidInput { what: &'static str, value: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParams { name: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub ambient: f64,
    /// J/°C per zone.
    pub coil_heat_capacity: f64,
    /// W/°C, coil to its own pad node.
    pub coil_to_pad_conductance: f64,
    /// W/°C, direct coil losses (leads, pad edges).
    pub coil_loss_conductance: f64,
    /// J/°C per zone.
    pub pad_heat_capacity: f64,
    /// W/°C per zone.
    pub pad_to_skin_conductance: f64,
    /// W/°C per zone, outer garment surface.
    pub loss_to_ambient_conductance: f64,
    /// J/°C, the shared skin node.
    pub skin_heat_capacity: f64,
    /// W/°C, skin node to its surroundings.
    pub skin_to_ambient_conductance: f64,
    /// W/°C between neighbouring coil nodes.
    pub inter_zone_conductance: f64,
    /// Ω per zone (three coils in parallel).
    pub coil_resistance: f64,
    /// °C, standard deviation of thermistor noise.
    pub sensor_noise_sd: f64,
}

impl Default for PlantParams {
    /// Uncalibrated starting point. The committed `plant.default.params`
    /// is the calibrated set.
    fn default() -> Self {
        Self {
            ambient: 30.0,
            coil_heat_capacity: 18.0,
            coil_to_pad_conductance: 0.14,
            coil_loss_conductance: 0.004,
            pad_heat_capacity: 5.0,
            pad_to_skin_conductance: 1.0,
            loss_to_ambient_conductance: 0.05,
            skin_heat_capacity: 10.0,
            skin_to_ambient_conductance: 0.1,
            inter_zone_conductance: 0.02,
            coil_resistance: zone_resistance_from_wire(),
            sensor_noise_sd: 0.1,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("coil_heat_capacity", self.coil_heat_capacity),
            ("coil_to_pad_conductance", self.coil_to_pad_conductance),
            ("coil_loss_conductance", self.coil_loss_conductance),
            ("pad_heat_capacity", self.pad_heat_capacity),
            ("pad_to_skin_conductance", self.pad_to_skin_conductance),
            ("loss_to_ambient_conductance", self.loss_to_ambient_conductance),
            ("skin_heat_capacity", self.skin_heat_capacity),
            ("skin_to_ambient_conductance", self.skin_to_ambient_conductance),
            ("inter_zone_conductance", self.inter_zone_conductance),
            ("coil_resistance", self.coil_resistance),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlantError::InvalidParams {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if !(self.sensor_noise_sd.is_finite() && self.sensor_noise_sd >= 0.0) {
            return Err(PlantError::InvalidParams {
                name: "sensor_noise_sd",
                reason: format!("must be finite and >= 0, got {}", self.sensor_noise_sd),
            });
        }
        if !self.ambient.is_finite() {
            return Err(PlantError::InvalidParams {
                name: "ambient",
                reason: "must be finite".into(),
            });
        }
        let current = self.max_total_current();
        if current > MAX_HEATER_CURRENT {
            return Err(PlantError::InvalidParams {
                name: "coil_resistance",
                reason: format!(
                    "all zones at {MAX_SUPPLY_VOLTAGE} V draw {current:.2} A, above the {MAX_HEATER_CURRENT} A limit"
                ),
            });
        }
        Ok(())
    }

    /// Total heater current with every zone on at the highest supply voltage.
    pub fn max_total_current(&self) -> f64 {
        ZONES as f64 * MAX_SUPPLY_VOLTAGE / self.coil_resistance
    }

    /// Fraction of the coil's rise above ambient that reaches the skin at
    /// steady state with all coils held at the same temperature.
    pub fn skin_coupling(&self) -> f64 {
        let n = ZONES as f64;
        let skin_share = n * self.pad_to_skin_conductance
            / (n * self.pad_to_skin_conductance + self.skin_to_ambient_conductance);
        let pad_drain = self.loss_to_ambient_conductance
            + self.pad_to_skin_conductance * (1.0 - skin_share);
        skin_share / (1.0 + pad_drain / self.coil_to_pad_conductance)
    }

    /// Steady-state skin temperature with every coil held at `coil_temp`.
    pub fn steady_skin_temp(&self, coil_temp: f64) -> f64 {
        self.ambient + self.skin_coupling() * (coil_temp - self.ambient)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub time: f64,
    pub zone_coil_temp: [f64; ZONES],
    pub zone_pad_temp: [f64; ZONES],
    pub skin_temp: f64,
    pub ambient_temp: f64,
}

impl PlantState {
    /// Every node at `ambient`, t = 0.
    pub fn at_ambient(ambient: f64) -> Self {
        Self::uniform(ambient, ambient)
    }

    pub fn uniform(temp: f64, ambient: f64) -> Self {
        Self {
            time: 0.0,
            zone_coil_temp: [temp; ZONES],
            zone_pad_temp: [temp; ZONES],
            skin_temp: temp,
            ambient_temp: ambient,
        }
    }

    pub fn max_coil_temp(&self) -> f64 {
        self.zone_coil_temp.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn max_node_temp(&self) -> f64 {
        self.nodes().fold(f64::MIN, f64::max)
    }

    fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        self.zone_coil_temp
            .iter()
            .chain(self.zone_pad_temp.iter())
            .copied()
            .chain(std::iter::once(self.skin_temp))
    }

    /// Heat stored above ambient, in joules.
    pub fn stored_energy(&self, params: &PlantParams) -> f64 {
        let a = self.ambient_temp;
        let coils: f64 = self.zone_coil_temp.iter().map(|t| t - a).sum();
        let pads: f64 = self.zone_pad_temp.iter().map(|t| t - a).sum();
        coils * params.coil_heat_capacity
            + pads * params.pad_heat_capacity
            + (self.skin_temp - a) * params.skin_heat_capacity
    }

    fn check_finite(&self) -> Result<(), PlantError> {
        let fail = |what| PlantError::NonFinite {
            time: self.time,
            what,
        };
        if !self.time.is_finite() {
            return Err(fail("time"));
        }
        if !self.zone_coil_temp.iter().all(|t| t.is_finite()) {
            return Err(fail("coil temperature"));
        }
        if !self.zone_pad_temp.iter().all(|t| t.is_finite()) {
            return Err(fail("pad temperature"));
        }
        if !self.skin_temp.is_finite() {
            return Err(fail("skin temperature"));
        }
        if !self.ambient_temp.is_finite() {
            return Err(fail("ambient temperature"));
        }
        Ok(())
    }
}

/// Joule heating of one zone driven at `duty` from `voltage`.
pub fn electrical_power(duty: f64, voltage: f64, resistance: f64) -> Result<f64, PlantError> {
    if !(resistance > 0.0) {
        return Err(PlantError::InvalidInput {
            what: "resistance",
            value: resistance,
        });
    }
    Ok(duty * voltage * voltage / resistance)
}

/// Resistance of a round wire: ρL / (π d² / 4).
pub fn nichrome_resistance(diameter: f64, length: f64, resistivity: f64) -> Result<f64, PlantError> {
    for (what, value) in [
        ("diameter", diameter),
        ("length", length),
        ("resistivity", resistivity),
    ] {
        if !(value.is_finite() && value > 0.0) {
            return Err(PlantError::InvalidInput { what, value });
        }
    }
    let area = std::f64::consts::PI * diameter * diameter / 4.0;
    Ok(resistivity * length / area)
}

/// Zone resistance implied by the wire spec: three 16 cm coils of 36 AWG
/// nichrome in parallel.
pub fn zone_resistance_from_wire() -> f64 {
    let coil = nichrome_resistance(AWG36_DIAMETER, COIL_LENGTH, NICHROME_RESISTIVITY)
        .expect("wire constants are positive");
    coil / COILS_PER_ZONE as f64
}

/// Advance the plant by `dt` with every zone driven from the same supply.
pub fn step(
    state: &PlantState,
    params: &PlantParams,
    zone_duty: [f64; ZONES],
    supply_voltage: f64,
    dt: f64,
) -> Result<PlantState, PlantError> {
    if !(0.0..=MAX_SUPPLY_VOLTAGE).contains(&supply_voltage) {
        return Err(PlantError::InvalidInput {
            what: "supply voltage",
            value: supply_voltage,
        });
    }
    let mut power = [0.0; ZONES];
    for (p, &duty) in power.iter_mut().zip(zone_duty.iter()) {
        if !(0.0..=1.0).contains(&duty) {
            return Err(PlantError::InvalidInput { what: "duty", value: duty });
        }
        *p = electrical_power(duty, supply_voltage, params.coil_resistance)?;
    }
    step_with_power(state, params, power, dt)
}

/// Advance the plant by `dt` given the electrical power dissipated in each
/// zone. Explicit Euler.
pub fn step_with_power(
    state: &PlantState,
    params: &PlantParams,
    zone_power: [f64; ZONES],
    dt: f64,
) -> Result<PlantState, PlantError> {
    state.check_finite()?;
    if !(dt > 0.0 && dt <= MAX_DT) {
        return Err(PlantError::InvalidInput { what: "dt", value: dt });
    }
    if let Some(&bad) = zone_power.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(PlantError::InvalidInput {
            what: "zone power",
            value: bad,
        });
    }

    let a = state.ambient_temp;
    let coil = &state.zone_coil_temp;
    let pad = &state.zone_pad_temp;
    let skin = state.skin_temp;
    let mut next = *state;

    let mut skin_in = 0.0;
    for z in 0..ZONES {
        let to_pad = params.coil_to_pad_conductance * (coil[z] - pad[z]);
        let mut coil_flow = zone_power[z] - to_pad - params.coil_loss_conductance * (coil[z] - a);
        if z > 0 {
            coil_flow -= params.inter_zone_conductance * (coil[z] - coil[z - 1]);
        }
        if z + 1 < ZONES {
            coil_flow -= params.inter_zone_conductance * (coil[z] - coil[z + 1]);
        }
        let to_skin = params.pad_to_skin_conductance * (pad[z] - skin);
        let pad_flow = to_pad - to_skin - params.loss_to_ambient_conductance * (pad[z] - a);
        skin_in += to_skin;

        next.zone_coil_temp[z] = coil[z] + dt * coil_flow / params.coil_heat_capacity;
        next.zone_pad_temp[z] = pad[z] + dt * pad_flow / params.pad_heat_capacity;
    }
    let skin_flow = skin_in - params.skin_to_ambient_conductance * (skin - a);
    next.skin_temp = skin + dt * skin_flow / params.skin_heat_capacity;
    next.time = state.time + dt;
    next.check_finite()?;
    Ok(next)
}

/// First time the hottest coil reaches `rise_to`, driving every zone at full
/// duty from a fixed supply, starting with all nodes at `rise_from`.
pub fn rise_time_fixed_supply(
    params: &PlantParams,
    rise_from: f64,
    rise_to: f64,
    supply_voltage: f64,
    dt: f64,
    horizon: f64,
) -> Result<Option<f64>, PlantError> {
    let mut state = PlantState::uniform(rise_from, params.ambient);
    while state.time < horizon {
        state = step(&state, params, [1.0; ZONES], supply_voltage, dt)?;
        if state.max_coil_temp() >= rise_to {
            return Ok(Some(state.time));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FaultKind {
    None,
    Stuck { value: f64 },
    /// °C/s added to the true reading from `active_from` on.
    Drift { rate: f64 },
    OpenCircuit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorFault {
    pub kind: FaultKind,
    pub zone: usize,
    pub active_from: f64,
}

impl SensorFault {
    pub const NONE: SensorFault = SensorFault {
        kind: FaultKind::None,
        zone: 0,
        active_from: 0.0,
    };

    pub fn new(kind: FaultKind, zone: usize, active_from: f64) -> Result<Self, PlantError> {
        if zone >= ZONES {
            return Err(PlantError::InvalidInput {
                what: "fault zone",
                value: zone as f64,
            });
        }
        if !(active_from.is_finite() && active_from >= 0.0) {
            return Err(PlantError::InvalidInput {
                what: "fault start",
                value: active_from,
            });
        }
        Ok(Self {
            kind,
            zone,
            active_from,
        })
    }
}

/// Reading of one zone's thermistor. A noise sample is drawn on every call,
/// faulted or not, so the noise stream does not depend on the fault script.
///
/// Panics if `zone` is out of range.
pub fn thermistor_read<R: Rng + ?Sized>(
    state: &PlantState,
    params: &PlantParams,
    zone: usize,
    fault: &SensorFault,
    rng: &mut R,
) -> f64 {
    assert!(zone < ZONES, "zone {zone} out of range");
    let truth = state.zone_coil_temp[zone];
    let noise = if params.sensor_noise_sd > 0.0 {
        Normal::new(0.0, params.sensor_noise_sd)
            .expect("sd validated")
            .sample(rng)
    } else {
        0.0
    };
    let active = fault.zone == zone && state.time >= fault.active_from;
    match fault.kind {
        FaultKind::Stuck { value } if active => value,
        FaultKind::Drift { rate } if active => truth + rate * (state.time - fault.active_from) + noise,
        FaultKind::OpenCircuit if active => OPEN_CIRCUIT_SENTINEL,
        _ => truth + noise,
    }
}
