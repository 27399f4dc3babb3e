use serde::Serialize;

use crate::battery::BatteryState;
use crate::thermal::{OPEN_CIRCUIT_SENTINEL, ZONES};

/// Population standard deviation above which heating stops.
pub const STDDEV_TRIP: f64 = 2.5;
pub const COIL_CAP: f64 = 55.0;
/// A reading this far above the cap latches the device.
pub const OVERSHOOT_ALLOWANCE: f64 = 0.5;
/// Readings at or below this are treated as a disconnected thermistor.
pub const OPEN_CIRCUIT_THRESHOLD: f64 = -200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum AnomalyCode {
    SigmaTrip,
    OverTemp,
    LinkLost,
    SensorOpenCircuit,
    Overcurrent,
    BatteryLow,
    AuthFailure,
}

impl AnomalyCode {
    pub const ALL: [AnomalyCode; 7] = [
        AnomalyCode::SigmaTrip,
        AnomalyCode::OverTemp,
        AnomalyCode::LinkLost,
        AnomalyCode::SensorOpenCircuit,
        AnomalyCode::Overcurrent,
        AnomalyCode::BatteryLow,
        AnomalyCode::AuthFailure,
    ];

    pub fn code(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get((code as usize).checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            AnomalyCode::SigmaTrip => "SigmaTrip",
            AnomalyCode::OverTemp => "OverTemp",
            AnomalyCode::LinkLost => "LinkLost",
            AnomalyCode::SensorOpenCircuit => "SensorOpenCircuit",
            AnomalyCode::Overcurrent => "Overcurrent",
            AnomalyCode::BatteryLow => "BatteryLow",
            AnomalyCode::AuthFailure => "AuthFailure",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name().eq_ignore_ascii_case(name))
    }

    /// Trips that put the device in `SafetyLatched`.
    pub fn latches(self) -> bool {
        matches!(
            self,
            AnomalyCode::SigmaTrip
                | AnomalyCode::OverTemp
                | AnomalyCode::SensorOpenCircuit
                | AnomalyCode::Overcurrent
        )
    }
}

impl std::fmt::Display for AnomalyCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SafetyLimits {
    pub tick_hz: f64,
    pub link_timeout_s: f64,
    pub low_battery_soc: f64,
    /// Sessions longer than this raise a warning flag; heating continues.
    pub max_session_s: f64,
    pub hysteresis: f64,
}

impl Default for SafetyLimits {
    fn default() -> Self {
        Self {
            tick_hz: 2.0,
            link_timeout_s: 3.0,
            low_battery_soc: 0.10,
            max_session_s: 8.0 * 60.0,
            hysteresis: 0.5,
        }
    }
}

impl SafetyLimits {
    pub fn stddev_trip(&self) -> f64 {
        STDDEV_TRIP
    }

    pub fn coil_cap(&self) -> f64 {
        COIL_CAP
    }

    pub fn tick_s(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn ticks(&self, seconds: f64) -> u32 {
        (seconds * self.tick_hz).round() as u32
    }
}

/// `√(Σ(xᵢ−μ)²/N)` over the three zone readings.
pub fn stddev(readings: [f64; ZONES]) -> f64 {
    let n = ZONES as f64;
    let mean = readings.iter().sum::<f64>() / n;
    (readings.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn is_open_circuit(reading: f64) -> bool {
    !reading.is_finite() || reading <= OPEN_CIRCUIT_THRESHOLD
}

/// Every violated condition, in a fixed order. Empty means heating may
/// proceed. Non-finite readings are handled as open circuits.
pub fn check_safety(
    readings: [f64; ZONES],
    limits: &SafetyLimits,
    link_ok: bool,
    battery: &BatteryState,
) -> Vec<AnomalyCode> {
    let open = readings.iter().any(|&r| is_open_circuit(r));
    let sane = readings.map(|r| if is_open_circuit(r) { OPEN_CIRCUIT_SENTINEL } else { r });
    let mut trips = Vec::new();
    if stddev(sane) > limits.stddev_trip() {
        trips.push(AnomalyCode::SigmaTrip);
    }
    if sane.iter().any(|&r| r > limits.coil_cap()) {
        trips.push(AnomalyCode::OverTemp);
    }
    if open {
        trips.push(AnomalyCode::SensorOpenCircuit);
    }
    if !link_ok {
        trips.push(AnomalyCode::LinkLost);
    }
    if battery.overcurrent {
        trips.push(AnomalyCode::Overcurrent);
    }
    if battery.depleted {
        trips.push(AnomalyCode::BatteryLow);
    }
    trips
}
