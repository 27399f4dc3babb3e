//! Coulomb-counting model of the single 2200 mAh LiPo cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CAPACITY_MAH: f64 = 2200.0;
pub const FULL_VOLTAGE: f64 = 4.2;
pub const EMPTY_VOLTAGE: f64 = 3.3;
/// Open-circuit voltage at the low-battery knee.
pub const KNEE_VOLTAGE: f64 = 3.7;
pub const KNEE_SOC: f64 = 0.10;

#[derive(Debug, Error, PartialEq)]
pub enum BatteryError {
    #[error("overcurrent: {current:.2} A exceeds the {limit} A protection limit")]
    Overcurrent { current: f64, limit: f64 },
    #[error("invalid {what}: {value}")]
    Domain { what: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryParams {
    pub capacity_mah: f64,
    /// Ω, series resistance of the cell and its protection FET.
    pub internal_resistance: f64,
    /// A, protection limit.
    pub max_current: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        Self {
            capacity_mah: CAPACITY_MAH,
            internal_resistance: 0.015,
            max_current: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub charge_mah: f64,
    pub terminal_voltage: f64,
    /// A, most recent draw.
    pub current: f64,
    pub soc: f64,
    pub depleted: bool,
    /// Set when the protection circuit cut the load for overcurrent.
    pub overcurrent: bool,
}

impl BatteryState {
    pub fn with_soc(params: &BatteryParams, soc: f64) -> Result<Self, BatteryError> {
        let voltage = ocv(soc)?;
        let charge = soc * params.capacity_mah;
        Ok(Self {
            charge_mah: charge,
            terminal_voltage: voltage,
            current: 0.0,
            soc,
            depleted: charge <= 0.0,
            overcurrent: false,
        })
    }

    pub fn full(params: &BatteryParams) -> Self {
        Self::with_soc(params, 1.0).expect("soc 1 is in range")
    }

    pub fn open_circuit_voltage(&self) -> f64 {
        ocv(self.soc.clamp(0.0, 1.0)).expect("clamped")
    }

    /// The protection circuit opened: no current flows until reset.
    pub fn trip_overcurrent(mut self) -> Self {
        self.overcurrent = true;
        self.current = 0.0;
        self.terminal_voltage = self.open_circuit_voltage();
        self
    }
}

/// Piecewise-linear open-circuit voltage: 3.3 V empty, 3.7 V at 10 %,
/// 4.2 V full.
pub fn ocv(soc: f64) -> Result<f64, BatteryError> {
    if !(0.0..=1.0).contains(&soc) {
        return Err(BatteryError::Domain { what: "soc", value: soc });
    }
    Ok(if soc >= KNEE_SOC {
        KNEE_VOLTAGE + (soc - KNEE_SOC) / (1.0 - KNEE_SOC) * (FULL_VOLTAGE - KNEE_VOLTAGE)
    } else {
        EMPTY_VOLTAGE + soc / KNEE_SOC * (KNEE_VOLTAGE - EMPTY_VOLTAGE)
    })
}

/// Current and terminal voltage when a resistive load of `conductance`
/// siemens hangs across the cell.
pub fn resistive_load(state: &BatteryState, params: &BatteryParams, conductance: f64) -> (f64, f64) {
    if state.depleted || state.overcurrent || conductance <= 0.0 {
        return (0.0, state.open_circuit_voltage());
    }
    let open = state.open_circuit_voltage();
    let current = open * conductance / (1.0 + params.internal_resistance * conductance);
    (current, open - current * params.internal_resistance)
}

/// Remove `current · dt` of charge.
pub fn draw(
    state: &BatteryState,
    params: &BatteryParams,
    current: f64,
    dt: f64,
) -> Result<BatteryState, BatteryError> {
    if !(current.is_finite() && current >= 0.0) {
        return Err(BatteryError::Domain {
            what: "current",
            value: current,
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(BatteryError::Domain { what: "dt", value: dt });
    }
    if current > params.max_current {
        return Err(BatteryError::Overcurrent {
            current,
            limit: params.max_current,
        });
    }
    let removed = current * dt / 3600.0 * 1000.0;
    let mut next = *state;
    next.charge_mah = (state.charge_mah - removed).max(0.0);
    next.depleted = next.charge_mah <= 0.0;
    next.soc = (next.charge_mah / params.capacity_mah).clamp(0.0, 1.0);
    next.current = if state.depleted { 0.0 } else { current };
    next.terminal_voltage = (ocv(next.soc)? - next.current * params.internal_resistance)
        .clamp(EMPTY_VOLTAGE, FULL_VOLTAGE);
    Ok(next)
}
