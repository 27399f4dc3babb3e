use serde::Serialize;

use super::safety::COIL_CAP;

/// Thermal offset between coil and skin through the pad stack.
pub const COIL_SKIN_OFFSET: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum HeatLevel {
    Low,
    Medium,
    High,
}

impl HeatLevel {
    pub const ALL: [HeatLevel; 3] = [HeatLevel::Low, HeatLevel::Medium, HeatLevel::High];

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn skin_setpoint(self) -> f64 {
        match self {
            HeatLevel::Low => 38.0,
            HeatLevel::Medium => 42.0,
            HeatLevel::High => 46.0,
        }
    }

    /// Skin target plus the pad offset, pulled down so the top of the
    /// hysteresis band sits on the cap.
    pub fn coil_setpoint(self, hysteresis: f64) -> f64 {
        (self.skin_setpoint() + COIL_SKIN_OFFSET).min(COIL_CAP - hysteresis)
    }
}

/// Bang-bang with a dead band: on below `setpoint - hysteresis`, off above
/// `setpoint + hysteresis`, otherwise keep `previous`.
pub fn regulate(reading: f64, setpoint: f64, hysteresis: f64, previous: f64) -> f64 {
    if reading < setpoint - hysteresis {
        1.0
    } else if reading > setpoint + hysteresis {
        0.0
    } else {
        previous
    }
}
