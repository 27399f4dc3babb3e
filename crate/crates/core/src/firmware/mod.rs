//! 2 Hz control and safety state machine.

mod auth;
mod control;
mod machine;
mod safety;

pub use auth::{authenticate, AuthOutcome, MAX_AUTH_FAILURES};
pub use control::{regulate, HeatLevel, COIL_SKIN_OFFSET};
pub use machine::{tick, FirmwareConfig, FirmwareMode, FirmwareSnapshot, LinkState, NackReason};
pub use safety::{
    check_safety, is_open_circuit, stddev, AnomalyCode, SafetyLimits, COIL_CAP, OPEN_CIRCUIT_THRESHOLD,
    OVERSHOOT_ALLOWANCE, STDDEV_TRIP,
};
