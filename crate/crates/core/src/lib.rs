//! Digital twin of a three-zone battery heating pad: thermal plant, cell,
//! firmware, wire protocol and the scenario harness that ties them together.

pub mod battery;
pub mod calibrate;
pub mod firmware;
pub mod harness;
pub mod params_file;
pub mod protocol;
pub mod thermal;
