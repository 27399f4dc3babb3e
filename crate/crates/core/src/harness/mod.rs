//! Scenario runner: plant at 0.1 s, firmware at 0.5 s, zero-order hold on
//! the duties in between.

mod rig;
mod scenario;
mod summary;
mod trace;

pub use rig::{Rig, TickRecord, PLANT_DT, SUBSTEPS, TICK_DT};
pub use scenario::{Action, Event, Scenario, ScenarioError};
pub use summary::{hold_window, summarize, unexpected_anomalies, AnomalyEvent, Summary, SETTLE_S, STEADY_WINDOW_S};
pub use trace::{Trace, TraceRow, COLUMNS};

use thiserror::Error;

use crate::battery::BatteryParams;
use crate::firmware::FirmwareConfig;
use crate::thermal::{PlantError, PlantParams};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("setting up the rig: {0}")]
    Setup(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// Substep index at which an event stamped `at` seconds takes effect.
fn substep_of(at: f64) -> u64 {
    (at / PLANT_DT - 1e-9).ceil().max(0.0) as u64
}

pub fn apply(rig: &mut Rig, action: &Action) {
    match action {
        Action::Link(up) => rig.set_link(*up),
        Action::Send(bytes) => rig.send(bytes),
        Action::Inject { zone, fault } => rig.inject(*zone, *fault),
        Action::CoilResistance { zone, ohms } => rig.set_coil_resistance(*zone, *ohms),
        Action::SetAmbient(a) => rig.set_ambient(*a),
        Action::BenchDrive(d) => rig.set_bench_drive(*d),
    }
}

/// Run `scenario` and call `observe` with every tick record.
pub fn run_with(
    scenario: &Scenario,
    params: &PlantParams,
    cell: &BatteryParams,
    seed: u64,
    mut observe: impl FnMut(&Rig, &TickRecord),
) -> Result<Trace, RunError> {
    scenario.validate()?;
    let config = FirmwareConfig::new(scenario.secret.as_bytes());
    let mut rig = Rig::new(*params, *cell, config, scenario.initial_soc, scenario.ambient, seed)
        .map_err(RunError::Setup)?;
    let events: Vec<(u64, &Action)> = scenario.events.iter().map(|e| (substep_of(e.at), &e.action)).collect();
    let mut next = 0;
    let mut trace = Trace::default();
    for _ in 0..scenario.tick_count() {
        let rec = rig.tick_with(|rig, sub| {
            while let Some(&(at, action)) = events.get(next) {
                if at > sub {
                    break;
                }
                apply(rig, action);
                next += 1;
            }
        })?;
        observe(&rig, &rec);
        trace.rows.push(TraceRow::from_record(&rec));
    }
    Ok(trace)
}

pub fn run(scenario: &Scenario, params: &PlantParams, cell: &BatteryParams, seed: u64) -> Result<Trace, RunError> {
    run_with(scenario, params, cell, seed, |_, _| {})
}
