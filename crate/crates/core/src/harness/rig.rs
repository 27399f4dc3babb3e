//! One simulated device: plant, cell, firmware and the byte link to the app.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::battery::{self, BatteryParams, BatteryState};
use crate::firmware::{self, AnomalyCode, FirmwareConfig, FirmwareMode, FirmwareSnapshot};
use crate::protocol::{self, Decoder, Message};
use crate::thermal::{self, FaultKind, PlantError, PlantParams, PlantState, SensorFault, ZONES};

pub const SUBSTEPS: u64 = 5;
pub const PLANT_DT: f64 = 0.1;
pub const TICK_DT: f64 = PLANT_DT * SUBSTEPS as f64;

/// What happened on one 0.5 s control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub time: f64,
    pub coil: [f64; ZONES],
    pub readings: [f64; ZONES],
    pub skin: f64,
    pub duty_bits: u8,
    /// Mean electrical power over the tick, W.
    pub power_w: f64,
    pub soc: f64,
    pub voltage: f64,
    pub mode: FirmwareMode,
    /// Raised by the firmware on this tick, delivered or not.
    pub anomalies: Vec<AnomalyCode>,
    /// Device-to-app bytes emitted on this tick.
    pub outbound: Vec<u8>,
    pub replies: Vec<Message>,
}

#[derive(Debug, Clone)]
pub struct Rig {
    params: PlantParams,
    cell: BatteryParams,
    config: FirmwareConfig,
    plant: PlantState,
    battery: BatteryState,
    fw: FirmwareSnapshot,
    faults: [SensorFault; ZONES],
    coil_override: [Option<f64>; ZONES],
    bench: Option<f64>,
    link_up: bool,
    inbound: Vec<u8>,
    rx: Decoder,
    rng: ChaCha8Rng,
    substeps: u64,
}

impl Rig {
    pub fn new(
        params: PlantParams,
        cell: BatteryParams,
        config: FirmwareConfig,
        initial_soc: f64,
        ambient: f64,
        seed: u64,
    ) -> Result<Self, String> {
        params.validate().map_err(|e| e.to_string())?;
        let battery = BatteryState::with_soc(&cell, initial_soc).map_err(|e| e.to_string())?;
        let params = PlantParams { ambient, ..params };
        Ok(Self {
            plant: PlantState::at_ambient(ambient),
            params,
            cell,
            config,
            battery,
            fw: FirmwareSnapshot {
                battery_soc: initial_soc,
                ..FirmwareSnapshot::default()
            },
            faults: std::array::from_fn(|z| SensorFault { zone: z, ..SensorFault::NONE }),
            coil_override: [None; ZONES],
            bench: None,
            link_up: false,
            inbound: Vec::new(),
            rx: Decoder::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            substeps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.substeps as f64 / 10.0
    }

    pub fn substep_index(&self) -> u64 {
        self.substeps
    }

    pub fn plant(&self) -> &PlantState {
        &self.plant
    }

    pub fn battery(&self) -> &BatteryState {
        &self.battery
    }

    pub fn firmware(&self) -> &FirmwareSnapshot {
        &self.fw
    }

    pub fn params(&self) -> &PlantParams {
        &self.params
    }

    pub fn link_up(&self) -> bool {
        self.link_up
    }

    pub fn decode_stats(&self) -> protocol::DecodeStats {
        self.rx.stats()
    }

    pub fn set_link(&mut self, up: bool) {
        self.link_up = up;
    }

    /// App-to-device bytes. Lost if the link is down when the next tick runs.
    pub fn send(&mut self, bytes: &[u8]) {
        self.inbound.extend_from_slice(bytes);
    }

    pub fn inject(&mut self, zone: usize, kind: FaultKind) {
        self.faults[zone] = SensorFault {
            kind,
            zone,
            active_from: self.time(),
        };
    }

    pub fn set_coil_resistance(&mut self, zone: usize, ohms: Option<f64>) {
        self.coil_override[zone] = ohms;
    }

    pub fn set_ambient(&mut self, ambient: f64) {
        self.params.ambient = ambient;
        self.plant.ambient_temp = ambient;
    }

    pub fn set_bench_drive(&mut self, duty: Option<f64>) {
        self.bench = duty;
    }

    fn resistance(&self, zone: usize) -> f64 {
        self.coil_override[zone].unwrap_or(self.params.coil_resistance)
    }

    pub fn tick(&mut self) -> Result<TickRecord, PlantError> {
        self.tick_with(|_, _| {})
    }

    /// Run one control tick. `before_substep` is called with the rig and the
    /// substep index before the firmware reads its sensors and again before
    /// each later plant substep, so scripted events land within one step of
    /// their timestamp.
    pub fn tick_with(
        &mut self,
        mut before_substep: impl FnMut(&mut Self, u64),
    ) -> Result<TickRecord, PlantError> {
        before_substep(self, self.substeps);
        let time = self.time();
        let readings: [f64; ZONES] = std::array::from_fn(|z| {
            thermal::thermistor_read(&self.plant, &self.params, z, &self.faults[z], &mut self.rng)
        });

        let inbound = std::mem::take(&mut self.inbound);
        let inbox = if self.link_up { self.rx.push(&inbound) } else { Vec::new() };
        let (fw, outbox) = firmware::tick(&self.fw, &self.config, readings, &self.battery, self.link_up, &inbox);
        self.fw = fw;
        let anomalies = self.fw.raised.clone();

        // the protection FET recloses once the load is gone
        if self.battery.overcurrent && self.bench.is_none() && self.fw.zone_duty.iter().all(|&d| d == 0.0) {
            self.battery.overcurrent = false;
        }

        let coil = self.plant.zone_coil_temp;
        let skin = self.plant.skin_temp;
        let soc = self.battery.soc;
        let voltage = self.battery.terminal_voltage;
        let duty = self.bench.map_or(self.fw.zone_duty, |d| [d; ZONES]);

        let mut energy = 0.0;
        for k in 0..SUBSTEPS {
            if k > 0 {
                before_substep(self, self.substeps);
            }
            energy += self.substep(duty)? * PLANT_DT;
        }

        let mut outbound = Vec::new();
        for m in &outbox {
            outbound.extend(protocol::encode(m).expect("firmware emits encodable messages"));
        }
        Ok(TickRecord {
            time,
            coil,
            readings,
            skin,
            duty_bits: duty.iter().enumerate().filter(|(_, &d)| d > 0.0).fold(0, |a, (i, _)| a | 1 << i),
            power_w: energy / TICK_DT,
            soc,
            voltage,
            mode: self.fw.mode,
            anomalies,
            outbound,
            replies: outbox,
        })
    }

    /// One plant step at the given duties. Returns the electrical power.
    fn substep(&mut self, duty: [f64; ZONES]) -> Result<f64, PlantError> {
        let conductance: f64 = (0..ZONES).map(|z| duty[z] / self.resistance(z)).sum();
        let (mut current, voltage) = battery::resistive_load(&self.battery, &self.cell, conductance);
        let mut power = [0.0; ZONES];
        if current > self.cell.max_current {
            self.battery = self.battery.trip_overcurrent();
            current = 0.0;
        } else if current > 0.0 {
            for z in 0..ZONES {
                power[z] = duty[z] * voltage * voltage / self.resistance(z);
            }
        }
        self.plant = thermal::step_with_power(&self.plant, &self.params, power, PLANT_DT)?;
        self.substeps += 1;
        self.plant.time = self.time();
        let tripped = self.battery.overcurrent;
        self.battery = battery::draw(&self.battery, &self.cell, current, PLANT_DT)
            .expect("current within the protection limit");
        self.battery.overcurrent = tripped;
        if tripped {
            self.battery.current = 0.0;
        }
        Ok(power.iter().sum())
    }
}
