use serde::Serialize;

use super::auth::{authenticate, AuthOutcome, MAX_AUTH_FAILURES};
use super::control::{regulate, HeatLevel, COIL_SKIN_OFFSET};
use super::safety::{check_safety, AnomalyCode, SafetyLimits, OVERSHOOT_ALLOWANCE};
use crate::battery::BatteryState;
use crate::protocol::{Message, Telemetry};
use crate::thermal::ZONES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NackReason {
    NotAuthenticated = 1,
    WrongMode = 2,
    LockedOut = 3,
    BatteryLow = 4,
    Unexpected = 5,
    InvalidArgument = 6,
    /// Sent by the bridge to a second client.
    Busy = 7,
}

impl NackReason {
    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FirmwareMode {
    Disconnected,
    ConnectedUnauthenticated,
    Idle,
    Heating {
        level: HeatLevel,
        elapsed_ticks: u32,
        timer_remaining_ticks: Option<u32>,
    },
    SafetyLatched(AnomalyCode),
    BatteryLow,
}

impl FirmwareMode {
    pub fn code(&self) -> u8 {
        match self {
            FirmwareMode::Disconnected => 0,
            FirmwareMode::ConnectedUnauthenticated => 1,
            FirmwareMode::Idle => 2,
            FirmwareMode::Heating { .. } => 3,
            FirmwareMode::SafetyLatched(_) => 4,
            FirmwareMode::BatteryLow => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FirmwareMode::Disconnected => "Disconnected",
            FirmwareMode::ConnectedUnauthenticated => "ConnectedUnauthenticated",
            FirmwareMode::Idle => "Idle",
            FirmwareMode::Heating { .. } => "Heating",
            FirmwareMode::SafetyLatched(_) => "SafetyLatched",
            FirmwareMode::BatteryLow => "BatteryLow",
        }
    }

    pub fn is_heating(&self) -> bool {
        matches!(self, FirmwareMode::Heating { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirmwareConfig {
    pub secret: Vec<u8>,
    pub limits: SafetyLimits,
}

impl FirmwareConfig {
    pub fn new(secret: impl Into<Vec<u8>>) -> Self {
        Self {
            secret: secret.into(),
            limits: SafetyLimits::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LinkState {
    pub connected: bool,
    pub authenticated: bool,
    /// Consecutive ticks without a link.
    pub missed_ticks: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirmwareSnapshot {
    pub mode: FirmwareMode,
    pub zone_duty: [f64; ZONES],
    pub last_readings: [f64; ZONES],
    pub battery_soc: f64,
    /// Waiting for a live link. Drained only into the outbox.
    pub anomaly_queue: Vec<AnomalyCode>,
    pub tick_count: u64,
    pub link: LinkState,
    pub auth_failures: u32,
    pub selected_level: HeatLevel,
    pub timer_minutes: Option<u8>,
    /// The current session ran past the recommended maximum.
    pub session_overrun: bool,
    /// Conditions found by the safety check on the latest tick.
    pub trips: Vec<AnomalyCode>,
    /// Anomalies raised on the latest tick.
    pub raised: Vec<AnomalyCode>,
}

impl Default for FirmwareSnapshot {
    fn default() -> Self {
        Self {
            mode: FirmwareMode::Disconnected,
            zone_duty: [0.0; ZONES],
            last_readings: [f64::NAN; ZONES],
            battery_soc: 1.0,
            anomaly_queue: Vec::new(),
            tick_count: 0,
            link: LinkState::default(),
            auth_failures: 0,
            selected_level: HeatLevel::Medium,
            timer_minutes: None,
            session_overrun: false,
            trips: Vec::new(),
            raised: Vec::new(),
        }
    }
}

impl FirmwareSnapshot {
    pub fn locked_out(&self) -> bool {
        self.auth_failures >= MAX_AUTH_FAILURES
    }

    pub fn duty_bits(&self) -> u8 {
        self.zone_duty
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0.0)
            .fold(0, |acc, (i, _)| acc | 1 << i)
    }

    fn raise(&mut self, code: AnomalyCode) {
        self.anomaly_queue.push(code);
        self.raised.push(code);
    }

    fn telemetry(&self) -> Telemetry {
        let r = self.last_readings;
        let skin = r.iter().sum::<f64>() / ZONES as f64 - COIL_SKIN_OFFSET;
        Telemetry::from_celsius(r, skin, self.battery_soc, self.mode.code(), self.duty_bits())
    }
}

/// One 0.5 s control step. Pure: the new snapshot and the outbound
/// messages depend only on the arguments.
pub fn tick(
    prev: &FirmwareSnapshot,
    config: &FirmwareConfig,
    readings: [f64; ZONES],
    battery: &BatteryState,
    link_ok: bool,
    inbox: &[Message],
) -> (FirmwareSnapshot, Vec<Message>) {
    let limits = &config.limits;
    let mut s = prev.clone();
    s.tick_count += 1;
    s.raised.clear();
    s.last_readings = readings;
    s.battery_soc = battery.soc;
    let mut out = Vec::new();

    // link watchdog
    let timeout = limits.ticks(limits.link_timeout_s);
    if link_ok {
        s.link.missed_ticks = 0;
        s.link.connected = true;
        if s.mode == FirmwareMode::Disconnected {
            s.mode = FirmwareMode::ConnectedUnauthenticated;
        }
    } else {
        s.link.missed_ticks = s.link.missed_ticks.saturating_add(1);
    }
    let link_alive = s.link.missed_ticks < timeout;
    if !link_alive && s.link.connected {
        s.link.connected = false;
        s.link.authenticated = false;
        if s.mode.is_heating() {
            s.raise(AnomalyCode::LinkLost);
        }
        if matches!(
            s.mode,
            FirmwareMode::Heating { .. } | FirmwareMode::Idle | FirmwareMode::ConnectedUnauthenticated
        ) {
            s.mode = FirmwareMode::Disconnected;
        }
    }

    if link_ok {
        for msg in inbox {
            if let Some(reply) = handle(&mut s, config, battery, msg) {
                out.push(reply);
            }
        }
    }

    // safety
    let trips = check_safety(readings, limits, link_alive, battery);
    // A reading just over the cap only cuts this tick's power; the latch
    // waits for the overshoot allowance.
    let overshoot = readings.iter().any(|&r| r > limits.coil_cap() + OVERSHOOT_ALLOWANCE);
    let latching: Vec<AnomalyCode> = trips
        .iter()
        .copied()
        .filter(|&c| c.latches() && (c != AnomalyCode::OverTemp || overshoot))
        .collect();
    if !matches!(s.mode, FirmwareMode::SafetyLatched(_)) {
        if let Some(&first) = latching.first() {
            s.mode = FirmwareMode::SafetyLatched(first);
            for c in latching {
                s.raise(c);
            }
        } else if s.mode != FirmwareMode::BatteryLow
            && (battery.depleted
                || (s.mode == FirmwareMode::Idle && battery.soc <= limits.low_battery_soc))
        {
            s.mode = FirmwareMode::BatteryLow;
            s.raise(AnomalyCode::BatteryLow);
        }
    }

    // session clock
    if let FirmwareMode::Heating {
        elapsed_ticks,
        timer_remaining_ticks,
        ..
    } = &mut s.mode
    {
        *elapsed_ticks += 1;
        if *elapsed_ticks >= limits.ticks(limits.max_session_s) {
            s.session_overrun = true;
        }
        if let Some(rem) = timer_remaining_ticks {
            *rem = rem.saturating_sub(1);
            if *rem == 0 {
                s.mode = FirmwareMode::Idle;
            }
        }
    }

    // duties
    s.zone_duty = match s.mode {
        FirmwareMode::Heating { level, .. } if trips.is_empty() => {
            let sp = level.coil_setpoint(limits.hysteresis);
            std::array::from_fn(|z| {
                let previous = if prev.mode.is_heating() { prev.zone_duty[z] } else { 0.0 };
                regulate(readings[z], sp, limits.hysteresis, previous)
            })
        }
        _ => [0.0; ZONES],
    };
    s.trips = trips;

    if link_ok {
        out.extend(s.anomaly_queue.drain(..).map(|c| Message::Anomaly { code: c.code() }));
        out.push(Message::Telemetry(s.telemetry()));
    }
    (s, out)
}

fn nack(r: NackReason) -> Option<Message> {
    Some(Message::Nack { reason: r.code() })
}

fn handle(
    s: &mut FirmwareSnapshot,
    config: &FirmwareConfig,
    battery: &BatteryState,
    msg: &Message,
) -> Option<Message> {
    let limits = &config.limits;
    match msg {
        Message::Ping => return Some(Message::Pong),
        Message::Auth { secret } => {
            let was_locked = s.locked_out();
            let (outcome, failures) = authenticate(secret, &config.secret, s.auth_failures);
            s.auth_failures = failures;
            return match outcome {
                AuthOutcome::Granted => {
                    s.link.authenticated = true;
                    if s.mode == FirmwareMode::ConnectedUnauthenticated {
                        s.mode = FirmwareMode::Idle;
                    }
                    Some(Message::AuthResult { ok: true })
                }
                AuthOutcome::Denied => Some(Message::AuthResult { ok: false }),
                AuthOutcome::LockedOut => {
                    if !was_locked {
                        s.raise(AnomalyCode::AuthFailure);
                        Some(Message::AuthResult { ok: false })
                    } else {
                        nack(NackReason::LockedOut)
                    }
                }
            };
        }
        Message::SetLevel { .. }
        | Message::StartHeat
        | Message::StopHeat
        | Message::SetTimer { .. }
        | Message::ResetLatch => {}
        _ => return nack(NackReason::Unexpected),
    }
    if !s.link.authenticated {
        return nack(NackReason::NotAuthenticated);
    }
    match *msg {
        Message::SetLevel { level } => {
            let Some(level) = HeatLevel::from_code(level) else {
                return nack(NackReason::InvalidArgument);
            };
            s.selected_level = level;
            if let FirmwareMode::Heating { level: l, .. } = &mut s.mode {
                *l = level;
            }
            None
        }
        Message::StartHeat => match s.mode {
            FirmwareMode::Idle if battery.soc > limits.low_battery_soc && !battery.depleted => {
                s.mode = FirmwareMode::Heating {
                    level: s.selected_level,
                    elapsed_ticks: 0,
                    timer_remaining_ticks: s.timer_minutes.map(|m| limits.ticks(m as f64 * 60.0)),
                };
                s.session_overrun = false;
                None
            }
            FirmwareMode::Idle | FirmwareMode::BatteryLow => nack(NackReason::BatteryLow),
            _ => nack(NackReason::WrongMode),
        },
        Message::StopHeat => match s.mode {
            FirmwareMode::Heating { .. } => {
                s.mode = FirmwareMode::Idle;
                None
            }
            _ => nack(NackReason::WrongMode),
        },
        Message::SetTimer { minutes } => {
            s.timer_minutes = (minutes > 0).then_some(minutes);
            if let FirmwareMode::Heating {
                timer_remaining_ticks,
                ..
            } = &mut s.mode
            {
                *timer_remaining_ticks = s.timer_minutes.map(|m| limits.ticks(m as f64 * 60.0));
            }
            None
        }
        Message::ResetLatch => match s.mode {
            FirmwareMode::SafetyLatched(_) => {
                s.mode = FirmwareMode::Idle;
                None
            }
            _ => nack(NackReason::WrongMode),
        },
        _ => unreachable!("filtered above"),
    }
}
