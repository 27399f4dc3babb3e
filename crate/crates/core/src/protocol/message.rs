use serde::Serialize;

pub const MAX_SECRET_LEN: usize = 32;

pub mod msg_type {
    pub const AUTH: u8 = 0x01;
    pub const AUTH_RESULT: u8 = 0x02;
    pub const SET_LEVEL: u8 = 0x03;
    pub const START_HEAT: u8 = 0x04;
    pub const STOP_HEAT: u8 = 0x05;
    pub const SET_TIMER: u8 = 0x06;
    pub const RESET_LATCH: u8 = 0x07;
    pub const PING: u8 = 0x08;
    pub const PONG: u8 = 0x09;
    pub const TELEMETRY: u8 = 0x0A;
    pub const ANOMALY: u8 = 0x0B;
    pub const NACK: u8 = 0x0C;

    pub fn is_known(t: u8) -> bool {
        (AUTH..=NACK).contains(&t)
    }
}

/// Device status sent once per control tick. Temperatures are centi-°C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Telemetry {
    pub zone_centi: [i16; 3],
    pub skin_centi: i16,
    pub soc_percent: u8,
    pub mode: u8,
    /// Bit `i` set when zone `i` is powered.
    pub duty_bits: u8,
}

pub const TELEMETRY_LEN: usize = 11;

/// °C to centi-°C, rounded and saturated to the i16 range.
pub fn to_centi(celsius: f64) -> i16 {
    if celsius.is_nan() {
        return i16::MIN;
    }
    (celsius * 100.0).round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

impl Telemetry {
    pub fn zone_temps(&self) -> [f64; 3] {
        self.zone_centi.map(|c| c as f64 / 100.0)
    }

    pub fn skin_temp(&self) -> f64 {
        self.skin_centi as f64 / 100.0
    }

    pub fn from_celsius(zones: [f64; 3], skin: f64, soc: f64, mode: u8, duty_bits: u8) -> Self {
        Self {
            zone_centi: zones.map(to_centi),
            skin_centi: to_centi(skin),
            soc_percent: (soc * 100.0).round().clamp(0.0, 100.0) as u8,
            mode,
            duty_bits,
        }
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        for z in self.zone_centi {
            out.extend_from_slice(&z.to_be_bytes());
        }
        out.extend_from_slice(&self.skin_centi.to_be_bytes());
        out.extend_from_slice(&[self.soc_percent, self.mode, self.duty_bits]);
    }

    pub(crate) fn read(p: &[u8]) -> Option<Self> {
        if p.len() != TELEMETRY_LEN {
            return None;
        }
        let be = |i: usize| i16::from_be_bytes([p[i], p[i + 1]]);
        Some(Self {
            zone_centi: [be(0), be(2), be(4)],
            skin_centi: be(6),
            soc_percent: p[8],
            mode: p[9],
            duty_bits: p[10],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Message {
    Auth { secret: Vec<u8> },
    AuthResult { ok: bool },
    /// 0 Low, 1 Medium, 2 High. Other codes travel unchanged and are refused
    /// by the device.
    SetLevel { level: u8 },
    StartHeat,
    StopHeat,
    SetTimer { minutes: u8 },
    ResetLatch,
    Ping,
    Pong,
    Telemetry(Telemetry),
    Anomaly { code: u8 },
    Nack { reason: u8 },
    Unknown { msg_type: u8, payload: Vec<u8> },
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        use msg_type::*;
        match self {
            Message::Auth { .. } => AUTH,
            Message::AuthResult { .. } => AUTH_RESULT,
            Message::SetLevel { .. } => SET_LEVEL,
            Message::StartHeat => START_HEAT,
            Message::StopHeat => STOP_HEAT,
            Message::SetTimer { .. } => SET_TIMER,
            Message::ResetLatch => RESET_LATCH,
            Message::Ping => PING,
            Message::Pong => PONG,
            Message::Telemetry(_) => TELEMETRY,
            Message::Anomaly { .. } => ANOMALY,
            Message::Nack { .. } => NACK,
            Message::Unknown { msg_type, .. } => *msg_type,
        }
    }

    pub(crate) fn payload(&self) -> Vec<u8> {
        match self {
            Message::Auth { secret } => secret.clone(),
            Message::AuthResult { ok } => vec![*ok as u8],
            Message::SetLevel { level } => vec![*level],
            Message::SetTimer { minutes } => vec![*minutes],
            Message::Anomaly { code } => vec![*code],
            Message::Nack { reason } => vec![*reason],
            Message::Telemetry(t) => {
                let mut out = Vec::with_capacity(TELEMETRY_LEN);
                t.write(&mut out);
                out
            }
            Message::Unknown { payload, .. } => payload.clone(),
            Message::StartHeat
            | Message::StopHeat
            | Message::ResetLatch
            | Message::Ping
            | Message::Pong => Vec::new(),
        }
    }

    /// `None` when a known type carries a payload of the wrong shape.
    pub(crate) fn parse(t: u8, p: &[u8]) -> Option<Message> {
        use msg_type::*;
        let byte = || (p.len() == 1).then(|| p[0]);
        let empty = |m: Message| p.is_empty().then_some(m);
        match t {
            AUTH => (p.len() <= super::MAX_SECRET_LEN).then(|| Message::Auth { secret: p.to_vec() }),
            AUTH_RESULT => match byte()? {
                0 => Some(Message::AuthResult { ok: false }),
                1 => Some(Message::AuthResult { ok: true }),
                _ => None,
            },
            SET_LEVEL => Some(Message::SetLevel { level: byte()? }),
            START_HEAT => empty(Message::StartHeat),
            STOP_HEAT => empty(Message::StopHeat),
            SET_TIMER => Some(Message::SetTimer { minutes: byte()? }),
            RESET_LATCH => empty(Message::ResetLatch),
            PING => empty(Message::Ping),
            PONG => empty(Message::Pong),
            TELEMETRY => Telemetry::read(p).map(Message::Telemetry),
            ANOMALY => Some(Message::Anomaly { code: byte()? }),
            NACK => Some(Message::Nack { reason: byte()? }),
            _ => Some(Message::Unknown {
                msg_type: t,
                payload: p.to_vec(),
            }),
        }
    }
}
