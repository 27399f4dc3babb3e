//! Line-oriented scenario scripts.
//!
//! ```text
//! name = sigma_fault
//! duration = 300
//! ambient = 30
//! soc = 1.0
//! secret = mima
//! expect = SigmaTrip
//!
//! at=0 link up
//! at=0 send auth
//! at=0 send level medium
//! at=0.5 send start
//! at=120 inject stuck zone=1 value=44
//! ```

use std::path::Path;

use thiserror::Error;

use crate::firmware::{AnomalyCode, HeatLevel};
use crate::protocol::{self, Message, MAX_SECRET_LEN};
use crate::thermal::{FaultKind, ZONES};

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("reading {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Link(bool),
    /// Bytes written by the app towards the device.
    Send(Vec<u8>),
    Inject { zone: usize, fault: FaultKind },
    /// Replace one zone's coil resistance, e.g. a partial short.
    CoilResistance { zone: usize, ohms: Option<f64> },
    SetAmbient(f64),
    /// Bench supply driving every zone directly, bypassing the firmware.
    BenchDrive(Option<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub at: f64,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    pub ambient: f64,
    pub initial_soc: f64,
    pub secret: String,
    /// Anomalies this scenario is meant to provoke.
    pub expect: Vec<AnomalyCode>,
    pub events: Vec<Event>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "unnamed".into(),
            duration: 60.0,
            ambient: 30.0,
            initial_soc: 1.0,
            secret: "mima".into(),
            expect: Vec::new(),
            events: Vec::new(),
        }
    }
}

fn num(line: usize, what: &str, s: &str) -> Result<f64, ScenarioError> {
    let v: f64 = s.parse().map_err(|_| ScenarioError::Parse {
        line,
        reason: format!("{what}: `{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(ScenarioError::Parse {
            line,
            reason: format!("{what} must be finite"),
        });
    }
    Ok(v)
}

fn kv<'a>(line: usize, tok: Option<&'a str>, key: &str) -> Result<&'a str, ScenarioError> {
    tok.and_then(|t| t.strip_prefix(key)?.strip_prefix('='))
        .ok_or_else(|| ScenarioError::Parse {
            line,
            reason: format!("expected `{key}=<value>`"),
        })
}

fn zone(line: usize, tok: Option<&str>) -> Result<usize, ScenarioError> {
    let z = kv(line, tok, "zone")?;
    match z.parse::<usize>() {
        Ok(z) if z < ZONES => Ok(z),
        _ => Err(ScenarioError::Parse {
            line,
            reason: format!("zone must be 0..{}, got `{z}`", ZONES - 1),
        }),
    }
}

fn parse_hex(line: usize, s: &str) -> Result<Vec<u8>, ScenarioError> {
    let clean: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    hex::decode(clean).map_err(|e| ScenarioError::Parse {
        line,
        reason: format!("raw bytes: {e}"),
    })
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut sc = Scenario::default();
        // `send auth` without a secret uses the header secret, which may come later
        let mut pending_auth = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("at=") {
                let mut toks = rest.split_whitespace();
                let at = num(line_no, "at", toks.next().unwrap_or(""))?;
                let verb = toks.next().ok_or_else(|| ScenarioError::Parse {
                    line: line_no,
                    reason: "missing action".into(),
                })?;
                let args: Vec<&str> = toks.collect();
                if verb == "send" && args.len() == 1 && args[0] == "auth" {
                    pending_auth.push(sc.events.len());
                }
                let action = parse_action(line_no, verb, &args)?;
                sc.events.push(Event { at, action });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ScenarioError::Parse {
                line: line_no,
                reason: "expected `key = value` or `at=<s> <action>`".into(),
            })?;
            let value = value.trim();
            match key.trim() {
                "name" => sc.name = value.to_string(),
                "duration" => sc.duration = num(line_no, "duration", value)?,
                "ambient" => sc.ambient = num(line_no, "ambient", value)?,
                "soc" => sc.initial_soc = num(line_no, "soc", value)?,
                "secret" => sc.secret = value.to_string(),
                "expect" => {
                    sc.expect = value
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|s| !s.is_empty())
                        .map(|s| {
                            AnomalyCode::from_name(s).ok_or_else(|| ScenarioError::Parse {
                                line: line_no,
                                reason: format!("unknown anomaly `{s}`"),
                            })
                        })
                        .collect::<Result<_, _>>()?
                }
                other => {
                    return Err(ScenarioError::Parse {
                        line: line_no,
                        reason: format!("unknown header key `{other}`"),
                    })
                }
            }
        }
        for i in pending_auth {
            sc.events[i].action = Action::Send(auth_bytes(&sc.secret)?);
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return bad(format!("soc must be in [0, 1], got {}", self.initial_soc));
        }
        if self.secret.is_empty() || self.secret.len() > MAX_SECRET_LEN {
            return bad(format!("secret must be 1..={MAX_SECRET_LEN} bytes"));
        }
        let mut last = 0.0;
        for e in &self.events {
            if !(e.at >= 0.0 && e.at <= self.duration) {
                return bad(format!("event at {} s lies outside [0, {}]", e.at, self.duration));
            }
            if e.at < last {
                return bad(format!("events out of order at {} s", e.at));
            }
            last = e.at;
            match e.action {
                Action::Inject { zone, .. } | Action::CoilResistance { zone, .. } if zone >= ZONES => {
                    return bad(format!("zone {zone} out of range"))
                }
                Action::CoilResistance { ohms: Some(r), .. } if !(r > 0.0) => {
                    return bad(format!("coil resistance must be positive, got {r}"))
                }
                Action::BenchDrive(Some(d)) if !(0.0..=1.0).contains(&d) => {
                    return bad(format!("bench duty must be in [0, 1], got {d}"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration * 2.0).round() as u64
    }
}

fn auth_bytes(secret: &str) -> Result<Vec<u8>, ScenarioError> {
    protocol::encode(&Message::Auth {
        secret: secret.as_bytes().to_vec(),
    })
    .map_err(|e| ScenarioError::Invalid(e.to_string()))
}

fn parse_action(line: usize, verb: &str, args: &[&str]) -> Result<Action, ScenarioError> {
    let err = |reason: String| ScenarioError::Parse { line, reason };
    let msg = |m: Message| {
        protocol::encode(&m)
            .map(Action::Send)
            .map_err(|e| err(e.to_string()))
    };
    let arg = |i: usize| args.get(i).copied();
    match verb {
        "link" => match arg(0) {
            Some("up") => Ok(Action::Link(true)),
            Some("down") => Ok(Action::Link(false)),
            _ => Err(err("expected `link up` or `link down`".into())),
        },
        "send" => match (arg(0), arg(1)) {
            (Some("auth"), None) => Ok(Action::Send(Vec::new())),
            (Some("auth"), Some(s)) => msg(Message::Auth {
                secret: s.as_bytes().to_vec(),
            }),
            (Some("level"), Some(l)) => {
                let level = match l {
                    "low" => HeatLevel::Low,
                    "medium" => HeatLevel::Medium,
                    "high" => HeatLevel::High,
                    _ => return Err(err(format!("unknown level `{l}`"))),
                };
                msg(Message::SetLevel { level: level.code() })
            }
            (Some("start"), None) => msg(Message::StartHeat),
            (Some("stop"), None) => msg(Message::StopHeat),
            (Some("reset"), None) => msg(Message::ResetLatch),
            (Some("ping"), None) => msg(Message::Ping),
            (Some("timer"), Some(m)) => {
                let minutes: u8 = m.parse().map_err(|_| err(format!("timer minutes `{m}` not in 0..=255")))?;
                msg(Message::SetTimer { minutes })
            }
            (Some("raw"), Some(_)) => Ok(Action::Send(parse_hex(line, &args[1..].join(""))?)),
            _ => Err(err(format!("unknown send `{}`", args.join(" ")))),
        },
        "inject" => {
            let kind = arg(0).ok_or_else(|| err("missing fault kind".into()))?;
            let z = zone(line, arg(1))?;
            match kind {
                "stuck" => Ok(Action::Inject {
                    zone: z,
                    fault: FaultKind::Stuck {
                        value: num(line, "value", kv(line, arg(2), "value")?)?,
                    },
                }),
                "drift" => Ok(Action::Inject {
                    zone: z,
                    fault: FaultKind::Drift {
                        rate: num(line, "rate", kv(line, arg(2), "rate")?)?,
                    },
                }),
                "open" => Ok(Action::Inject {
                    zone: z,
                    fault: FaultKind::OpenCircuit,
                }),
                "clear" => Ok(Action::Inject {
                    zone: z,
                    fault: FaultKind::None,
                }),
                "short" => Ok(Action::CoilResistance {
                    zone: z,
                    ohms: Some(num(line, "ohms", kv(line, arg(2), "ohms")?)?),
                }),
                "repair" => Ok(Action::CoilResistance { zone: z, ohms: None }),
                other => Err(err(format!("unknown fault `{other}`"))),
            }
        }
        "ambient" => Ok(Action::SetAmbient(num(line, "ambient", arg(0).unwrap_or(""))?)),
        "bench_drive" => match arg(0) {
            Some("off") => Ok(Action::BenchDrive(None)),
            Some(d) => Ok(Action::BenchDrive(Some(num(line, "duty", d)?))),
            None => Err(err("expected a duty or `off`".into())),
        },
        other => Err(err(format!("unknown action `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_events() {
        let sc = Scenario::parse(
            "name = t\nduration = 10\nexpect = SigmaTrip, LinkLost\nat=0 link up\nat=0 send auth\nat=1 inject stuck zone=2 value=44\nsecret = abc\n",
        )
        .unwrap();
        assert_eq!(sc.name, "t");
        assert_eq!(sc.expect, vec![AnomalyCode::SigmaTrip, AnomalyCode::LinkLost]);
        assert_eq!(sc.events.len(), 3);
        let Action::Send(bytes) = &sc.events[1].action else { panic!() };
        assert_eq!(protocol::decode(bytes).0, vec![Message::Auth { secret: b"abc".to_vec() }]);
        assert_eq!(sc.tick_count(), 20);
    }

    #[test]
    fn rejects_bad_scripts() {
        assert!(Scenario::parse("at=0 inject open zone=3\n").is_err());
        assert!(Scenario::parse("at=0 send level extreme\n").is_err());
        assert!(Scenario::parse("at=5 link up\nat=1 link down\n").is_err());
        assert!(Scenario::parse("duration = 0\n").is_err());
        assert!(Scenario::parse("duration = 5\nat=6 link up\n").is_err());
        assert!(Scenario::parse("colour = red\n").is_err());
        assert!(Scenario::parse("at=0 send raw A5F\n").is_err());
    }

    #[test]
    fn raw_hex() {
        let sc = Scenario::parse("at=0 send raw A5 00 08 9C 07\n").unwrap();
        assert_eq!(sc.events[0].action, Action::Send(vec![0xA5, 0, 8, 0x9C, 0x07]));
    }
}
