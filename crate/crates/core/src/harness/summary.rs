use serde::Serialize;

use super::trace::{Trace, TraceRow};
use crate::firmware::{is_open_circuit, AnomalyCode, COIL_CAP};
use crate::thermal::ZONES;

/// Settling margin after the regulator first switches a zone off.
pub const SETTLE_S: f64 = 60.0;
/// Length of the window used for the settled skin and coil averages.
pub const STEADY_WINDOW_S: f64 = 60.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalyEvent {
    pub time: f64,
    pub code: AnomalyCode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    /// First time the hottest coil thermistor reads the cap, interpolated.
    /// This is what the firmware and a bench probe see.
    pub rise_time_s: Option<f64>,
    /// Same crossing on the true coil temperature. Near the cap the
    /// regulator often switches off a little below it, so this can land on
    /// a later overshoot.
    pub coil_rise_time_s: Option<f64>,
    /// Largest per-zone coil standard deviation over the hold window.
    pub ripple_sd: Option<f64>,
    pub max_coil: f64,
    pub runtime_to_empty_s: Option<f64>,
    /// First time the device refused to heat for lack of charge.
    pub battery_life_s: Option<f64>,
    pub settled_coil: Option<f64>,
    pub settled_skin: Option<f64>,
    pub skin_offset: Option<f64>,
    pub anomalies: Vec<AnomalyEvent>,
}

fn sd(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Rows of the first heating session from `SETTLE_S` after the first time
/// the regulator switched any zone off until the session ends.
pub fn hold_window(trace: &Trace) -> &[TraceRow] {
    let rows = &trace.rows;
    let Some(start) = rows.iter().position(|r| r.mode == "Heating") else {
        return &[];
    };
    let end = rows[start..]
        .iter()
        .position(|r| r.mode != "Heating")
        .map_or(rows.len(), |n| start + n);
    let session = &rows[start..end];
    let Some(settle) = session.iter().position(|r| r.duty_bits != 0b111) else {
        return &[];
    };
    let from = session[settle].time + SETTLE_S;
    let first = session.iter().position(|r| r.time >= from).unwrap_or(session.len());
    &session[first..]
}

/// Interpolated time at which `value` first reaches `level`.
fn first_crossing(rows: &[TraceRow], level: f64, value: impl Fn(&TraceRow) -> f64) -> Option<f64> {
    let i = rows.iter().position(|r| value(r) >= level)?;
    if i == 0 {
        return Some(rows[0].time);
    }
    let (p, r) = (&rows[i - 1], &rows[i]);
    let (pv, rv) = (value(p), value(r));
    let frac = if pv.is_finite() { (level - pv) / (rv - pv) } else { 1.0 };
    Some(p.time + frac * (r.time - p.time))
}

pub fn summarize(trace: &Trace) -> Summary {
    let rows = &trace.rows;
    let hottest_reading = |r: &TraceRow| {
        r.readings()
            .into_iter()
            .filter(|&x| !is_open_circuit(x))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let rise = first_crossing(rows, COIL_CAP, hottest_reading);
    let coil_rise = first_crossing(rows, COIL_CAP, TraceRow::max_coil);

    let window = hold_window(trace);
    let ripple_sd = (window.len() >= 2).then(|| {
        (0..ZONES)
            .map(|z| sd(&window.iter().map(|r| r.coils()[z]).collect::<Vec<_>>()))
            .fold(0.0, f64::max)
    });

    let (mut settled_coil, mut settled_skin) = (None, None);
    if let (Some(first), Some(last)) = (window.first(), window.last()) {
        if last.time - first.time >= STEADY_WINDOW_S {
            let tail: Vec<&TraceRow> = window
                .iter()
                .filter(|r| r.time > last.time - STEADY_WINDOW_S)
                .collect();
            let n = tail.len() as f64;
            settled_coil = Some(tail.iter().map(|r| r.coils().iter().sum::<f64>() / ZONES as f64).sum::<f64>() / n);
            settled_skin = Some(tail.iter().map(|r| r.skin).sum::<f64>() / n);
        }
    }

    Summary {
        rise_time_s: rise,
        coil_rise_time_s: coil_rise,
        ripple_sd,
        max_coil: rows.iter().map(TraceRow::max_coil).fold(f64::NEG_INFINITY, f64::max),
        runtime_to_empty_s: rows.iter().find(|r| r.soc <= 0.0).map(|r| r.time),
        battery_life_s: rows.iter().find(|r| r.mode == "BatteryLow").map(|r| r.time),
        settled_coil,
        settled_skin,
        skin_offset: settled_coil.zip(settled_skin).map(|(c, s)| c - s),
        anomalies: trace.anomalies().map(|(time, code)| AnomalyEvent { time, code }).collect(),
    }
}

/// Anomalies in the trace that are not listed in `expected`.
pub fn unexpected_anomalies(trace: &Trace, expected: &[AnomalyCode]) -> Vec<AnomalyEvent> {
    trace
        .anomalies()
        .filter(|(_, c)| !expected.contains(c))
        .map(|(time, code)| AnomalyEvent { time, code })
        .collect()
}
