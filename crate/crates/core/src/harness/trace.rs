use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::rig::TickRecord;
use crate::firmware::AnomalyCode;
use crate::thermal::ZONES;

pub const COLUMNS: [&str; 14] = [
    "time", "coil_0", "coil_1", "coil_2", "reading_0", "reading_1", "reading_2", "skin", "duty_bits",
    "power_w", "soc", "voltage", "mode", "anomalies",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub coil_0: f64,
    pub coil_1: f64,
    pub coil_2: f64,
    pub reading_0: f64,
    pub reading_1: f64,
    pub reading_2: f64,
    pub skin: f64,
    pub duty_bits: u8,
    pub power_w: f64,
    pub soc: f64,
    pub voltage: f64,
    pub mode: String,
    /// `|`-separated anomaly names, empty when none.
    pub anomalies: String,
}

impl TraceRow {
    pub fn from_record(r: &TickRecord) -> Self {
        Self {
            time: r.time,
            coil_0: r.coil[0],
            coil_1: r.coil[1],
            coil_2: r.coil[2],
            reading_0: r.readings[0],
            reading_1: r.readings[1],
            reading_2: r.readings[2],
            skin: r.skin,
            duty_bits: r.duty_bits,
            power_w: r.power_w,
            soc: r.soc,
            voltage: r.voltage,
            mode: r.mode.name().to_string(),
            anomalies: r.anomalies.iter().map(|a| a.name()).collect::<Vec<_>>().join("|"),
        }
    }

    pub fn coils(&self) -> [f64; ZONES] {
        [self.coil_0, self.coil_1, self.coil_2]
    }

    pub fn readings(&self) -> [f64; ZONES] {
        [self.reading_0, self.reading_1, self.reading_2]
    }

    pub fn max_coil(&self) -> f64 {
        self.coil_0.max(self.coil_1).max(self.coil_2)
    }

    pub fn anomaly_codes(&self) -> impl Iterator<Item = AnomalyCode> + '_ {
        self.anomalies
            .split('|')
            .filter(|s| !s.is_empty())
            .filter_map(AnomalyCode::from_name)
    }

    fn fields(&self) -> [String; 14] {
        [
            format!("{:.1}", self.time),
            format!("{:.4}", self.coil_0),
            format!("{:.4}", self.coil_1),
            format!("{:.4}", self.coil_2),
            format!("{:.4}", self.reading_0),
            format!("{:.4}", self.reading_1),
            format!("{:.4}", self.reading_2),
            format!("{:.4}", self.skin),
            self.duty_bits.to_string(),
            format!("{:.4}", self.power_w),
            format!("{:.6}", self.soc),
            format!("{:.4}", self.voltage),
            self.mode.clone(),
            self.anomalies.clone(),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(COLUMNS)?;
        for row in &self.rows {
            out.write_record(row.fields())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        buf
    }

    pub fn read_csv<R: Read>(r: R) -> csv::Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows = rdr.deserialize().collect::<csv::Result<Vec<TraceRow>>>()?;
        Ok(Self { rows })
    }

    pub fn anomalies(&self) -> impl Iterator<Item = (f64, AnomalyCode)> + '_ {
        self.rows
            .iter()
            .flat_map(|r| r.anomaly_codes().map(move |c| (r.time, c)))
    }
}
