//! Context snapshots, drive traces and the trace CSV format.
//!
//! A trace CSV has a header row and the columns
//! `t,lat,lon,rsrp,rsrq,sinr,cqi,ta,freq,speed,cell,payload,datarate`.
//! `datarate` is left empty for snapshots without a ground-truth measurement;
//! `ta` and `freq` may be empty or absent and then fall back to defaults that
//! are counted in the [`ParseReport`].

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{GeoOrigin, Point};

/// Highest valid channel quality indicator.
pub const MAX_CQI: u8 = 15;

/// One timestamped record of network, mobility and application context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSnapshot {
    /// Seconds, strictly increasing within a trace.
    pub timestamp: f64,
    pub position: Point,
    /// dBm
    pub rsrp: f64,
    /// dB
    pub rsrq: f64,
    /// dB
    pub sinr: f64,
    pub cqi: u8,
    pub ta: u32,
    /// MHz
    pub carrier_freq: f64,
    /// m/s
    pub velocity: f64,
    pub cell_id: String,
    /// Bytes buffered for transmission at this snapshot.
    pub payload_size: f64,
}

impl ContextSnapshot {
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !self.timestamp.is_finite() {
            return Err(("t", "timestamp must be finite".into()));
        }
        if self.cqi > MAX_CQI {
            return Err(("cqi", format!("cqi {} outside [0, {MAX_CQI}]", self.cqi)));
        }
        if !(self.velocity >= 0.0) {
            return Err(("speed", format!("velocity {} must be >= 0", self.velocity)));
        }
        if !(self.payload_size >= 0.0) {
            return Err(("payload", format!("payload {} must be >= 0", self.payload_size)));
        }
        for (name, v) in [("rsrp", self.rsrp), ("rsrq", self.rsrq), ("sinr", self.sinr)] {
            if !v.is_finite() {
                return Err((name, format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// An ordered drive of one operator's network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveTrace {
    pub mno_id: String,
    /// Frame in which snapshot positions are expressed.
    pub origin: GeoOrigin,
    snapshots: Vec<ContextSnapshot>,
    /// Measured data rate in MBit/s, aligned with `snapshots`.
    measured_data_rate: Vec<Option<f64>>,
}

impl DriveTrace {
    pub fn new(
        mno_id: impl Into<String>,
        origin: GeoOrigin,
        snapshots: Vec<ContextSnapshot>,
        measured_data_rate: Vec<Option<f64>>,
    ) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::Empty("drive trace has no snapshots"));
        }
        if snapshots.len() != measured_data_rate.len() {
            return Err(Error::invalid(format!(
                "{} snapshots but {} data-rate labels",
                snapshots.len(),
                measured_data_rate.len()
            )));
        }
        for (i, s) in snapshots.iter().enumerate() {
            let row = i + 1;
            s.validate().map_err(|(field, message)| Error::InvalidRow {
                row,
                field: field.into(),
                message,
            })?;
            if i > 0 && !(s.timestamp > snapshots[i - 1].timestamp) {
                return Err(Error::InvalidRow {
                    row,
                    field: "t".into(),
                    message: format!(
                        "timestamp {} does not increase over {}",
                        s.timestamp,
                        snapshots[i - 1].timestamp
                    ),
                });
            }
            if let Some(rate) = measured_data_rate[i] {
                if !(rate >= 0.0) || !rate.is_finite() {
                    return Err(Error::InvalidRow {
                        row,
                        field: "datarate".into(),
                        message: format!("data rate {rate} must be finite and >= 0"),
                    });
                }
            }
        }
        Ok(Self {
            mno_id: mno_id.into(),
            origin,
            snapshots,
            measured_data_rate,
        })
    }

    pub fn snapshots(&self) -> &[ContextSnapshot] {
        &self.snapshots
    }

    pub fn measured_data_rate(&self) -> &[Option<f64>] {
        &self.measured_data_rate
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    /// Snapshots paired with their label, if any.
    pub fn iter(&self) -> impl Iterator<Item = (&ContextSnapshot, Option<f64>)> {
        self.snapshots.iter().zip(self.measured_data_rate.iter().copied())
    }

    pub fn span(&self) -> f64 {
        self.snapshots.last().unwrap().timestamp - self.snapshots[0].timestamp
    }

    /// Median spacing between consecutive snapshots.
    pub fn typical_interval(&self) -> f64 {
        let mut d: Vec<f64> = self
            .snapshots
            .windows(2)
            .map(|w| w[1].timestamp - w[0].timestamp)
            .collect();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        d[d.len() / 2]
    }

    /// Re-expresses all positions relative to another projection origin.
    pub fn reproject(&mut self, origin: GeoOrigin) {
        if origin == self.origin {
            return;
        }
        for s in &mut self.snapshots {
            let (lat, lon) = self.origin.unproject(s.position);
            s.position = origin.project(lat, lon);
        }
        self.origin = origin;
    }
}

/// Column names of the trace CSV and defaults for optional fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSchema {
    pub t: String,
    pub lat: String,
    pub lon: String,
    pub rsrp: String,
    pub rsrq: String,
    pub sinr: String,
    pub cqi: String,
    pub ta: String,
    pub freq: String,
    pub speed: String,
    pub cell: String,
    pub payload: String,
    pub datarate: String,
    /// Used when `freq` is empty or absent.
    pub default_carrier_freq: f64,
    /// Projection origin; the centroid of the trace when `None`.
    pub origin: Option<GeoOrigin>,
    pub mno_id: String,
}

impl Default for TraceSchema {
    fn default() -> Self {
        Self {
            t: "t".into(),
            lat: "lat".into(),
            lon: "lon".into(),
            rsrp: "rsrp".into(),
            rsrq: "rsrq".into(),
            sinr: "sinr".into(),
            cqi: "cqi".into(),
            ta: "ta".into(),
            freq: "freq".into(),
            speed: "speed".into(),
            cell: "cell".into(),
            payload: "payload".into(),
            datarate: "datarate".into(),
            default_carrier_freq: 1800.0,
            origin: None,
            mno_id: "A".into(),
        }
    }
}

/// Notes collected while ingesting a trace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub labeled_rows: usize,
    pub defaulted_ta: usize,
    pub defaulted_freq: usize,
}

pub const CSV_HEADER: [&str; 13] = [
    "t", "lat", "lon", "rsrp", "rsrq", "sinr", "cqi", "ta", "freq", "speed", "cell", "payload",
    "datarate",
];

pub fn parse_trace(path: impl AsRef<Path>, schema: &TraceSchema) -> Result<(DriveTrace, ParseReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace(file, schema)
}

pub fn read_trace<R: Read>(reader: R, schema: &TraceSchema) -> Result<(DriveTrace, ParseReport)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));

    let c_t = need(&schema.t)?;
    let c_lat = need(&schema.lat)?;
    let c_lon = need(&schema.lon)?;
    let c_rsrp = need(&schema.rsrp)?;
    let c_rsrq = need(&schema.rsrq)?;
    let c_sinr = need(&schema.sinr)?;
    let c_cqi = need(&schema.cqi)?;
    let c_ta = find(&schema.ta);
    let c_freq = find(&schema.freq);
    let c_speed = need(&schema.speed)?;
    let c_cell = need(&schema.cell)?;
    let c_payload = need(&schema.payload)?;
    let c_rate = need(&schema.datarate)?;

    let mut report = ParseReport::default();
    let mut coords = Vec::new();
    let mut snapshots = Vec::new();
    let mut labels = Vec::new();

    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row = i + 1;
        let field = |col: usize| record.get(col).unwrap_or("");
        let real = |col: usize, name: &str| -> Result<f64> {
            field(col).parse::<f64>().map_err(|_| Error::InvalidRow {
                row,
                field: name.into(),
                message: format!("`{}` is not a number", field(col)),
            })
        };
        let optional = |col: Option<usize>| col.map(field).filter(|v| !v.is_empty());

        let cqi_raw = real(c_cqi, &schema.cqi)?;
        if cqi_raw.fract() != 0.0 || !(0.0..=f64::from(MAX_CQI)).contains(&cqi_raw) {
            return Err(Error::InvalidRow {
                row,
                field: schema.cqi.clone(),
                message: format!("cqi {cqi_raw} outside [0, {MAX_CQI}]"),
            });
        }
        let ta = match optional(c_ta) {
            Some(v) => v.parse::<u32>().map_err(|_| Error::InvalidRow {
                row,
                field: schema.ta.clone(),
                message: format!("`{v}` is not a non-negative integer"),
            })?,
            None => {
                report.defaulted_ta += 1;
                0
            }
        };
        let carrier_freq = match optional(c_freq) {
            Some(_) => real(c_freq.unwrap(), &schema.freq)?,
            None => {
                report.defaulted_freq += 1;
                schema.default_carrier_freq
            }
        };
        let label = match field(c_rate) {
            "" => None,
            _ => Some(real(c_rate, &schema.datarate)?),
        };
        report.labeled_rows += usize::from(label.is_some());

        coords.push((real(c_lat, &schema.lat)?, real(c_lon, &schema.lon)?));
        snapshots.push(ContextSnapshot {
            timestamp: real(c_t, &schema.t)?,
            position: Point::default(),
            rsrp: real(c_rsrp, &schema.rsrp)?,
            rsrq: real(c_rsrq, &schema.rsrq)?,
            sinr: real(c_sinr, &schema.sinr)?,
            cqi: cqi_raw as u8,
            ta,
            carrier_freq,
            velocity: real(c_speed, &schema.speed)?,
            cell_id: field(c_cell).to_string(),
            payload_size: real(c_payload, &schema.payload)?,
        });
        labels.push(label);
    }
    report.rows = snapshots.len();

    let origin = match schema.origin {
        Some(o) => o,
        None => GeoOrigin::centroid(&coords).ok_or(Error::Empty("trace CSV has no rows"))?,
    };
    for (s, (lat, lon)) in snapshots.iter_mut().zip(&coords) {
        s.position = origin.project(*lat, *lon);
    }
    let trace = DriveTrace::new(schema.mno_id.clone(), origin, snapshots, labels)?;
    Ok((trace, report))
}

pub fn write_trace<W: Write>(trace: &DriveTrace, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for (s, label) in trace.iter() {
        let (lat, lon) = trace.origin.unproject(s.position);
        w.write_record([
            s.timestamp.to_string(),
            lat.to_string(),
            lon.to_string(),
            s.rsrp.to_string(),
            s.rsrq.to_string(),
            s.sinr.to_string(),
            s.cqi.to_string(),
            s.ta.to_string(),
            s.carrier_freq.to_string(),
            s.velocity.to_string(),
            s.cell_id.clone(),
            s.payload_size.to_string(),
            label.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<trace writer>", e))?;
    Ok(())
}

pub fn save_trace(trace: &DriveTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace(trace, std::io::BufWriter::new(file))
}
