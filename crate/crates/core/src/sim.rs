//! Trace replay: epochs of scheme decisions over a recorded or synthetic drive.
//!
//! No radio stack is simulated. A transmission's data rate is the snapshot's
//! measured label, rescaled from the payload it was measured with to the bytes
//! actually queued, times a log-normal residual. The residual of a snapshot is
//! fixed by the channel seed and the snapshot index, so every scheme and every
//! epoch meets the same channel.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blackspot::BlackSpotMap;
use crate::error::{Error, Result};
use crate::metrics::{PowerModel, ResourceLookupTable};
use crate::predictor::RatePredictor;
use crate::schemes::{Action, BufferState, Feedback, Scheme, StepInput};
use crate::seed;
use crate::stats::moving_average;
use crate::trace::{ContextSnapshot, DriveTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelRealizationModel {
    /// Standard deviation of the log of the multiplicative residual.
    pub residual_sigma: f64,
    /// Payload at which the rate reaches half its saturated value, bytes.
    pub payload_saturation: f64,
    /// Lowest achievable rate, MBit/s.
    pub min_rate: f64,
    pub seed: u64,
}

impl Default for ChannelRealizationModel {
    fn default() -> Self {
        Self {
            residual_sigma: 0.25,
            payload_saturation: 1_000_000.0,
            min_rate: 0.05,
            seed: 0,
        }
    }
}

impl ChannelRealizationModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_sigma >= 0.0) || !(self.payload_saturation > 0.0) || !(self.min_rate > 0.0) {
            return Err(Error::config(
                "channel needs residual_sigma >= 0, payload_saturation > 0 and min_rate > 0",
            ));
        }
        Ok(())
    }

    /// `b / (b + half_saturation)`
    pub fn payload_factor(&self, bytes: f64) -> f64 {
        bytes / (bytes + self.payload_saturation)
    }

    /// Multiplicative residual of snapshot `index`.
    pub fn residual(&self, index: usize) -> f64 {
        if self.residual_sigma == 0.0 {
            return 1.0;
        }
        let mut rng = seed::rng(self.seed, index as u64);
        let z: f64 = StandardNormal.sample(&mut rng);
        (self.residual_sigma * z).exp()
    }
}

/// Achieved rate in MBit/s and duration in s of sending `buffer_bytes` at snapshot `index`.
///
/// A label measured with payload `p` is rescaled by `factor(buffer) / factor(p)`;
/// without a label the prediction (already made for the queued bytes) is used.
pub fn realize_transmission(
    s: &ContextSnapshot,
    label: Option<f64>,
    predicted: f64,
    buffer_bytes: f64,
    index: usize,
    model: &ChannelRealizationModel,
) -> Result<(f64, f64)> {
    if !(buffer_bytes > 0.0) {
        return Err(Error::invalid("cannot transmit an empty buffer"));
    }
    let base = match label {
        Some(l) if s.payload_size > 0.0 => {
            l * model.payload_factor(buffer_bytes) / model.payload_factor(s.payload_size)
        }
        Some(l) => l * model.payload_factor(buffer_bytes),
        None => predicted,
    };
    let achieved = (base * model.residual(index)).max(model.min_rate);
    Ok((achieved, buffer_bytes * 8.0 / (achieved * 1e6)))
}

/// One decision of a replayed epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub epoch: usize,
    pub index: usize,
    pub t: f64,
    pub action: Action,
    /// Transmitted because of the age deadline or the end of the trace.
    pub forced: bool,
    /// End-of-trace transmission of the remaining buffer.
    pub flush: bool,
    pub in_blackspot: bool,
    /// MBit/s, absent while the buffer is empty
    pub predicted: Option<f64>,
    /// MBit/s, transmissions only
    pub achieved: Option<f64>,
    /// Bytes queued at the decision.
    pub buffer_bytes: f64,
    /// Age of the oldest queued byte, s
    pub aoi: f64,
    /// Reward the scheme learned from.
    pub reward: Option<f64>,
    pub cqi: u8,
    pub rsrp: f64,
    /// s, transmissions only
    pub duration: Option<f64>,
}

impl crate::metrics::Transmission for StepRecord {
    fn bits(&self) -> u64 {
        (self.buffer_bytes * 8.0).round() as u64
    }

    fn cqi(&self) -> u8 {
        self.cqi
    }

    fn duration(&self) -> f64 {
        self.duration.unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochResult {
    pub epoch: usize,
    /// Transmitted bits over transmission time, MBit/s
    pub mean_data_rate: f64,
    /// Mean age of the oldest byte at transmission, s
    pub mean_aoi: f64,
    pub max_aoi: f64,
    /// PRB·subframes
    pub total_prbs: u64,
    /// J
    pub total_energy: f64,
    pub tx_count: usize,
    /// Transmissions forced by the age deadline.
    pub deadline_violations: usize,
    /// Voluntary transmissions inside black spots.
    pub blackspot_tx: usize,
    pub bytes_sent: f64,
    pub bytes_generated: f64,
    /// s
    pub tx_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Sensor data generated per second, bytes.
    pub source_rate: f64,
    pub channel: ChannelRealizationModel,
    pub lookup: ResourceLookupTable,
    pub power: PowerModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            source_rate: 50_000.0,
            channel: ChannelRealizationModel::default(),
            lookup: ResourceLookupTable::default(),
            power: PowerModel::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.source_rate > 0.0) {
            return Err(Error::config("source_rate must be > 0"));
        }
        self.channel.validate()?;
        self.lookup.validate()?;
        self.power.validate()
    }
}

/// Learned models shared read-only by replays.
#[derive(Debug, Clone, Copy)]
pub struct Models<'a> {
    pub predictor: &'a RatePredictor,
    pub black_spots: Option<&'a BlackSpotMap>,
}

/// Replays one epoch; appends every decision to `log` when given.
///
/// At the last snapshot any remaining data is flushed without learning.
pub fn replay_epoch(
    trace: &DriveTrace,
    scheme: &mut Scheme,
    models: Models,
    cfg: &SimConfig,
    epoch: usize,
    total_epochs: usize,
    mut log: Option<&mut Vec<StepRecord>>,
) -> Result<EpochResult> {
    if scheme.needs_black_spot_map() && models.black_spots.is_none() {
        return Err(Error::config(format!("scheme {} needs a black-spot map", scheme.kind)));
    }
    let snaps = trace.snapshots();
    let labels = trace.measured_data_rate();
    let n = snaps.len();
    scheme.begin_epoch(epoch, total_epochs);

    let mut buffer = BufferState::new(snaps[0].timestamp);
    let mut tx = Vec::new();
    let mut generated = 0.0;

    for i in 0..n {
        let s = &snaps[i];
        let now = s.timestamp;
        if i > 0 {
            let prev = snaps[i - 1].timestamp;
            let bytes = cfg.source_rate * (now - prev);
            generated += bytes;
            buffer.accrue(now, prev, bytes);
        }
        let in_bs = models.black_spots.is_some_and(|m| m.contains(s.position));
        let mut record = StepRecord {
            epoch,
            index: i,
            t: now,
            action: Action::Idle,
            forced: false,
            flush: false,
            in_blackspot: in_bs,
            predicted: None,
            achieved: None,
            buffer_bytes: buffer.buffered_bytes,
            aoi: buffer.first_item_age,
            reward: None,
            cqi: s.cqi,
            rsrp: s.rsrp,
            duration: None,
        };
        if buffer.is_empty() {
            if let Some(log) = log.as_deref_mut() {
                log.push(record);
            }
            continue;
        }

        let predicted = models.predictor.predict(s, buffer.buffered_bytes, labels[i], i);
        record.predicted = Some(predicted);
        let last = i + 1 == n;
        let decision = if last {
            crate::schemes::SchemeDecision {
                action: Action::Tx,
                forced_by_deadline: true,
                in_black_spot: in_bs,
            }
        } else {
            let input = StepInput {
                epoch,
                index: i,
                now,
                position: s.position,
                sinr: s.sinr,
                predicted,
                buffer: &buffer,
            };
            scheme.decide(&input, models.black_spots)?
        };
        record.action = decision.action;
        record.forced = decision.forced_by_deadline;
        record.flush = last;

        match decision.action {
            Action::Tx => {
                let (achieved, duration) =
                    realize_transmission(s, labels[i], predicted, buffer.buffered_bytes, i, &cfg.channel)?;
                record.achieved = Some(achieved);
                record.duration = Some(duration);
                if !last {
                    let fb = Feedback::Tx {
                        achieved,
                        age: buffer.first_item_age,
                    };
                    record.reward = scheme.feedback(&decision, fb)?;
                }
                buffer.drain(now);
                tx.push(record.clone());
            }
            Action::Idle => {
                let dt = snaps[i + 1].timestamp - now;
                let fb = Feedback::Idle {
                    next_age: buffer.first_item_age + dt,
                };
                record.reward = scheme.feedback(&decision, fb)?;
            }
        }
        if let Some(log) = log.as_deref_mut() {
            log.push(record);
        }
    }
    scheme.discard();
    scheme.end_epoch();
    Ok(summarize(epoch, &tx, generated, trace.span(), cfg))
}

/// Aggregates the transmissions of one epoch.
pub fn summarize(epoch: usize, tx: &[StepRecord], generated: f64, span: f64, cfg: &SimConfig) -> EpochResult {
    let bytes_sent: f64 = tx.iter().map(|r| r.buffer_bytes).sum();
    let tx_time: f64 = tx.iter().filter_map(|r| r.duration).sum();
    let tx_energy: f64 = tx
        .iter()
        .map(|r| cfg.power.tx_energy(r.rsrp, r.duration.unwrap_or(0.0)))
        .sum();
    let idle_energy = cfg.power.idle_w * (span - tx_time).max(0.0);
    let aoi: Vec<f64> = tx.iter().map(|r| r.aoi).collect();
    EpochResult {
        epoch,
        mean_data_rate: if tx_time > 0.0 { bytes_sent * 8.0 / 1e6 / tx_time } else { 0.0 },
        mean_aoi: crate::stats::mean(&aoi).unwrap_or(0.0),
        max_aoi: aoi.iter().copied().fold(0.0, f64::max),
        total_prbs: crate::metrics::resource_occupation(tx, &cfg.lookup),
        total_energy: tx_energy + idle_energy,
        tx_count: tx.len(),
        deadline_violations: tx.iter().filter(|r| r.forced && !r.flush).count(),
        blackspot_tx: tx.iter().filter(|r| r.in_blackspot && !r.forced).count(),
        bytes_sent,
        bytes_generated: generated,
        tx_time,
    }
}

/// Per-epoch results of a multi-epoch run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub scheme: String,
    pub epochs: Vec<EpochResult>,
    pub window: usize,
    /// Trailing moving average of the epoch data rates.
    pub moving_average: Vec<f64>,
    /// First epoch (1-based) whose moving average reaches 95% of the final one.
    pub convergence_epoch: usize,
}

pub const CONVERGENCE_WINDOW: usize = 20;
pub const CONVERGENCE_FRACTION: f64 = 0.95;

impl TrainingReport {
    pub fn from_epochs(scheme: impl Into<String>, epochs: Vec<EpochResult>, window: usize) -> Self {
        let rates: Vec<f64> = epochs.iter().map(|e| e.mean_data_rate).collect();
        let ma = moving_average(&rates, window);
        let target = CONVERGENCE_FRACTION * ma.last().copied().unwrap_or(0.0);
        let convergence_epoch = ma.iter().position(|&m| m >= target).map_or(ma.len(), |p| p + 1);
        Self {
            scheme: scheme.into(),
            epochs,
            window,
            moving_average: ma,
            convergence_epoch,
        }
    }

    pub fn data_rates(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.mean_data_rate).collect()
    }

    /// Epoch series as CSV: `epoch,data_rate,moving_average,aoi,prbs,energy,tx_count`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["epoch", "data_rate", "moving_average", "aoi", "prbs", "energy", "tx_count"])?;
        for (e, ma) in self.epochs.iter().zip(&self.moving_average) {
            out.write_record([
                e.epoch.to_string(),
                e.mean_data_rate.to_string(),
                ma.to_string(),
                e.mean_aoi.to_string(),
                e.total_prbs.to_string(),
                e.total_energy.to_string(),
                e.tx_count.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

/// Which epochs keep their decisions in the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogEpochs {
    None,
    #[default]
    Last,
    All,
}

/// Replays `epochs` epochs; learning state carries over between them.
pub fn run_training(
    trace: &DriveTrace,
    scheme: &mut Scheme,
    epochs: usize,
    models: Models,
    cfg: &SimConfig,
    log_epochs: LogEpochs,
    log: &mut Vec<StepRecord>,
) -> Result<TrainingReport> {
    if epochs == 0 {
        return Err(Error::config("epochs must be >= 1"));
    }
    cfg.validate()?;
    let mut results = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let keep = match log_epochs {
            LogEpochs::None => false,
            LogEpochs::Last => e + 1 == epochs,
            LogEpochs::All => true,
        };
        let sink = if keep { Some(&mut *log) } else { None };
        results.push(replay_epoch(trace, scheme, models, cfg, e + 1, epochs, sink)?);
    }
    Ok(TrainingReport::from_epochs(scheme.kind.name(), results, CONVERGENCE_WINDOW))
}

/// Header of the event log.
pub const EVENT_LOG_HEADER: [&str; 9] = [
    "epoch",
    "t",
    "action",
    "predicted",
    "achieved",
    "buffer_bytes",
    "aoi",
    "in_blackspot",
    "reward",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_event_log<W: Write>(records: &[StepRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVENT_LOG_HEADER)?;
    for r in records {
        out.write_record([
            r.epoch.to_string(),
            r.t.to_string(),
            r.action.as_str().to_string(),
            opt(r.predicted),
            opt(r.achieved),
            r.buffer_bytes.to_string(),
            r.aoi.to_string(),
            u8::from(r.in_blackspot).to_string(),
            opt(r.reward),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
