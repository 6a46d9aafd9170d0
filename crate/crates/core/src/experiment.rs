//! End-to-end experiment configuration and pipeline stages.
//!
//! A run draws its drives either from trace files or from the synthetic
//! scenario. Synthetic runs use four drives over one layout: two train the
//! rate predictor, one provides the prediction errors that define black
//! spots, and the last is replayed by the schemes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::bandit::{BanditConfig, RateSource};
use crate::blackspot::{build_black_spot_map, BlackSpotBuild, BlackSpotConfig, BlackSpotMap};
use crate::error::{Error, Result};
use crate::metrics::{efficiency, EfficiencyIndicators};
use crate::predictor::{extract_features, prediction_records, train_forest, ForestConfig, ForestModel, RatePredictor};
use crate::schemes::{Scheme, SchemeConfig, SchemeKind};
use crate::seed;
use crate::sim::{run_training, EpochResult, LogEpochs, Models, SimConfig, StepRecord, TrainingReport};
use crate::stats::quantile;
use crate::synthetic::{generate_drives, SyntheticScenarioConfig};
use crate::trace::{parse_trace, DriveTrace, TraceSchema};

/// Where drives come from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSource {
    /// Replayed trace; synthetic drives are generated when absent.
    pub replay: Option<PathBuf>,
    /// Traces the predictor is trained on; the replay trace when empty.
    pub training: Vec<PathBuf>,
    /// Traces whose prediction errors define black spots; the training traces when empty.
    pub blackspot: Vec<PathBuf>,
    pub schema: TraceSchema,
}

/// Bandit settings whose rate scales may be derived from training labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BanditSection {
    pub delta: f64,
    pub alpha: Option<f64>,
    /// MBit/s; the `s_target_quantile` of training labels when absent.
    pub s_target: Option<f64>,
    /// MBit/s; the `s_max_quantile` of training labels when absent.
    pub s_max: Option<f64>,
    pub s_target_quantile: f64,
    pub s_max_quantile: f64,
    pub dt_max: f64,
    pub w: f64,
    pub omega_punish: f64,
    pub reward_rate_source: RateSource,
}

impl Default for BanditSection {
    fn default() -> Self {
        let b = BanditConfig::default();
        Self {
            delta: b.delta,
            alpha: None,
            s_target: None,
            s_max: None,
            s_target_quantile: 0.9,
            s_max_quantile: 0.99,
            dt_max: b.dt_max,
            w: b.w,
            omega_punish: b.omega_punish,
            reward_rate_source: b.reward_rate_source,
        }
    }
}

impl BanditSection {
    /// Fills in rate scales from `labels`, MBit/s.
    pub fn resolve(&self, labels: &[f64]) -> Result<BanditConfig> {
        let pick = |given: Option<f64>, q: f64, name: &str| {
            given
                .or_else(|| quantile(labels, q))
                .ok_or_else(|| Error::config(format!("{name} not given and no training labels to derive it from")))
        };
        let cfg = BanditConfig {
            delta: self.delta,
            alpha: self.alpha,
            s_target: pick(self.s_target, self.s_target_quantile, "s_target")?,
            s_max: pick(self.s_max, self.s_max_quantile, "s_max")?,
            dt_max: self.dt_max,
            w: self.w,
            omega_punish: self.omega_punish,
            reward_rate_source: self.reward_rate_source,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How the rate predictor is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    #[default]
    Forest,
    /// Labels plus noise.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorSection {
    pub kind: PredictorKind,
    pub forest: ForestConfig,
    /// MBit/s
    pub oracle_noise: f64,
}

impl Default for PredictorSection {
    fn default() -> Self {
        Self {
            kind: PredictorKind::Forest,
            forest: ForestConfig::default(),
            oracle_noise: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed; every stage derives its own stream from it.
    pub seed: u64,
    pub scheme: SchemeKind,
    pub epochs: usize,
    /// Trailing epochs averaged into a run's summary.
    pub eval_epochs: usize,
    pub log_epochs: LogEpochs,
    pub trace: TraceSource,
    pub synthetic: SyntheticScenarioConfig,
    pub predictor: PredictorSection,
    pub blackspot: BlackSpotConfig,
    pub bandit: BanditSection,
    pub schemes: SchemeConfig,
    pub sim: SimConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            scheme: SchemeKind::Bscb,
            epochs: 500,
            eval_epochs: 20,
            log_epochs: LogEpochs::Last,
            trace: TraceSource::default(),
            synthetic: SyntheticScenarioConfig::stationary(),
            predictor: PredictorSection::default(),
            blackspot: BlackSpotConfig::default(),
            bandit: BanditSection::default(),
            schemes: SchemeConfig::default(),
            sim: SimConfig::default(),
        }
    }
}

/// Seed streams of the pipeline stages.
const STREAM_DRIVES: u64 = 0x100;
const STREAM_FOREST: u64 = 0x200;
const STREAM_KMEANS: u64 = 0x300;
const STREAM_CHANNEL: u64 = 0x400;
const STREAM_SCHEME: u64 = 0x500;
const STREAM_ORACLE: u64 = 0x600;

/// Drives used by one experiment.
#[derive(Debug, Clone)]
pub struct Drives {
    pub training: Vec<DriveTrace>,
    pub blackspot: Vec<DriveTrace>,
    pub replay: DriveTrace,
}

impl Drives {
    /// Labels of the training drives, MBit/s.
    pub fn training_labels(&self) -> Vec<f64> {
        self.training
            .iter()
            .flat_map(|t| t.measured_data_rate().iter().flatten().copied())
            .collect()
    }
}

impl ExperimentConfig {
    /// Copies the master seed into every stage.
    pub fn with_derived_seeds(mut self) -> Self {
        self.predictor.forest.seed = seed::mix(self.seed, STREAM_FOREST);
        self.blackspot.seed = seed::mix(self.seed, STREAM_KMEANS);
        self.sim.channel.seed = seed::mix(self.seed, STREAM_CHANNEL);
        self.schemes.seed = seed::mix(self.seed, STREAM_SCHEME);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be >= 1"));
        }
        if self.eval_epochs == 0 {
            return Err(Error::config("eval_epochs must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.bandit.s_target_quantile) || !(0.0..=1.0).contains(&self.bandit.s_max_quantile) {
            return Err(Error::config("bandit quantiles must lie in [0, 1]"));
        }
        self.synthetic.validate()?;
        self.sim.validate()
    }

    pub fn load_drives(&self) -> Result<Drives> {
        let Some(replay_path) = &self.trace.replay else {
            let mut d = generate_drives(&self.synthetic, seed::mix(self.seed, STREAM_DRIVES), 4)?;
            let replay = d.pop().expect("four drives");
            let blackspot = vec![d.pop().expect("four drives")];
            return Ok(Drives {
                training: d,
                blackspot,
                replay,
            });
        };
        let mut schema = self.trace.schema.clone();
        let (replay, _) = parse_trace(replay_path, &schema)?;
        schema.origin = Some(replay.origin);
        let load = |paths: &[PathBuf]| -> Result<Vec<DriveTrace>> {
            paths.iter().map(|p| parse_trace(p, &schema).map(|(t, _)| t)).collect()
        };
        let training = match load(&self.trace.training)? {
            t if t.is_empty() => vec![replay.clone()],
            t => t,
        };
        let blackspot = match load(&self.trace.blackspot)? {
            b if b.is_empty() => training.clone(),
            b => b,
        };
        Ok(Drives {
            training,
            blackspot,
            replay,
        })
    }

    pub fn resolve_bandit(&self, drives: &Drives) -> Result<BanditConfig> {
        self.bandit.resolve(&drives.training_labels())
    }
}

/// Trains the forest on every labeled snapshot of the training drives.
pub fn train_predictor(drives: &Drives, cfg: &ForestConfig) -> Result<ForestModel> {
    let data: Vec<_> = drives
        .training
        .iter()
        .flat_map(|t| t.iter().filter_map(|(s, l)| Some((extract_features(s), l?))))
        .collect();
    train_forest(&data, cfg)
}

/// The predictor a run uses.
pub fn make_predictor(cfg: &ExperimentConfig, forest: Option<ForestModel>) -> Result<RatePredictor> {
    match cfg.predictor.kind {
        PredictorKind::Forest => forest
            .map(RatePredictor::Forest)
            .ok_or_else(|| Error::config("forest predictor selected but no model given")),
        PredictorKind::Oracle => Ok(RatePredictor::Oracle {
            noise_sigma: cfg.predictor.oracle_noise,
            seed: seed::mix(cfg.seed, STREAM_ORACLE),
        }),
    }
}

/// Black spots of the operator from the prediction errors on the black-spot drives.
pub fn build_black_spots(drives: &Drives, predictor: &RatePredictor, cfg: &BlackSpotConfig) -> Result<BlackSpotBuild> {
    let records: Vec<_> = drives
        .blackspot
        .iter()
        .flat_map(|t| prediction_records(predictor, t))
        .collect();
    let mno = &drives.replay.mno_id;
    let build = build_black_spot_map(&records, mno, cfg)?;
    Ok(BlackSpotBuild {
        map: build.map.with_origin(drives.replay.origin),
        clusters: build.clusters,
    })
}

/// Everything a simulation run produced.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub report: TrainingReport,
    pub log: Vec<StepRecord>,
    pub scheme: Scheme,
    pub bandit: BanditConfig,
    /// Mean of the last `eval_epochs` epochs.
    pub summary: EpochResult,
    pub efficiency: EfficiencyIndicators,
}

/// Replays `cfg.epochs` epochs of `cfg.scheme`, optionally continuing from `resume`.
pub fn simulate(
    cfg: &ExperimentConfig,
    drives: &Drives,
    predictor: &RatePredictor,
    map: Option<&BlackSpotMap>,
    resume: Option<Scheme>,
) -> Result<SimulationOutput> {
    let bandit = cfg.resolve_bandit(drives)?;
    let mut scheme = match resume {
        Some(s) if s.kind != cfg.scheme => {
            return Err(Error::config(format!(
                "resume state is for scheme {}, not {}",
                s.kind, cfg.scheme
            )))
        }
        Some(mut s) => {
            s.config = cfg.schemes.clone();
            s.bandit_config = bandit.clone();
            s
        }
        None => Scheme::new(cfg.scheme, cfg.schemes.clone(), bandit.clone())?,
    };
    let models = Models {
        predictor,
        black_spots: map,
    };
    let mut log = Vec::new();
    let report = run_training(&drives.replay, &mut scheme, cfg.epochs, models, &cfg.sim, cfg.log_epochs, &mut log)?;
    let tail = &report.epochs[report.epochs.len().saturating_sub(cfg.eval_epochs)..];
    let summary = mean_result(tail);
    let efficiency = efficiency(summary.mean_data_rate, summary.mean_aoi, bandit.s_target, bandit.dt_max)?;
    Ok(SimulationOutput {
        report,
        log,
        scheme,
        bandit,
        summary,
        efficiency,
    })
}

/// Field-wise mean of epoch results; counts are rounded.
pub fn mean_result(results: &[EpochResult]) -> EpochResult {
    let n = results.len().max(1) as f64;
    let avg = |f: fn(&EpochResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let count = |f: fn(&EpochResult) -> f64| avg(f).round();
    EpochResult {
        epoch: results.last().map_or(0, |r| r.epoch),
        mean_data_rate: avg(|r| r.mean_data_rate),
        mean_aoi: avg(|r| r.mean_aoi),
        max_aoi: results.iter().map(|r| r.max_aoi).fold(0.0, f64::max),
        total_prbs: count(|r| r.total_prbs as f64) as u64,
        total_energy: avg(|r| r.total_energy),
        tx_count: count(|r| r.tx_count as f64) as usize,
        deadline_violations: count(|r| r.deadline_violations as f64) as usize,
        blackspot_tx: results.iter().map(|r| r.blackspot_tx).max().unwrap_or(0),
        bytes_sent: avg(|r| r.bytes_sent),
        bytes_generated: avg(|r| r.bytes_generated),
        tx_time: avg(|r| r.tx_time),
    }
}

/// Parameters a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    W,
    Delta,
    DtMax,
    PeriodicInterval,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::W => "w",
            SweepParameter::Delta => "delta",
            SweepParameter::DtMax => "dt_max",
            SweepParameter::PeriodicInterval => "periodic_interval",
        }
    }

    pub fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepParameter::W => cfg.bandit.w = value,
            SweepParameter::Delta => cfg.bandit.delta = value,
            SweepParameter::DtMax => cfg.bandit.dt_max = value,
            SweepParameter::PeriodicInterval => cfg.schemes.periodic_interval = value,
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepParameter::W,
            SweepParameter::Delta,
            SweepParameter::DtMax,
            SweepParameter::PeriodicInterval,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::config(format!("cannot sweep `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub e_s: f64,
    pub e_aoi: f64,
    /// MBit/s
    pub mean_data_rate: f64,
    /// s
    pub mean_aoi: f64,
}

/// One simulation per grid value, all with the same drives and models.
///
/// Grid points run on separate threads; rows come back in grid order.
pub fn sweep(
    cfg: &ExperimentConfig,
    drives: &Drives,
    predictor: &RatePredictor,
    map: Option<&BlackSpotMap>,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<SweepRow>> {
    let run = |value: f64| -> Result<SweepRow> {
        let mut c = cfg.clone();
        c.log_epochs = LogEpochs::None;
        parameter.apply(&mut c, value);
        let out = simulate(&c, drives, predictor, map, None)?;
        Ok(SweepRow {
            value,
            e_s: out.efficiency.e_s,
            e_aoi: out.efficiency.e_aoi,
            mean_data_rate: out.summary.mean_data_rate,
            mean_aoi: out.summary.mean_aoi,
        })
    };
    std::thread::scope(|s| {
        let handles: Vec<_> = values.iter().map(|&v| s.spawn(move || run(v))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

/// Saved learning state for continuing a run.
pub fn save_state(scheme: &Scheme) -> Result<String> {
    Ok(serde_json::to_string_pretty(scheme)?)
}

pub fn load_state(json: &str) -> Result<Scheme> {
    Ok(serde_json::from_str(json)?)
}
