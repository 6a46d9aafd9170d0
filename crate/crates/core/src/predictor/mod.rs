//! Supervised data-rate prediction with a regression forest.

mod features;
mod forest;
mod tree;

pub use features::{cell_id_hash, extract_features, Features, FEATURE_COUNT, FEATURE_NAMES, PAYLOAD_INDEX};
pub use forest::{train_forest, ForestConfig, ForestModel, TrainingMeta, FOREST_FORMAT, FOREST_VERSION};
pub use tree::{Node, RegressionTree, TreeParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Point;
use crate::seed;
use crate::trace::ContextSnapshot;

/// A prediction paired with the measurement it tried to match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub position: Point,
    /// MBit/s
    pub predicted: f64,
    /// MBit/s
    pub measured: f64,
}

/// Root mean squared difference between predictions and measurements.
pub fn prediction_rmse(records: &[PredictionRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::Empty("no prediction records"));
    }
    let sse: f64 = records.iter().map(|r| (r.predicted - r.measured).powi(2)).sum();
    Ok((sse / records.len() as f64).sqrt())
}

/// Rate model consulted by the simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RatePredictor {
    Forest(ForestModel),
    /// Returns the ground-truth label plus Gaussian noise; isolates scheme
    /// behavior from predictor quality.
    Oracle { noise_sigma: f64, seed: u64 },
}

impl RatePredictor {
    /// Predicted rate for `snapshot` with `payload` bytes queued.
    ///
    /// `label` and `index` are only consulted by the oracle.
    pub fn predict(&self, snapshot: &ContextSnapshot, payload: f64, label: Option<f64>, index: usize) -> f64 {
        match self {
            RatePredictor::Forest(model) => {
                let mut x = extract_features(snapshot);
                x[PAYLOAD_INDEX] = payload;
                model.predict_features(&x)
            }
            RatePredictor::Oracle { noise_sigma, seed } => {
                let noise = if *noise_sigma > 0.0 {
                    let mut rng = seed::rng(*seed, index as u64);
                    let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
                    noise_sigma * z
                } else {
                    0.0
                };
                (label.unwrap_or(0.0) + noise).max(0.0)
            }
        }
    }
}

/// Predictions of `model` for every labeled snapshot of `trace`.
pub fn prediction_records(model: &RatePredictor, trace: &crate::trace::DriveTrace) -> Vec<PredictionRecord> {
    trace
        .iter()
        .enumerate()
        .filter_map(|(i, (s, label))| {
            let measured = label?;
            Some(PredictionRecord {
                position: s.position,
                predicted: model.predict(s, s.payload_size, Some(measured), i),
                measured,
            })
        })
        .collect()
}
