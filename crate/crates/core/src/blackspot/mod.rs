//! Geographic clusters of high prediction error.
//!
//! Prediction records are clustered with k-means on their planar position.
//! Clusters whose RMSE exceeds the operator threshold are turned into rotated
//! ellipses; during replay, predictions inside any ellipse are not trusted.

mod ellipse;
mod kmeans;
mod map;

pub use ellipse::{fit_ellipse, normalize_axis_angle, point_in_ellipse, BlackSpotEllipse, Extent};
pub use kmeans::{kmeans, KMeans, DEFAULT_MAX_ITERATIONS};
pub use map::{black_spot_statistics, in_black_spot, BlackSpotMap, BlackSpotRun, BlackSpotStatistics};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Point;
use crate::predictor::{prediction_rmse, PredictionRecord};

/// Default RMSE threshold per operator, MBit/s.
pub const DEFAULT_RMSE_MAX: [(&str, f64); 3] = [("A", 3.0), ("B", 2.25), ("C", 2.5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub centroid: Point,
    /// Indices into the clustered records.
    pub members: Vec<usize>,
    /// MBit/s
    pub rmse: f64,
}

/// Clusters records by position and computes each cluster's RMSE.
pub fn kmeans_cluster(records: &[PredictionRecord], k: usize, seed: u64) -> Result<Vec<Cluster>> {
    let points: Vec<Point> = records.iter().map(|r| r.position).collect();
    let km = kmeans(&points, k, seed, DEFAULT_MAX_ITERATIONS)?;
    km.members()
        .into_iter()
        .zip(km.centroids)
        .map(|(members, centroid)| {
            let rs: Vec<PredictionRecord> = members.iter().map(|&i| records[i]).collect();
            Ok(Cluster {
                centroid,
                rmse: prediction_rmse(&rs)?,
                members,
            })
        })
        .collect()
}

/// Clusters whose RMSE strictly exceeds `rmse_max`.
pub fn classify_black_spots(clusters: &[Cluster], rmse_max: f64) -> Vec<Cluster> {
    clusters.iter().filter(|c| c.rmse > rmse_max).cloned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlackSpotConfig {
    /// Fixed cluster count; derived from `clusters_per_km` when absent.
    pub n_clusters: Option<usize>,
    pub clusters_per_km: f64,
    /// MBit/s; the operator default when absent.
    pub rmse_max: Option<f64>,
    /// Minimum semi-axis, m
    pub axis_floor: f64,
    pub extent: Extent,
    pub seed: u64,
}

impl Default for BlackSpotConfig {
    fn default() -> Self {
        Self {
            n_clusters: None,
            clusters_per_km: 4.0,
            rmse_max: None,
            axis_floor: 10.0,
            extent: Extent::Max,
            seed: 0,
        }
    }
}

impl BlackSpotConfig {
    pub fn threshold_for(&self, mno_id: &str) -> Result<f64> {
        self.rmse_max
            .or_else(|| DEFAULT_RMSE_MAX.iter().find(|(m, _)| *m == mno_id).map(|(_, v)| *v))
            .ok_or_else(|| Error::config(format!("no rmse_max given and no default for operator `{mno_id}`")))
    }

    /// Cluster count for a drive of `path_length` meters, at least 1.
    pub fn cluster_count(&self, path_length: f64) -> usize {
        self.n_clusters
            .unwrap_or_else(|| (self.clusters_per_km * path_length / 1000.0).round() as usize)
            .max(1)
    }
}

/// Result of the offline black-spot pipeline.
#[derive(Debug, Clone)]
pub struct BlackSpotBuild {
    pub map: BlackSpotMap,
    pub clusters: Vec<Cluster>,
}

/// Clusters, classifies and fits ellipses for one operator's records.
///
/// Records are taken in drive order; their path length scales the default
/// cluster count.
pub fn build_black_spot_map(records: &[PredictionRecord], mno_id: &str, cfg: &BlackSpotConfig) -> Result<BlackSpotBuild> {
    if records.is_empty() {
        return Err(Error::Empty("no prediction records"));
    }
    let threshold = cfg.threshold_for(mno_id)?;
    let path: f64 = records.windows(2).map(|w| w[0].position.distance(w[1].position)).sum();
    let k = cfg.cluster_count(path).min(records.len());
    let clusters = kmeans_cluster(records, k, cfg.seed)?;
    let ellipses = classify_black_spots(&clusters, threshold)
        .iter()
        .map(|c| {
            let pts: Vec<Point> = c.members.iter().map(|&i| records[i].position).collect();
            fit_ellipse(&pts, cfg.axis_floor, cfg.extent, c.rmse)
        })
        .collect();
    Ok(BlackSpotBuild {
        map: BlackSpotMap::new(mno_id, threshold, ellipses)?,
        clusters,
    })
}
