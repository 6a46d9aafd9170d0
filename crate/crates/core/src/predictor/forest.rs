//! Bagged regression forests and their JSON persistence.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{Features, FEATURE_COUNT, FEATURE_NAMES};
use super::tree::{RegressionTree, TreeParams};
use crate::error::{Error, Result};
use crate::seed;
use crate::trace::ContextSnapshot;

pub const FOREST_FORMAT: &str = "bscb-forest";
pub const FOREST_VERSION: u32 = 1;

/// Minimum number of labeled rows accepted by [`train_forest`].
pub const MIN_TRAINING_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Rows drawn per tree, as a fraction of the training set.
    pub sample_fraction: f64,
    /// Draw with replacement.
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `round(sqrt(d))` when `None`.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 20,
            sample_fraction: 0.8,
            bootstrap: true,
            max_depth: Some(12),
            min_leaf: 5,
            max_features: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    fn features_per_split(&self) -> usize {
        self.max_features
            .unwrap_or_else(|| (FEATURE_COUNT as f64).sqrt().round() as usize)
            .clamp(1, FEATURE_COUNT)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub config: ForestConfig,
    pub training_rows: usize,
    /// RMSE over rows left out of at least one tree's sample.
    pub oob_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    trees: Vec<RegressionTree>,
    feature_names: Vec<String>,
    meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct ForestDocument {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: ForestModel,
}

impl ForestModel {
    pub fn from_trees(trees: Vec<RegressionTree>, meta: TrainingMeta) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        Ok(Self {
            trees,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            meta,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    /// Arithmetic mean of the tree outputs.
    pub fn predict_features(&self, x: &Features) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, s: &ContextSnapshot) -> f64 {
        self.predict_features(&super::extract_features(s))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ForestDocument {
            format: FOREST_FORMAT.into(),
            version: FOREST_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let doc: ForestDocument = serde_json::from_str(json)?;
        if doc.format != FOREST_FORMAT || doc.version != FOREST_VERSION {
            return Err(Error::Format(format!(
                "expected {FOREST_FORMAT} v{FOREST_VERSION}, found {} v{}",
                doc.format, doc.version
            )));
        }
        if doc.model.feature_names != FEATURE_NAMES {
            return Err(Error::Format("forest feature order does not match this build".into()));
        }
        let model = doc.model;
        let trees = model
            .trees
            .into_iter()
            .map(|t| RegressionTree::from_nodes(t.nodes().to_vec()))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Format("malformed tree".into()))?;
        Self::from_trees(trees, model.meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}

/// Trains a forest on `(features, label)` rows. Deterministic for a fixed seed.
pub fn train_forest(data: &[(Features, f64)], cfg: &ForestConfig) -> Result<ForestModel> {
    if data.is_empty() {
        return Err(Error::Empty("no training rows"));
    }
    if data.len() < MIN_TRAINING_ROWS {
        return Err(Error::invalid(format!(
            "{} training rows, at least {MIN_TRAINING_ROWS} required",
            data.len()
        )));
    }
    if let Some(bad) = data.iter().position(|(_, y)| !(*y >= 0.0) || !y.is_finite()) {
        return Err(Error::invalid(format!("label of row {} must be finite and >= 0", bad + 1)));
    }
    if cfg.n_trees == 0 || !(cfg.sample_fraction > 0.0 && cfg.sample_fraction <= 1.0) {
        return Err(Error::config("forest needs n_trees >= 1 and sample_fraction in (0, 1]"));
    }

    let x: Vec<Features> = data.iter().map(|(f, _)| *f).collect();
    let y: Vec<f64> = data.iter().map(|(_, l)| *l).collect();
    let n = data.len();
    let per_tree = ((n as f64 * cfg.sample_fraction).round() as usize).clamp(1, n);
    let params = TreeParams {
        max_depth: cfg.max_depth,
        min_leaf: cfg.min_leaf,
        max_features: Some(cfg.features_per_split()),
    };

    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    for t in 0..cfg.n_trees {
        let mut rng = seed::rng(cfg.seed, t as u64);
        let rows: Vec<usize> = if cfg.bootstrap {
            (0..per_tree).map(|_| rng.random_range(0..n)).collect()
        } else if per_tree == n {
            (0..n).collect()
        } else {
            let mut r = rand::seq::index::sample(&mut rng, n, per_tree).into_vec();
            r.sort_unstable();
            r
        };
        let tree = RegressionTree::fit(&x, &y, &rows, &params, &mut rng);

        let mut in_bag = vec![false; n];
        for &r in &rows {
            in_bag[r] = true;
        }
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.predict(&x[i]);
            oob_count[i] += 1;
        }
        trees.push(tree);
    }

    let (sse, m) = (0..n)
        .filter(|&i| oob_count[i] > 0)
        .fold((0.0, 0usize), |(sse, m), i| {
            (sse + (oob_sum[i] / oob_count[i] as f64 - y[i]).powi(2), m + 1)
        });
    let meta = TrainingMeta {
        config: *cfg,
        training_rows: n,
        oob_rmse: (m > 0).then(|| (sse / m as f64).sqrt()),
    };
    ForestModel::from_trees(trees, meta)
}
