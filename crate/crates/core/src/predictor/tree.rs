//! CART regression trees grown by greedy variance reduction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::{Features, FEATURE_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; all of them when `None`.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        }
    }
}

/// Binary tree stored as an array; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl RegressionTree {
    /// A tree that predicts `value` everywhere.
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { value }],
        }
    }

    /// Builds a tree from explicit nodes, checking child links.
    pub fn from_nodes(nodes: Vec<Node>) -> Option<Self> {
        let n = nodes.len();
        let ok = n > 0
            && nodes.iter().enumerate().all(|(i, node)| match node {
                Node::Split { left, right, feature, threshold } => {
                    *left > i && *right > i && *left < n && *right < n && *feature < FEATURE_COUNT
                        && !threshold.is_nan()
                }
                Node::Leaf { value } => value.is_finite(),
            });
        ok.then_some(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn predict(&self, x: &Features) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Grows a tree on the given row indices (duplicates allowed).
    ///
    /// Split candidates are midpoints between consecutive distinct values.
    /// Among equally good splits the lowest feature index, then the lowest
    /// threshold, wins.
    pub fn fit(x: &[Features], y: &[f64], rows: &[usize], params: &TreeParams, rng: &mut impl Rng) -> Self {
        let mut tree = Self { nodes: Vec::new() };
        let mut rows = rows.to_vec();
        tree.grow(x, y, &mut rows, 0, params, rng);
        tree
    }

    fn grow(
        &mut self,
        x: &[Features],
        y: &[f64],
        rows: &mut [usize],
        depth: usize,
        params: &TreeParams,
        rng: &mut impl Rng,
    ) -> usize {
        let id = self.nodes.len();
        let n = rows.len() as f64;
        let sum: f64 = rows.iter().map(|&r| y[r]).sum();
        let mean = sum / n;
        self.nodes.push(Node::Leaf { value: mean });

        let min_leaf = params.min_leaf.max(1);
        let pure = rows.iter().all(|&r| y[r] == y[rows[0]]);
        if pure || rows.len() < 2 * min_leaf || params.max_depth.is_some_and(|d| depth >= d) {
            return id;
        }
        let Some(best) = best_split(x, y, rows, min_leaf, params.max_features, rng) else {
            return id;
        };

        let mut split = 0;
        for i in 0..rows.len() {
            if x[rows[i]][best.feature] <= best.threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l_rows, r_rows) = rows.split_at_mut(split);
        let left = self.grow(x, y, l_rows, depth + 1, params, rng);
        let right = self.grow(x, y, r_rows, depth + 1, params, rng);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }
}

fn candidate_features(max_features: Option<usize>, rng: &mut impl Rng) -> Vec<usize> {
    match max_features {
        Some(m) if m < FEATURE_COUNT => {
            let mut f: Vec<usize> = rand::seq::index::sample(rng, FEATURE_COUNT, m.max(1)).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..FEATURE_COUNT).collect(),
    }
}

fn best_split(
    x: &[Features],
    y: &[f64],
    rows: &[usize],
    min_leaf: usize,
    max_features: Option<usize>,
    rng: &mut impl Rng,
) -> Option<Candidate> {
    let n = rows.len();
    let total: f64 = rows.iter().map(|&r| y[r]).sum();
    let mut best: Option<Candidate> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);

    for feature in candidate_features(max_features, rng) {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x[r][feature], y[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_sum = 0.0;
        for i in 0..n - 1 {
            left_sum += pairs[i].1;
            let n_left = i + 1;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let (v, next) = (pairs[i].0, pairs[i + 1].0);
            if v == next {
                continue;
            }
            // Maximizing this is equivalent to maximizing the SSE reduction.
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64;
            let better = match &best {
                None => true,
                Some(b) => score > b.score + 1e-12 * b.score.abs(),
            };
            if better {
                let mid = v + (next - v) / 2.0;
                best = Some(Candidate {
                    feature,
                    threshold: if mid < next { mid } else { v },
                    score,
                });
            }
        }
    }
    best
}
