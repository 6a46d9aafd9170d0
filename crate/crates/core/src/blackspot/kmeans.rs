//! Lloyd's k-means with k-means++ seeding on planar points.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Point;
use crate::seed;

pub const DEFAULT_MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeans {
    pub centroids: Vec<Point>,
    /// Cluster index per input point.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_history: Vec<f64>,
    /// True when the last assignment step changed nothing.
    pub converged: bool,
}

impl KMeans {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }

    /// Member indices per cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.centroids.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            m[c].push(i);
        }
        m
    }
}

fn nearest(p: Point, centroids: &[Point]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = p.distance_sq(*c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus(points: &[Point], k: usize, rng: &mut impl Rng) -> Vec<Point> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| p.distance_sq(centroids[0])).collect();
    while centroids.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid
            Err(_) => rng.random_range(0..points.len()),
        };
        let c = points[next];
        centroids.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.distance_sq(c));
        }
    }
    centroids
}

/// Clusters `points` into `k` groups.
///
/// Runs until an assignment step changes nothing or `max_iterations` is hit.
/// A point equidistant to several centroids keeps its current cluster, or
/// joins the lowest-indexed one on the first pass. Clusters left empty take
/// over the point farthest from its centroid.
pub fn kmeans(points: &[Point], k: usize, seed: u64, max_iterations: usize) -> Result<KMeans> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > points.len() {
        return Err(Error::invalid(format!("k = {k} exceeds the {} points", points.len())));
    }
    let mut rng = seed::rng(seed, 0x6b6d);
    let mut centroids = plus_plus(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut inertia_history = Vec::new();
    let mut converged = false;

    for _ in 0..max_iterations.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let (j, d) = nearest(*p, &centroids);
            let keep = assignment[i] != usize::MAX && p.distance_sq(centroids[assignment[i]]) <= d;
            if !keep && assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
        }

        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        for empty in 0..k {
            if sizes[empty] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| {
                    let da = points[a].distance_sq(centroids[assignment[a]]);
                    let db = points[b].distance_sq(centroids[assignment[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("k <= n leaves a cluster with two members");
            sizes[assignment[far]] -= 1;
            sizes[empty] = 1;
            assignment[far] = empty;
            centroids[empty] = points[far];
            changed = true;
        }

        let inertia = points
            .iter()
            .zip(&assignment)
            .map(|(p, &a)| p.distance_sq(centroids[a]))
            .sum();
        inertia_history.push(inertia);
        if !changed {
            converged = true;
            break;
        }

        let mut sums = vec![Point::default(); k];
        for (p, &a) in points.iter().zip(&assignment) {
            sums[a] = sums[a] + *p;
        }
        for j in 0..k {
            centroids[j] = sums[j] * (1.0 / sizes[j] as f64);
        }
    }

    Ok(KMeans {
        centroids,
        assignment,
        inertia_history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Point> {
        (0..n).map(|i| Point::new((i % 7) as f64 * 3.0, (i / 7) as f64 * 2.0 + (i % 3) as f64)).collect()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = grid(30);
        let r = kmeans(&pts, 1, 3, 300).unwrap();
        let c = Point::centroid(&pts).unwrap();
        assert!(r.centroids[0].distance(c) < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let pts = grid(12);
        let r = kmeans(&pts, 12, 5, 300).unwrap();
        assert_eq!(r.inertia(), 0.0);
        assert!(r.members().iter().all(|m| m.len() == 1));
    }

    #[test]
    fn inertia_never_increases() {
        let pts = grid(200);
        for seed in 0..10 {
            let r = kmeans(&pts, 9, seed, 300).unwrap();
            for w in r.inertia_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn duplicates_do_not_leave_empty_clusters() {
        let pts = vec![Point::new(0.0, 0.0); 5];
        let r = kmeans(&pts, 3, 1, 300).unwrap();
        assert!(r.members().iter().all(|m| !m.is_empty()));
    }

    #[test]
    fn rejects_k_above_n() {
        assert!(kmeans(&grid(3), 4, 0, 300).is_err());
        assert!(kmeans(&grid(3), 0, 0, 300).is_err());
    }
}
