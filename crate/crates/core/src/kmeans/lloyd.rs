use ndarray::{Array2, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{nearest, ClusterStats, Partition};
use crate::error::{domain, Result};
use crate::geometry::squared_distance;
use crate::projection::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub enum LloydInit {
    /// `k` distinct points drawn uniformly as initial centroids.
    Seed(u64),
    Partition(Partition),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub partition: Partition,
    pub stats: ClusterStats,
    pub iterations: usize,
    pub converged: bool,
    /// Cost after every centroid update, starting with the initial one.
    pub cost_history: Vec<f64>,
}

pub fn lloyd(data: &Dataset, k: usize, init: LloydInit, max_iters: usize) -> Result<LloydResult> {
    let m = data.len();
    if k == 0 || k > m {
        return Err(domain(format!("k must lie in [1, {m}], got {k}")));
    }
    if max_iters == 0 {
        return Err(domain("max_iters must be >= 1"));
    }
    let points = data.points().view();

    let (mut labels, mut history) = match init {
        LloydInit::Partition(p) => {
            if p.k() != k {
                return Err(domain(format!(
                    "initial partition has {} clusters, k={k}",
                    p.k()
                )));
            }
            (p.assignments().to_vec(), Vec::new())
        }
        LloydInit::Seed(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picks = rand::seq::index::sample(&mut rng, m, k);
            let mut c = Array2::zeros((k, data.dim()));
            for (j, i) in picks.iter().enumerate() {
                c.row_mut(j).assign(&points.row(i));
            }
            (assign(points, &c), Vec::new())
        }
    };

    let mut iterations = 0;
    let mut converged = false;
    loop {
        repair_empty(points, &mut labels, k);
        let partition = Partition::new(labels.clone(), k)?;
        let stats = ClusterStats::compute_points(points, &partition)?;
        if let Some(&prev) = history.last() {
            debug_assert!(
                stats.cost <= prev * (1.0 + 1e-12) + 1e-300,
                "Lloyd cost increased: {prev} -> {}",
                stats.cost
            );
        }
        history.push(stats.cost);

        let next = assign(points, &stats.centroids);
        if next == labels {
            converged = true;
        }
        if converged || iterations == max_iters {
            return Ok(LloydResult {
                partition,
                stats,
                iterations,
                converged,
                cost_history: history,
            });
        }
        labels = next;
        iterations += 1;
    }
}

fn assign(points: ArrayView2<'_, f64>, centroids: &Array2<f64>) -> Vec<usize> {
    (0..points.nrows())
        .into_par_iter()
        .map(|i| nearest(points.row(i), centroids).0)
        .collect()
}

/// Gives every empty cluster the point farthest from its current centroid,
/// taken from clusters that can spare one.
fn repair_empty(points: ArrayView2<'_, f64>, labels: &mut [usize], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &c in labels.iter() {
            sizes[c] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        // Centroids of the nonempty clusters only.
        let mut sums = Array2::<f64>::zeros((k, points.ncols()));
        for (i, &c) in labels.iter().enumerate() {
            let mut row = sums.row_mut(c);
            row += &points.row(i);
        }
        let mut far = (usize::MAX, -1.0);
        for (i, &c) in labels.iter().enumerate() {
            if sizes[c] < 2 {
                continue;
            }
            let mu = sums.row(c).mapv(|v| v / sizes[c] as f64);
            let d = squared_distance(points.row(i), mu.view());
            if d > far.1 {
                far = (i, d);
            }
        }
        labels[far.0] = empty;
    }
}
