//! Exhaustive search over set partitions into exactly `k` nonempty blocks.
//!
//! Partitions are enumerated as restricted growth strings (the first point
//! is in block 0, each later point joins an existing block or opens the next
//! one), which visits every set partition once and in lexicographic order.
//! Block costs are kept as within-block pair sums over a squared-distance
//! matrix, `Σ_{i<i'} d²(i,i') / |C|`, so each step costs `O(m)` regardless of
//! the ambient dimension.

use ndarray::Array2;
use rayon::prelude::*;

use super::{ClusterStats, Partition};
use crate::error::{domain, JlError, Result};
use crate::geometry::squared_distance;
use crate::projection::Dataset;

pub const BRUTE_FORCE_LIMIT: usize = 14;
/// Limit for arbitrary dissimilarities, where nothing can be pruned.
pub const METRIC_BRUTE_FORCE_LIMIT: usize = 12;

/// Points assigned before the search forks into parallel branches.
const FORK_DEPTH: usize = 4;

fn check_size(m: usize, k: usize, limit: usize) -> Result<()> {
    if m > limit {
        return Err(JlError::TooLarge { m, limit });
    }
    if k == 0 || k > m {
        return Err(domain(format!("k must lie in [1, {m}], got {k}")));
    }
    Ok(())
}

/// All valid restricted-growth prefixes of length `depth` that can still be
/// completed to exactly `k` blocks over `m` points.
fn prefixes(m: usize, k: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![0]];
    for len in 1..depth.min(m) {
        out = out
            .into_iter()
            .flat_map(|p| {
                let used = p.iter().max().map_or(0, |&b| b + 1);
                (0..=used.min(k - 1)).map(move |b| {
                    let mut q = p.clone();
                    q.push(b);
                    q
                })
            })
            .filter(|p| {
                let used = p.iter().max().unwrap() + 1;
                k - used.min(k) <= m - (len + 1)
            })
            .collect();
    }
    out
}

type Candidate = (f64, Vec<usize>);

fn better(a: &Candidate, b: &Candidate) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

struct Search<'a> {
    d2: &'a Array2<f64>,
    k: usize,
    /// Cut branches whose partial cost already exceeds the best; valid only
    /// when adding a point cannot lower a block's cost.
    prune: bool,
    pair_sums: Vec<f64>,
    counts: Vec<usize>,
    labels: Vec<usize>,
    best: Option<Candidate>,
}

impl Search<'_> {
    fn push(&mut self, b: usize) {
        let i = self.labels.len();
        let add: f64 = (0..i)
            .filter(|&j| self.labels[j] == b)
            .map(|j| self.d2[[i, j]])
            .sum();
        self.pair_sums[b] += add;
        self.counts[b] += 1;
        self.labels.push(b);
    }

    fn pop(&mut self) {
        let b = self.labels.pop().expect("nonempty");
        let i = self.labels.len();
        let add: f64 = (0..i)
            .filter(|&j| self.labels[j] == b)
            .map(|j| self.d2[[i, j]])
            .sum();
        self.pair_sums[b] -= add;
        self.counts[b] -= 1;
    }

    fn partial_cost(&self, used: usize) -> f64 {
        (0..used)
            .map(|b| self.pair_sums[b] / self.counts[b] as f64)
            .sum()
    }

    fn descend(&mut self, used: usize) {
        let i = self.labels.len();
        let m = self.d2.nrows();
        if self.prune {
            if let Some((best, _)) = &self.best {
                if self.partial_cost(used) > *best * (1.0 + 1e-12) {
                    return;
                }
            }
        }
        if i == m {
            if used == self.k {
                let cand = (
                    leaf_cost(self.d2, &self.labels, self.k),
                    self.labels.clone(),
                );
                if self.best.as_ref().is_none_or(|b| better(&cand, b)) {
                    self.best = Some(cand);
                }
            }
            return;
        }
        if self.k - used > m - i {
            return;
        }
        for b in 0..=used.min(self.k - 1) {
            self.push(b);
            self.descend(used.max(b + 1));
            self.pop();
        }
    }
}

/// Cost recomputed in index order so that ties compare values that do not
/// depend on the search path.
fn leaf_cost(d2: &Array2<f64>, labels: &[usize], k: usize) -> f64 {
    let mut sums = vec![0.0; k];
    let mut counts = vec![0usize; k];
    for (i, &b) in labels.iter().enumerate() {
        counts[b] += 1;
        for j in (i + 1)..labels.len() {
            if labels[j] == b {
                sums[b] += d2[[i, j]];
            }
        }
    }
    sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).sum()
}

fn search(d2: &Array2<f64>, k: usize, prune: bool) -> Vec<usize> {
    let m = d2.nrows();
    prefixes(m, k, FORK_DEPTH)
        .into_par_iter()
        .filter_map(|prefix| {
            let mut s = Search {
                d2,
                k,
                prune,
                pair_sums: vec![0.0; k],
                counts: vec![0; k],
                labels: Vec::with_capacity(m),
                best: None,
            };
            let mut used = 0;
            for &b in &prefix {
                s.push(b);
                used = used.max(b + 1);
            }
            s.descend(used);
            s.best
        })
        .reduce_with(|a, b| if better(&b, &a) { b } else { a })
        .expect("k <= m admits a partition")
        .1
}

/// Squared Euclidean distances as a dense symmetric matrix.
pub fn squared_distance_matrix(data: &Dataset) -> Array2<f64> {
    let m = data.len();
    let mut d2 = Array2::zeros((m, m));
    for i in 0..m {
        for j in (i + 1)..m {
            let d = squared_distance(data.point(i), data.point(j));
            d2[[i, j]] = d;
            d2[[j, i]] = d;
        }
    }
    d2
}

/// The global minimiser of the k-means cost, `m <= 14`. Among equal costs the
/// lexicographically smallest assignment vector wins.
pub fn brute_force_optimum(data: &Dataset, k: usize) -> Result<(Partition, ClusterStats)> {
    check_size(data.len(), k, BRUTE_FORCE_LIMIT)?;
    let labels = search(&squared_distance_matrix(data), k, true);
    let partition = Partition::new(labels, k)?;
    let stats = ClusterStats::compute(data, &partition)?;
    Ok((partition, stats))
}

/// `Σ_j (1/(2|C_j|)) Σ_{i,i'∈C_j} d2[i][i']` for a symmetric matrix of squared
/// dissimilarities. Equals the k-means cost when `d2` is Euclidean.
pub fn metric_partition_cost(d2: &Array2<f64>, partition: &Partition) -> Result<f64> {
    if d2.nrows() != d2.ncols() || d2.nrows() != partition.len() {
        return Err(JlError::Shape(
            "distance matrix does not match partition".into(),
        ));
    }
    Ok(leaf_cost(d2, partition.assignments(), partition.k()))
}

/// Exhaustive optimum of [`metric_partition_cost`], `m <= 12`. No pruning:
/// the cost of a block can drop when a point joins it under a non-Euclidean
/// dissimilarity.
pub fn brute_force_optimum_metric(d2: &Array2<f64>, k: usize) -> Result<(Partition, f64)> {
    if d2.nrows() != d2.ncols() {
        return Err(JlError::Shape("distance matrix must be square".into()));
    }
    check_size(d2.nrows(), k, METRIC_BRUTE_FORCE_LIMIT)?;
    let partition = Partition::new(search(d2, k, false), k)?;
    let cost = metric_partition_cost(d2, &partition)?;
    Ok((partition, cost))
}
