//! k-means cost, Lloyd iteration, the exhaustive optimum for small instances,
//! and the checks that compare clusterings before and after projection.

mod exact;
mod lloyd;
mod transfer;

pub use exact::{
    brute_force_optimum, brute_force_optimum_metric, metric_partition_cost,
    squared_distance_matrix, BRUTE_FORCE_LIMIT, METRIC_BRUTE_FORCE_LIMIT,
};
pub use lloyd::{lloyd, LloydInit, LloydResult};
pub use transfer::{
    balance_quotient, cost_sandwich, cost_sandwich_check, global_optimum_transfer_check,
    is_lloyd_fixed_point, measure_gap, var_merge, var_merge_members, ClusterSummary, GapMeasure,
    OptimumTransfer, PairBalance, SandwichOutcome,
};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{JlError, Result};
use crate::geometry::squared_distance;
use crate::projection::Dataset;

/// Points per work item in parallel passes; fixed so that floating-point
/// accumulation order does not depend on the thread count.
const CHUNK: usize = 256;

/// Assignment of `m` points to `k` nonempty clusters.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    assignments: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 || assignments.is_empty() {
            return Err(JlError::Partition(
                "need at least one point and one cluster".into(),
            ));
        }
        let mut seen = vec![false; k];
        for (i, &c) in assignments.iter().enumerate() {
            if c >= k {
                return Err(JlError::Partition(format!(
                    "point {i} has label {c}, expected < {k}"
                )));
            }
            seen[c] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(JlError::Partition(format!("cluster {j} is empty")));
        }
        Ok(Self { assignments, k })
    }

    /// Labels renumbered in order of first appearance.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let (canon, k) = canonical_labels(labels);
        Self::new(canon, k)
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn cluster_of(&self, i: usize) -> usize {
        self.assignments[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignments {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self, j: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.assignments[i] == j)
            .collect()
    }

    /// The same partition with labels renumbered by first appearance.
    pub fn canonical(&self) -> Partition {
        let (canon, k) = canonical_labels(&self.assignments);
        Partition {
            assignments: canon,
            k,
        }
    }

    pub fn same_up_to_relabeling(&self, other: &Partition) -> bool {
        self.k == other.k && self.canonical().assignments == other.canonical().assignments
    }

    fn check_len(&self, m: usize) -> Result<()> {
        if self.len() != m {
            return Err(JlError::Shape(format!(
                "partition of {} points applied to {m} points",
                self.len()
            )));
        }
        Ok(())
    }
}

fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let canon = labels
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (canon, map.len())
}

/// Centroids, sizes, per-cluster variances and total cost of a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStats {
    pub centroids: Array2<f64>,
    pub sizes: Vec<usize>,
    /// `VAR(C_j) = (1/|C_j|) Σ_{i∈C_j} ‖x_i - μ_j‖²`.
    pub variances: Vec<f64>,
    /// `Σ_i ‖x_i - μ(c(i))‖²`.
    pub cost: f64,
}

impl ClusterStats {
    pub fn compute(data: &Dataset, partition: &Partition) -> Result<Self> {
        Self::compute_points(data.points().view(), partition)
    }

    pub fn compute_points(points: ArrayView2<'_, f64>, partition: &Partition) -> Result<Self> {
        partition.check_len(points.nrows())?;
        let centroids = centroids(points, partition);
        let sizes = partition.sizes();
        let sse = within_sums(points, partition, &centroids);
        let variances = sse.iter().zip(&sizes).map(|(s, &c)| s / c as f64).collect();
        let cost = sse.iter().sum();
        Ok(Self {
            centroids,
            sizes,
            variances,
            cost,
        })
    }

    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn summary(&self, j: usize) -> ClusterSummary {
        ClusterSummary {
            size: self.sizes[j],
            mean: self.centroids.row(j).to_owned(),
            variance: self.variances[j],
        }
    }
}

fn chunk_ranges(m: usize) -> Vec<(usize, usize)> {
    (0..m.div_ceil(CHUNK))
        .map(|c| (c * CHUNK, ((c + 1) * CHUNK).min(m)))
        .collect()
}

pub(crate) fn centroids(points: ArrayView2<'_, f64>, partition: &Partition) -> Array2<f64> {
    let (k, d) = (partition.k(), points.ncols());
    let partials: Vec<Array2<f64>> = chunk_ranges(points.nrows())
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = Array2::zeros((k, d));
            for i in lo..hi {
                let mut row = acc.row_mut(partition.cluster_of(i));
                row += &points.row(i);
            }
            acc
        })
        .collect();
    let mut sums = Array2::zeros((k, d));
    for p in &partials {
        sums += p;
    }
    for (mut row, &size) in sums.axis_iter_mut(Axis(0)).zip(&partition.sizes()) {
        row /= size as f64;
    }
    sums
}

fn within_sums(
    points: ArrayView2<'_, f64>,
    partition: &Partition,
    centroids: &Array2<f64>,
) -> Vec<f64> {
    let k = partition.k();
    let partials: Vec<Vec<f64>> = chunk_ranges(points.nrows())
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = vec![0.0; k];
            for i in lo..hi {
                let c = partition.cluster_of(i);
                acc[c] += squared_distance(points.row(i), centroids.row(c));
            }
            acc
        })
        .collect();
    let mut sums = vec![0.0; k];
    for p in &partials {
        for (s, v) in sums.iter_mut().zip(p) {
            *s += v;
        }
    }
    sums
}

/// Cost through the within-cluster pair sums,
/// `Σ_j (1/(2|C_j|)) Σ_{i,i'∈C_j} ‖x_i - x_i'‖²`. Quadratic in cluster size.
pub fn pairwise_cost(data: &Dataset, partition: &Partition) -> Result<f64> {
    partition.check_len(data.len())?;
    let mut total = 0.0;
    for j in 0..partition.k() {
        let members = partition.members(j);
        let mut s = 0.0;
        for (a, &i) in members.iter().enumerate() {
            for &i2 in &members[a + 1..] {
                s += squared_distance(data.point(i), data.point(i2));
            }
        }
        total += s / members.len() as f64;
    }
    Ok(total)
}

/// Index of the nearest row of `centroids`; ties go to the lowest index.
pub(crate) fn nearest(x: ndarray::ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.rows().into_iter().enumerate() {
        let d = squared_distance(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

pub(crate) fn mean_of(points: ArrayView2<'_, f64>, members: &[usize]) -> Array1<f64> {
    let mut mean = Array1::zeros(points.ncols());
    for &i in members {
        mean += &points.row(i);
    }
    mean / members.len() as f64
}
